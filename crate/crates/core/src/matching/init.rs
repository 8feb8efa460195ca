//! Initial functional maps from landmark-circle correspondences.
//!
//! Each pair of corresponding circles is matched by a rotation `α` of the
//! circular coordinate: the target point at `θ` corresponds to the source
//! point at `θ − α`. The rotation is picked from normal derivatives of the
//! landmark harmonics (default), set to zero ("trivial"), or chosen to make
//! the induced circle map most conformal. The resulting circle maps give the
//! landmark blocks; the Laplacian block starts empty.

use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::energy;
use super::fmap::{BlockFunctionalMap, Direction};
use crate::basis::SpectralBasis;
use crate::error::{Error, Result};
use crate::fem::FemOperators;
use crate::spectral::SpectralSolver;
use crate::surgery::CutMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitStrategy {
    #[default]
    NormalDerivatives,
    Trivial,
    ConformalEnergy,
}

impl FromStr for InitStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal-derivatives" => Ok(InitStrategy::NormalDerivatives),
            "trivial" => Ok(InitStrategy::Trivial),
            "conformal-energy" => Ok(InitStrategy::ConformalEnergy),
            _ => Err(Error::Config(format!(
                "unknown init strategy '{s}' (expected normal-derivatives, trivial or conformal-energy)"
            ))),
        }
    }
}

impl std::fmt::Display for InitStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InitStrategy::NormalDerivatives => "normal-derivatives",
            InitStrategy::Trivial => "trivial",
            InitStrategy::ConformalEnergy => "conformal-energy",
        })
    }
}

/// `h_i`: harmonic, 1 on loop `i`, 0 on every other loop.
pub fn landmark_harmonics(solver: &SpectralSolver, num_loops: usize) -> Result<Vec<DVector<f64>>> {
    (0..num_loops)
        .map(|i| {
            let mut vals = vec![0.0; num_loops];
            vals[i] = 1.0;
            solver.harmonic(&vals)
        })
        .collect()
}

/// Weak outward normal derivative of `h` on loop `i`: `(W h)` on the loop
/// vertices, i.e. the flux tested against each vertex's hat function.
/// Outward points into the removed disk, so the values are most negative
/// where `h` grows fastest away from the loop.
pub fn normal_derivative(ops: &FemOperators, h: &DVector<f64>, i: usize) -> Vec<f64> {
    ops.loop_dofs[i]
        .iter()
        .map(|&v| ops.stiffness.row(v).map(|(c, w)| w * h[c]).sum())
        .collect()
}

/// Pointwise values of a weak boundary functional after projection onto the
/// loop's Steklov traces. With `U` orthonormal in the boundary mass `S`,
/// projecting the function `S⁻¹ g` gives `U Uᵀ g`.
pub fn smooth_on_loop(trace: &DMatrix<f64>, weak: &[f64]) -> Vec<f64> {
    let g = DVector::from_column_slice(weak);
    let c = trace.transpose() * g;
    (trace * c).as_slice().to_vec()
}

/// Per-loop data needed to match circles.
#[derive(Debug, Clone)]
pub struct LoopData {
    theta: Vec<f64>,
    mass: DMatrix<f64>,
    trace: DMatrix<f64>,
    sqrt_sigma: Vec<f64>,
    /// Smoothed normal-derivative profile of every other landmark harmonic
    /// of the same component (`None` for the loop itself and for loops in
    /// other components).
    profiles: Vec<Option<Vec<f64>>>,
}

impl LoopData {
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn profile(&self, j: usize) -> Option<&[f64]> {
        self.profiles[j].as_deref()
    }

    fn has_profiles(&self) -> bool {
        self.profiles.iter().any(Option::is_some)
    }
}

/// Collects the circle data of every loop of a cut mesh.
pub fn loop_data(cut: &CutMesh, ops: &FemOperators, solver: &SpectralSolver, basis: &SpectralBasis) -> Result<Vec<LoopData>> {
    let k = ops.num_loops();
    let harmonics = landmark_harmonics(solver, k)?;
    let (labels, _) = cut.mesh().components();
    let comp: Vec<usize> = ops.loop_dofs.iter().map(|l| labels[l[0]]).collect();
    Ok((0..k)
        .map(|i| {
            let trace = basis.trace(i).clone();
            let profiles = (0..k)
                .map(|j| {
                    (j != i && comp[j] == comp[i])
                        .then(|| smooth_on_loop(&trace, &normal_derivative(ops, &harmonics[j], i)))
                })
                .collect();
            LoopData {
                theta: cut.theta(i).to_vec(),
                mass: ops.steklov[i].clone(),
                sqrt_sigma: basis.steklov_values(i).iter().map(|s| s.sqrt()).collect(),
                trace,
                profiles,
            }
        })
        .collect())
}

/// Linear interpolation of loop values at circular coordinate `x`.
fn interpolate(theta: &[f64], values: &[f64], x: f64) -> f64 {
    let n = theta.len();
    let x = x.rem_euclid(1.0);
    // First index with theta > x; the segment starts one before it.
    let hi = theta.partition_point(|&t| t <= x);
    let lo = if hi == 0 { n - 1 } else { hi - 1 };
    let (t0, t1, v1) = if hi == n {
        (theta[lo], 1.0 + theta[0], values[0])
    } else if hi == 0 {
        (theta[lo] - 1.0, theta[0], values[0])
    } else {
        (theta[lo], theta[hi], values[hi])
    };
    let v0 = values[lo];
    if t1 - t0 <= 0.0 {
        return v0;
    }
    let s = (x - t0) / (t1 - t0);
    v0 + s * (v1 - v0)
}

fn candidate_shifts(a: &LoopData, b: &LoopData) -> Vec<f64> {
    let n = a.len().max(b.len());
    (0..n).map(|m| m as f64 / n as f64).collect()
}

/// Rotation aligning the source normal-derivative profiles with the target
/// ones, measured in the target loop's L2 norm. Candidates are the multiples
/// of `1/n` for the denser loop; the smallest rotation wins ties.
pub fn optimal_shift(target: &LoopData, source: &LoopData) -> f64 {
    let mut best = (0.0, f64::INFINITY);
    for alpha in candidate_shifts(target, source) {
        let mut cost = 0.0;
        for (pt, ps) in target.profiles.iter().zip(&source.profiles) {
            let (Some(pt), Some(ps)) = (pt, ps) else { continue };
            let d = DVector::from_iterator(
                target.len(),
                target
                    .theta
                    .iter()
                    .zip(pt)
                    .map(|(&t, &v)| v - interpolate(&source.theta, ps, t - alpha)),
            );
            cost += (d.transpose() * &target.mass * &d)[(0, 0)];
        }
        if cost < best.1 {
            best = (alpha, cost);
        }
    }
    best.0
}

fn circular_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// For each vertex of `from`, the vertex of `to` nearest to its coordinate
/// plus `shift` (circular distance, ties to the smallest index).
pub fn circle_correspondence(from: &[f64], to: &[f64], shift: f64) -> Vec<usize> {
    from.iter()
        .map(|&t| {
            let x = t + shift;
            let mut best = (0, f64::INFINITY);
            for (j, &u) in to.iter().enumerate() {
                let d = circular_gap(x, u);
                if d < best.1 {
                    best = (j, d);
                }
            }
            best.0
        })
        .collect()
}

/// Landmark block induced by a circle map `a -> b` (one `b` loop vertex per
/// `a` loop vertex): `diag(√σ_a) U_aᵀ S_a Π U_b diag(1/√σ_b)`. This equals
/// the W-projection of the harmonically extended pulled-back traces, with
/// both bases W-normalized.
pub fn circle_fmap(a: &LoopData, map: &[usize], b: &LoopData) -> DMatrix<f64> {
    let nb = b.trace.ncols();
    let pulled = DMatrix::from_fn(map.len(), nb, |r, c| b.trace[(map[r], c)] / b.sqrt_sigma[c]);
    let mut f = a.trace.transpose() * &a.mass * pulled;
    for (r, s) in a.sqrt_sigma.iter().enumerate() {
        f.row_mut(r).scale_mut(*s);
    }
    f
}

/// Circle maps for a given rotation: (source -> target, target -> source).
fn circle_maps(source: &LoopData, target: &LoopData, alpha: f64) -> (Vec<usize>, Vec<usize>) {
    (
        circle_correspondence(&source.theta, &target.theta, alpha),
        circle_correspondence(&target.theta, &source.theta, -alpha),
    )
}

/// Initial guess: both landmark-block maps plus the chosen rotations.
#[derive(Debug, Clone)]
pub struct InitialGuess {
    /// Target coefficients to source coefficients.
    pub f_ts: BlockFunctionalMap,
    pub f_st: BlockFunctionalMap,
    pub shifts: Vec<f64>,
}

pub fn initial_fmap(source: &[LoopData], target: &[LoopData], strategy: InitStrategy) -> Result<InitialGuess> {
    if source.len() != target.len() {
        return Err(Error::Config(format!(
            "mismatched landmark counts: {} on the source, {} on the target",
            source.len(),
            target.len()
        )));
    }
    let mut shifts = Vec::with_capacity(source.len());
    let mut h_ts = Vec::new();
    let mut h_st = Vec::new();
    for (i, (s, t)) in source.iter().zip(target).enumerate() {
        let alpha = match strategy {
            InitStrategy::Trivial => 0.0,
            InitStrategy::NormalDerivatives => {
                if s.has_profiles() && t.has_profiles() {
                    optimal_shift(t, s)
                } else {
                    log::info!("landmark {i} is alone on its component; using the trivial rotation");
                    0.0
                }
            }
            InitStrategy::ConformalEnergy => {
                let mut best = (0.0, f64::INFINITY);
                for alpha in candidate_shifts(t, s) {
                    let (st, ts) = circle_maps(s, t, alpha);
                    let e = energy::conformal(&circle_fmap(s, &st, t), None)
                        + energy::conformal(&circle_fmap(t, &ts, s), None);
                    if e < best.1 {
                        best = (alpha, e);
                    }
                }
                best.0
            }
        };
        let (st, ts) = circle_maps(s, t, alpha);
        h_ts.push(circle_fmap(s, &st, t));
        h_st.push(circle_fmap(t, &ts, s));
        shifts.push(alpha);
    }
    let empty = DMatrix::zeros(0, 0);
    Ok(InitialGuess {
        f_ts: BlockFunctionalMap::new(empty.clone(), h_ts, Direction::TargetToSource)?,
        f_st: BlockFunctionalMap::new(empty, h_st, Direction::SourceToTarget)?,
        shifts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_basis;
    use crate::fem::SteklovMass;
    use crate::mesh::{shapes, TriangleMesh};
    use crate::spectral::SpectralOptions;
    use crate::surgery::{circle_radius, cut_all, LandmarkSet};
    use std::f64::consts::TAU;

    fn synthetic(n: usize, f: impl Fn(f64) -> f64) -> LoopData {
        let theta: Vec<f64> = (0..n).map(|p| p as f64 / n as f64).collect();
        let profile = theta.iter().map(|&t| f(t)).collect();
        LoopData {
            mass: DMatrix::from_diagonal_element(n, n, 1.0 / n as f64),
            trace: DMatrix::zeros(n, 0),
            sqrt_sigma: Vec::new(),
            theta,
            profiles: vec![None, Some(profile)],
        }
    }

    fn shape(t: f64) -> f64 {
        (TAU * t).cos() + 0.5 * (2.0 * TAU * t).sin() + 0.2 * (3.0 * TAU * t).cos()
    }

    #[test]
    fn shift_of_identical_loops_is_zero() {
        let a = synthetic(24, shape);
        assert_eq!(optimal_shift(&a, &a), 0.0);
    }

    #[test]
    fn quarter_turn_is_recovered() {
        let target = synthetic(24, shape);
        let source = synthetic(24, |t| shape(t + 0.25));
        assert!((optimal_shift(&target, &source) - 0.25).abs() < 1.0 / 24.0);
    }

    #[test]
    fn shift_is_equivariant() {
        // Different resolutions on each side; recovered rotation tracks the
        // imposed one within a grid step.
        let target = synthetic(30, shape);
        for m in 0..17 {
            let delta = m as f64 / 17.0;
            let source = synthetic(17, |t| shape(t + delta));
            let alpha = optimal_shift(&target, &source);
            assert!(circular_gap(alpha, delta) <= 1.0 / 30.0 + 1e-12, "{delta} -> {alpha}");
        }
    }

    #[test]
    fn interpolation_wraps() {
        let theta = [0.0, 0.25, 0.5, 0.75];
        let v = [0.0, 1.0, 2.0, 3.0];
        assert!((interpolate(&theta, &v, 0.875) - 1.5).abs() < 1e-12);
        assert!((interpolate(&theta, &v, 0.125) - 0.5).abs() < 1e-12);
        assert!((interpolate(&theta, &v, -0.125) - 1.5).abs() < 1e-12);
        assert!((interpolate(&theta, &v, 0.5) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn circle_correspondence_rotates() {
        let a: Vec<f64> = (0..8).map(|p| p as f64 / 8.0).collect();
        assert_eq!(circle_correspondence(&a, &a, 0.0), (0..8).collect::<Vec<_>>());
        assert_eq!(circle_correspondence(&a, &a, 0.25), vec![2, 3, 4, 5, 6, 7, 0, 1]);
        assert_eq!(circle_correspondence(&a, &a, -0.25), vec![6, 7, 0, 1, 2, 3, 4, 5]);
    }

    struct Setup {
        cut: CutMesh,
        ops: FemOperators,
    }

    fn setup_cut(cut: CutMesh) -> Setup {
        let ops = FemOperators::new(&cut, SteklovMass::Lumped).unwrap();
        Setup { cut, ops }
    }

    fn three_hole_disk() -> (TriangleMesh, Vec<usize>) {
        let m = shapes::disk(24);
        let targets = [[0.0, 0.5, 0.0], [-0.43, -0.25, 0.0], [0.43, -0.25, 0.0]];
        let idx = targets
            .iter()
            .map(|p| shapes::nearest_vertex(&m, &nalgebra::Vector3::new(p[0], p[1], p[2])))
            .collect();
        (m, idx)
    }

    fn cut_with(m: &TriangleMesh, idx: Vec<usize>) -> CutMesh {
        let radii: Vec<f64> = idx.iter().map(|&g| circle_radius(m, g, m, g, 0.5).unwrap()).collect();
        cut_all(m, &LandmarkSet::new(m, idx).unwrap(), &radii, 3).unwrap()
    }

    #[test]
    fn two_loops_sum_to_one() {
        let s = setup_cut(CutMesh::from_boundary(&shapes::annulus(0.5, 1.0, 0.08)));
        let solver = SpectralSolver::new(&s.ops, s.cut.mesh(), SpectralOptions::default()).unwrap();
        let h = landmark_harmonics(&solver, 2).unwrap();
        assert!((&h[0] + &h[1]).iter().all(|v| (v - 1.0).abs() < 1e-9));
        for &v in &s.ops.loop_dofs[0] {
            assert_eq!(h[0][v], 1.0);
            assert_eq!(h[1][v], 0.0);
        }
    }

    #[test]
    fn radial_flux_is_constant() {
        let s = setup_cut(CutMesh::from_boundary(&shapes::annulus(0.5, 1.0, 0.05)));
        let solver = SpectralSolver::new(&s.ops, s.cut.mesh(), SpectralOptions::default()).unwrap();
        let basis = build_basis(&solver, &s.ops, 0, 8).unwrap();
        let h = landmark_harmonics(&solver, 2).unwrap();
        for i in 0..2 {
            let prof = smooth_on_loop(basis.trace(i), &normal_derivative(&s.ops, &h[1 - i], i));
            let mean = prof.iter().sum::<f64>() / prof.len() as f64;
            let dev = prof.iter().map(|p| (p - mean).abs()).fold(0.0, f64::max);
            assert!(dev < 1e-3 * mean.abs(), "loop {i}: mean {mean}, deviation {dev}");
        }
    }

    #[test]
    fn flux_balance() {
        let (m, idx) = three_hole_disk();
        let s = setup_cut(cut_with(&m, idx));
        let solver = SpectralSolver::new(&s.ops, s.cut.mesh(), SpectralOptions::default()).unwrap();
        let h = landmark_harmonics(&solver, 3).unwrap();
        for i in 0..3 {
            let own = s.ops.stiffness.inner(h[i].as_slice(), h[i].as_slice());
            let others: f64 = (0..3)
                .filter(|&j| j != i)
                .map(|j| normal_derivative(&s.ops, &h[j], i).iter().sum::<f64>())
                .sum();
            assert!((others + own).abs() < 1e-6 * own, "{others} vs {own}");
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn normal_derivative_points_to_other_landmark() {
        let (m, idx) = three_hole_disk();
        let s = setup_cut(cut_with(&m, idx.clone()));
        let solver = SpectralSolver::new(&s.ops, s.cut.mesh(), SpectralOptions::default()).unwrap();
        let basis = build_basis(&solver, &s.ops, 0, 6).unwrap();
        let h = landmark_harmonics(&solver, 3).unwrap();
        let top = m.vertex(idx[0]);
        for i in 1..3 {
            let prof = smooth_on_loop(basis.trace(i), &normal_derivative(&s.ops, &h[0], i));
            let p = (0..prof.len()).min_by(|&a, &b| prof[a].total_cmp(&prof[b])).unwrap();
            let centre = m.vertex(idx[i]);
            let towards = (top - centre).normalize();
            let at = (s.cut.mesh().vertex(s.ops.loop_dofs[i][p]) - centre).normalize();
            assert!(towards.dot(&at) > 0.9, "loop {i}: cos {}", towards.dot(&at));
        }
    }

    #[test]
    fn self_initialization_is_identity() {
        let m = shapes::bumpy_sphere(8, 0.1);
        let idx = shapes::sphere_landmarks(&m, 5);
        let s = setup_cut(cut_with(&m, idx));
        let solver = SpectralSolver::new(&s.ops, s.cut.mesh(), SpectralOptions::default()).unwrap();
        let basis = build_basis(&solver, &s.ops, 0, 6).unwrap();
        let data = loop_data(&s.cut, &s.ops, &solver, &basis).unwrap();
        for strategy in [InitStrategy::NormalDerivatives, InitStrategy::Trivial, InitStrategy::ConformalEnergy] {
            let g = initial_fmap(&data, &data, strategy).unwrap();
            assert!(g.shifts.iter().all(|&a| a == 0.0), "{strategy}: {:?}", g.shifts);
            for j in 0..5 {
                let d = g.f_ts.h_block(j) - DMatrix::<f64>::identity(6, 6);
                assert!(d.amax() < 1e-9, "{strategy}");
            }
            assert_eq!(g.f_ts.g_size(), 0);
        }
    }

    #[test]
    fn rotated_origin_is_recovered() {
        // Same geometry with each loop's origin moved: the source loop data
        // is rolled by a few vertices.
        let m = shapes::bumpy_sphere(8, 0.1);
        let idx = shapes::sphere_landmarks(&m, 5);
        let s = setup_cut(cut_with(&m, idx));
        let solver = SpectralSolver::new(&s.ops, s.cut.mesh(), SpectralOptions::default()).unwrap();
        let basis = build_basis(&solver, &s.ops, 0, 6).unwrap();
        let data = loop_data(&s.cut, &s.ops, &solver, &basis).unwrap();
        let rolled: Vec<LoopData> = data
            .iter()
            .map(|d| {
                let n = d.len();
                let r = n / 4;
                let perm: Vec<usize> = (0..n).map(|p| (p + r) % n).collect();
                let t0 = d.theta[r];
                LoopData {
                    theta: perm.iter().map(|&p| (d.theta[p] - t0).rem_euclid(1.0)).collect(),
                    mass: DMatrix::from_fn(n, n, |a, b| d.mass[(perm[a], perm[b])]),
                    trace: DMatrix::from_fn(n, d.trace.ncols(), |a, c| d.trace[(perm[a], c)]),
                    sqrt_sigma: d.sqrt_sigma.clone(),
                    profiles: d
                        .profiles
                        .iter()
                        .map(|p| p.as_ref().map(|p| perm.iter().map(|&q| p[q]).collect()))
                        .collect(),
                }
            })
            .collect();
        let g = initial_fmap(&rolled, &data, InitStrategy::NormalDerivatives).unwrap();
        for (i, d) in data.iter().enumerate() {
            let expected = d.theta[d.len() / 4];
            // Arc-length coordinates are not on the candidate grid.
            assert!(
                circular_gap(g.shifts[i], expected) <= 1.0 / d.len() as f64,
                "{} vs {expected}",
                g.shifts[i]
            );
        }
    }
}
