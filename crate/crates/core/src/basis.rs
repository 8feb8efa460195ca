//! Landmark-adapted reduced basis: Dirichlet-Laplacian block followed by one
//! Dirichlet-Steklov block per landmark loop, every column normalized in the
//! Dirichlet (W) inner product.

use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fem::FemOperators;
use crate::spectral::SpectralSolver;

#[derive(Debug, Clone)]
pub struct SpectralBasis {
    /// `n_vertices × (n_lb + k·n_ds)`.
    phi: DMatrix<f64>,
    n_lb: usize,
    n_ds: usize,
    laplacian_values: Vec<f64>,
    steklov_values: Vec<Vec<f64>>,
    /// Per loop, the `|Γ| × n_ds` boundary traces, orthonormal in the loop's
    /// boundary mass.
    traces: Vec<DMatrix<f64>>,
}

impl SpectralBasis {
    pub fn dim(&self) -> usize {
        self.phi.ncols()
    }

    pub fn num_vertices(&self) -> usize {
        self.phi.nrows()
    }

    pub fn n_lb(&self) -> usize {
        self.n_lb
    }

    pub fn n_ds(&self) -> usize {
        self.n_ds
    }

    pub fn num_loops(&self) -> usize {
        self.steklov_values.len()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.phi
    }

    /// Column range of the Laplacian block.
    pub fn g_range(&self) -> std::ops::Range<usize> {
        0..self.n_lb
    }

    /// Column range of the Steklov block of loop `j`.
    pub fn h_range(&self, j: usize) -> std::ops::Range<usize> {
        let s = self.n_lb + j * self.n_ds;
        s..s + self.n_ds
    }

    /// Block boundaries as ranges: G first, then each H_j.
    pub fn block_ranges(&self) -> Vec<std::ops::Range<usize>> {
        std::iter::once(self.g_range())
            .chain((0..self.num_loops()).map(|j| self.h_range(j)))
            .collect()
    }

    pub fn laplacian_values(&self) -> &[f64] {
        &self.laplacian_values
    }

    pub fn steklov_values(&self, j: usize) -> &[f64] {
        &self.steklov_values[j]
    }

    pub fn trace(&self, j: usize) -> &DMatrix<f64> {
        &self.traces[j]
    }

    /// Columns of the first `g` Laplacian functions followed by every
    /// Steklov block.
    pub fn truncated(&self, g: usize) -> DMatrix<f64> {
        assert!(g <= self.n_lb);
        let k = self.num_loops();
        let mut out = DMatrix::zeros(self.phi.nrows(), g + k * self.n_ds);
        out.columns_mut(0, g).copy_from(&self.phi.columns(0, g));
        if k > 0 {
            out.columns_mut(g, k * self.n_ds)
                .copy_from(&self.phi.columns(self.n_lb, k * self.n_ds));
        }
        out
    }
}

/// Solves all eigenproblems and assembles the W-normalized basis.
pub fn build_basis(solver: &SpectralSolver, ops: &FemOperators, n_lb: usize, n_ds: usize) -> Result<SpectralBasis> {
    let k = ops.num_loops();
    for l in &ops.loop_dofs {
        if n_ds > l.len() {
            return Err(Error::TooManyEigenpairs {
                requested: n_ds,
                available: l.len(),
            });
        }
    }
    let n = ops.num_vertices();
    let mut phi = DMatrix::zeros(n, n_lb + k * n_ds);
    let lap = if n_lb > 0 {
        Some(solver.laplacian(n_lb)?)
    } else {
        None
    };
    let mut laplacian_values = Vec::new();
    if let Some(lap) = &lap {
        laplacian_values = lap.values.clone();
        for c in 0..n_lb {
            let col = lap.vectors.column(c);
            let norm = ops.stiffness.inner(col.as_slice(), col.as_slice()).sqrt();
            phi.set_column(c, &(col / norm));
        }
    }
    let mut steklov_values = Vec::with_capacity(k);
    let mut traces = Vec::with_capacity(k);
    for j in 0..k {
        let set = solver.steklov(j, n_ds)?;
        let b = &ops.loop_dofs[j];
        traces.push(DMatrix::from_fn(b.len(), n_ds, |p, c| set.vectors[(b[p], c)]));
        for c in 0..n_ds {
            let col = set.vectors.column(c);
            let norm = ops.stiffness.inner(col.as_slice(), col.as_slice()).sqrt();
            phi.set_column(n_lb + j * n_ds + c, &(col / norm));
        }
        steklov_values.push(set.values);
    }
    Ok(SpectralBasis {
        phi,
        n_lb,
        n_ds,
        laplacian_values,
        steklov_values,
        traces,
    })
}

/// `Φᵀ W Φ`.
pub fn w_gram(basis: &SpectralBasis, ops: &FemOperators) -> DMatrix<f64> {
    let wphi = ops.stiffness.mul_dense(basis.matrix());
    let g = basis.matrix().transpose() * wphi;
    (&g + g.transpose()) * 0.5
}

/// Summary of one block pair of the W-Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPairStat {
    /// Block labels: "G" or "H<j>" (1-based).
    pub a: String,
    pub b: String,
    /// Largest |entry| (off-diagonal blocks) or largest deviation from the
    /// identity (diagonal blocks).
    pub max: f64,
    pub mean: f64,
}

fn block_label(i: usize) -> String {
    if i == 0 {
        "G".to_string()
    } else {
        format!("H{i}")
    }
}

pub fn orthogonality_report(basis: &SpectralBasis, gram: &DMatrix<f64>) -> Vec<BlockPairStat> {
    let ranges = basis.block_ranges();
    let mut out = Vec::new();
    for (ia, ra) in ranges.iter().enumerate() {
        for (ib, rb) in ranges.iter().enumerate().skip(ia) {
            if ra.is_empty() || rb.is_empty() {
                continue;
            }
            let (mut max, mut sum) = (0.0f64, 0.0);
            for r in ra.clone() {
                for c in rb.clone() {
                    let target = if r == c { 1.0 } else { 0.0 };
                    let d = (gram[(r, c)] - target).abs();
                    max = max.max(d);
                    sum += d;
                }
            }
            out.push(BlockPairStat {
                a: block_label(ia),
                b: block_label(ib),
                max,
                mean: sum / (ra.len() * rb.len()) as f64,
            });
        }
    }
    out
}

/// Largest |entry| over all off-diagonal blocks.
pub fn max_cross_block(report: &[BlockPairStat]) -> f64 {
    report.iter().filter(|s| s.a != s.b).map(|s| s.max).fold(0.0, f64::max)
}

pub fn write_report_csv<W: Write>(report: &[BlockPairStat], mut out: W) -> std::io::Result<()> {
    writeln!(out, "block_a,block_b,max_abs,mean_abs")?;
    for s in report {
        writeln!(out, "{},{},{:e},{:e}", s.a, s.b, s.max, s.mean)?;
    }
    Ok(())
}

pub fn write_matrix_csv<W: Write>(m: &DMatrix<f64>, mut out: W) -> std::io::Result<()> {
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:e}", m[(r, c)])).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::SteklovMass;
    use crate::mesh::shapes;
    use crate::spectral::SpectralOptions;
    use crate::surgery::{circle_radius, cut_all, CutMesh, LandmarkSet};

    fn sphere_cut(landmarks: usize) -> CutMesh {
        let m = shapes::icosphere(12);
        let idx = shapes::sphere_landmarks(&m, landmarks);
        let radii: Vec<f64> = idx.iter().map(|&g| circle_radius(&m, g, &m, g, 0.5).unwrap()).collect();
        cut_all(&m, &LandmarkSet::new(&m, idx).unwrap(), &radii, 3).unwrap()
    }

    #[test]
    fn sphere_basis_structure() {
        let cut = sphere_cut(6);
        let ops = FemOperators::new(&cut, SteklovMass::Lumped).unwrap();
        let solver = SpectralSolver::new(&ops, cut.mesh(), SpectralOptions::default()).unwrap();
        let basis = build_basis(&solver, &ops, 30, 10).unwrap();
        assert_eq!(basis.dim(), 30 + 6 * 10);
        let gram = w_gram(&basis, &ops);
        for i in 0..basis.dim() {
            assert!((gram[(i, i)] - 1.0).abs() < 1e-9);
        }
        let report = orthogonality_report(&basis, &gram);
        for s in &report {
            if s.a == s.b || s.a == "G" {
                assert!(s.max <= 1e-6, "{} vs {}: {}", s.a, s.b, s.max);
            } else {
                // The lowest mode of every loop carries most of its flux, so
                // these pairs overlap by roughly the flux share (about 0.23 for
                // neighbouring holes). Higher modes are nearly orthogonal.
                assert!(s.mean <= 0.01 && s.max <= 0.3, "{} vs {}: {:?}", s.a, s.b, s);
            }
        }
        // Normalization by √eigenvalue agrees with explicit W-norm division.
        let lap = solver.laplacian(30).unwrap();
        for c in 0..30 {
            let via_value = lap.vectors.column(c) / lap.values[c].sqrt();
            assert!((via_value - basis.matrix().column(c)).amax() < 1e-9);
        }
    }

    #[test]
    fn single_landmark_closed_surface() {
        let cut = sphere_cut(1);
        let ops = FemOperators::new(&cut, SteklovMass::Lumped).unwrap();
        let solver = SpectralSolver::new(&ops, cut.mesh(), SpectralOptions::default()).unwrap();
        let basis = build_basis(&solver, &ops, 20, 10).unwrap();
        assert_eq!(basis.dim(), 30);
        let gram = w_gram(&basis, &ops);
        assert!((gram - DMatrix::identity(30, 30)).amax() < 1e-6);
    }

    #[test]
    fn too_many_steklov_functions() {
        let cut = sphere_cut(2);
        let ops = FemOperators::new(&cut, SteklovMass::Lumped).unwrap();
        let solver = SpectralSolver::new(&ops, cut.mesh(), SpectralOptions::default()).unwrap();
        let n = ops.loop_dofs[0].len();
        assert!(matches!(
            build_basis(&solver, &ops, 5, n + 1),
            Err(Error::TooManyEigenpairs { .. })
        ));
    }
}
