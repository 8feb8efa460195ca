//! Iterative refinement: alternate vertex maps from functional maps (a
//! nearest-neighbour search) with functional maps from vertex maps, growing
//! the Laplacian block each round. Landmark blocks keep their size.

use std::str::FromStr;

use nalgebra::DMatrix;
use serde::Serialize;

use super::energy::{self, EnergyTerms, EnergyWeights};
use super::fmap::{induced_fmap, BlockFunctionalMap, Direction};
use super::nn::nearest_rows;
use crate::basis::SpectralBasis;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NnMode {
    /// Search over the sum of the three energy embeddings.
    #[default]
    Fast,
    /// Search over their concatenation.
    Principled,
}

impl FromStr for NnMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(NnMode::Fast),
            "principled" => Ok(NnMode::Principled),
            _ => Err(Error::Config(format!("unknown mode '{s}' (expected fast or principled)"))),
        }
    }
}

impl std::fmt::Display for NnMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NnMode::Fast => "fast",
            NnMode::Principled => "principled",
        })
    }
}

/// Vertex map `b -> a` from functional maps: for every row of `phi_b`, the
/// nearest row of `phi_a` in the energy embedding. `f_ab` sends
/// `a`-coefficients to `b`-coefficients (it is the pullback by the map being
/// computed) and `f_ba` goes the other way.
///
/// Principled mode compares `[Φ_a f_abᵀ | Φ_a | Φ_a f_ba]` with
/// `[Φ_b | Φ_b f_ab | Φ_b]`, each part scaled by the square root of its
/// energy weight. Fast mode compares the sums of the parts instead.
pub fn p2p_from_fmaps(
    f_ab: &DMatrix<f64>,
    f_ba: &DMatrix<f64>,
    phi_a: &DMatrix<f64>,
    phi_b: &DMatrix<f64>,
    weights: &EnergyWeights,
    mode: NnMode,
) -> Result<Vec<(usize, f64)>> {
    let (da, db) = (phi_a.ncols(), phi_b.ncols());
    if da == 0 || db == 0 {
        return Err(Error::DimensionMismatch("empty basis".into()));
    }
    if f_ab.shape() != (db, da) || f_ba.shape() != (da, db) {
        return Err(Error::DimensionMismatch(format!(
            "functional maps {:?} and {:?} do not fit bases of size {da} and {db}",
            f_ab.shape(),
            f_ba.shape()
        )));
    }
    let (wc, wp, wi) = (
        weights.conformal.sqrt(),
        weights.properness.sqrt(),
        weights.invertibility.sqrt(),
    );
    let (targets, queries) = match mode {
        NnMode::Principled => {
            let mut t = DMatrix::zeros(phi_a.nrows(), db + da + db);
            t.columns_mut(0, db).copy_from(&(phi_a * f_ab.transpose() * wc));
            t.columns_mut(db, da).copy_from(&(phi_a * wp));
            t.columns_mut(db + da, db).copy_from(&(phi_a * f_ba * wi));
            let mut q = DMatrix::zeros(phi_b.nrows(), db + da + db);
            q.columns_mut(0, db).copy_from(&(phi_b * wc));
            q.columns_mut(db, da).copy_from(&(phi_b * f_ab * wp));
            q.columns_mut(db + da, db).copy_from(&(phi_b * wi));
            (t, q)
        }
        NnMode::Fast => {
            if da != db {
                return Err(Error::DimensionMismatch(
                    "fast mode needs bases of equal size on both shapes".into(),
                ));
            }
            let id = DMatrix::<f64>::identity(da, da);
            let ta = f_ab.transpose() * wc + &id * wp + f_ba * wi;
            let qb = &id * wc + f_ab * wp + &id * wi;
            (phi_a * ta, phi_b * qb)
        }
    };
    Ok(nearest_rows(&targets, &queries))
}

#[derive(Debug, Clone)]
pub struct RefineOptions {
    pub k_step: usize,
    /// Final size of the Laplacian block.
    pub target_g: usize,
    pub mode: NnMode,
    pub weights: EnergyWeights,
}

/// Energies recorded after each functional-map update.
#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub g_size: usize,
    /// Energy of the map pulling target functions to the source.
    pub target_to_source: EnergyTerms,
    pub source_to_target: EnergyTerms,
    /// Fraction of source vertices whose image changed in this round.
    pub changed: f64,
}

/// One side of the problem: basis, stiffness and the vertices that take part
/// in the final search.
pub struct Side<'a> {
    pub basis: &'a SpectralBasis,
    pub stiffness: &'a CsrMatrix,
    /// Rows used in the final search (original, non-landmark vertices).
    pub final_rows: &'a [usize],
}

#[derive(Debug, Clone)]
pub struct Refined {
    pub f_ts: BlockFunctionalMap,
    pub f_st: BlockFunctionalMap,
    /// For each entry of the source's `final_rows`, the matched target
    /// vertex (a cut-mesh index) and the embedding distance.
    pub final_st: Vec<(usize, f64)>,
    pub final_ts: Vec<(usize, f64)>,
    pub log: Vec<IterationRecord>,
}

fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |r, c| m[(rows[r], c)])
}

/// Induced map and its block-diagonal projection.
fn induced_block(
    phi_a: &DMatrix<f64>,
    w_a: &CsrMatrix,
    map: &[usize],
    phi_b: &DMatrix<f64>,
    layout: (usize, usize, usize),
    dir: Direction,
) -> Result<(BlockFunctionalMap, DMatrix<f64>)> {
    let full = induced_fmap(phi_a, w_a, map, phi_b);
    let (g, k, n_ds) = layout;
    let (f, _) = BlockFunctionalMap::project(&full, g, k, n_ds, dir)?;
    Ok((f, full))
}

pub fn refine(
    source: &Side,
    target: &Side,
    f_ts: BlockFunctionalMap,
    f_st: BlockFunctionalMap,
    opts: &RefineOptions,
) -> Result<Refined> {
    if opts.k_step == 0 {
        return Err(Error::Config("k_step must be at least 1".into()));
    }
    opts.weights.validate()?;
    let k = source.basis.num_loops();
    let n_ds = source.basis.n_ds();
    if target.basis.num_loops() != k || target.basis.n_ds() != n_ds {
        return Err(Error::DimensionMismatch("bases differ in landmark blocks".into()));
    }
    let max_g = source.basis.n_lb().min(target.basis.n_lb());
    if opts.target_g > max_g {
        return Err(Error::TooManyEigenpairs {
            requested: opts.target_g,
            available: max_g,
        });
    }
    let (mut f_ts, mut f_st) = (f_ts, f_st);
    let mut g = f_ts.g_size();
    let mut log = Vec::new();
    let mut previous: Option<Vec<usize>> = None;
    while g < opts.target_g {
        let phi_s = source.basis.truncated(g);
        let phi_t = target.basis.truncated(g);
        let (dts, dst) = (f_ts.to_dense(), f_st.to_dense());
        let map_st: Vec<usize> = p2p_from_fmaps(&dts, &dst, &phi_t, &phi_s, &opts.weights, opts.mode)?
            .into_iter()
            .map(|p| p.0)
            .collect();
        let map_ts: Vec<usize> = p2p_from_fmaps(&dst, &dts, &phi_s, &phi_t, &opts.weights, opts.mode)?
            .into_iter()
            .map(|p| p.0)
            .collect();
        let changed = match &previous {
            Some(prev) => prev.iter().zip(&map_st).filter(|(a, b)| a != b).count() as f64 / map_st.len() as f64,
            None => 1.0,
        };
        g = (g + opts.k_step).min(opts.target_g);
        let phi_s = source.basis.truncated(g);
        let phi_t = target.basis.truncated(g);
        let (new_ts, induced_ts) = induced_block(
            &phi_s,
            source.stiffness,
            &map_st,
            &phi_t,
            (g, k, n_ds),
            Direction::TargetToSource,
        )?;
        let (new_st, induced_st) = induced_block(
            &phi_t,
            target.stiffness,
            &map_ts,
            &phi_s,
            (g, k, n_ds),
            Direction::SourceToTarget,
        )?;
        f_ts = new_ts;
        f_st = new_st;
        let (dts, dst) = (f_ts.to_dense(), f_st.to_dense());
        let record = IterationRecord {
            iteration: log.len() + 1,
            g_size: g,
            target_to_source: energy::directional(&dts, &induced_ts, &dst, &opts.weights, None),
            source_to_target: energy::directional(&dst, &induced_st, &dts, &opts.weights, None),
            changed,
        };
        log::debug!(
            "refinement {}: G size {g}, energies {:.4e} / {:.4e}, {:.1}% changed",
            record.iteration,
            record.target_to_source.total,
            record.source_to_target.total,
            100.0 * changed
        );
        log.push(record);
        previous = Some(map_st);
    }
    let phi_s = select_rows(&source.basis.truncated(g), source.final_rows);
    let phi_t = select_rows(&target.basis.truncated(g), target.final_rows);
    let (dts, dst) = (f_ts.to_dense(), f_st.to_dense());
    let translate = |res: Vec<(usize, f64)>, rows: &[usize]| -> Vec<(usize, f64)> {
        res.into_iter().map(|(i, d)| (rows[i], d.sqrt())).collect()
    };
    let final_st = translate(
        p2p_from_fmaps(&dts, &dst, &phi_t, &phi_s, &opts.weights, opts.mode)?,
        target.final_rows,
    );
    let final_ts = translate(
        p2p_from_fmaps(&dst, &dts, &phi_s, &phi_t, &opts.weights, opts.mode)?,
        source.final_rows,
    );
    Ok(Refined {
        f_ts,
        f_st,
        final_st,
        final_ts,
        log,
    })
}
