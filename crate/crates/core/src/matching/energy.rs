//! Conformal, properness and invertibility terms of the matching energy.
//!
//! All terms act on dense coefficient matrices. A map `F` sends coefficients
//! on one shape to coefficients on the other; `induced` is the map obtained
//! from a vertex correspondence by W-projection.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyWeights {
    pub conformal: f64,
    pub properness: f64,
    pub invertibility: f64,
}

impl Default for EnergyWeights {
    fn default() -> Self {
        EnergyWeights {
            conformal: 1.0,
            properness: 1.0,
            invertibility: 1.0,
        }
    }
}

impl EnergyWeights {
    pub fn validate(&self) -> Result<()> {
        let w = [self.conformal, self.properness, self.invertibility];
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Config("energy weights must be finite and nonnegative".into()));
        }
        if w.iter().all(|&x| x == 0.0) {
            return Err(Error::Config("energy weights must not all be zero".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyTerms {
    pub conformal: f64,
    pub properness: f64,
    pub invertibility: f64,
    pub total: f64,
}

/// `‖G_a − Fᵀ G_b F‖²` for a map `F` from `a`-coefficients to `b`-coefficients.
/// Without Gram matrices both bases are taken as orthonormal, giving
/// `‖I − FᵀF‖²`.
pub fn conformal(f: &DMatrix<f64>, grams: Option<(&DMatrix<f64>, &DMatrix<f64>)>) -> f64 {
    match grams {
        Some((ga, gb)) => (ga - f.transpose() * gb * f).norm_squared(),
        None => {
            let ftf = f.transpose() * f;
            (DMatrix::identity(ftf.nrows(), ftf.ncols()) - ftf).norm_squared()
        }
    }
}

/// `‖induced − F‖²`.
pub fn properness(f: &DMatrix<f64>, induced: &DMatrix<f64>) -> f64 {
    (induced - f).norm_squared()
}

/// `‖F G − I‖²` where `G` maps back the other way.
pub fn invertibility(f: &DMatrix<f64>, back: &DMatrix<f64>) -> f64 {
    let fg = f * back;
    (fg - DMatrix::identity(f.nrows(), back.ncols())).norm_squared()
}

/// Weighted energy of one direction: `f` with its induced map and the
/// opposite-direction map `back`.
pub fn directional(
    f: &DMatrix<f64>,
    induced: &DMatrix<f64>,
    back: &DMatrix<f64>,
    weights: &EnergyWeights,
    grams: Option<(&DMatrix<f64>, &DMatrix<f64>)>,
) -> EnergyTerms {
    let c = conformal(f, grams);
    let p = properness(f, induced);
    let i = invertibility(f, back);
    EnergyTerms {
        conformal: c,
        properness: p,
        invertibility: i,
        total: weights.conformal * c + weights.properness * p + weights.invertibility * i,
    }
}

/// Energies of both directions. `f_ts` pulls target coefficients back to the
/// source (induced by the source -> target vertex map), `f_st` the reverse.
pub fn total_energy(
    f_ts: &DMatrix<f64>,
    f_st: &DMatrix<f64>,
    induced_ts: &DMatrix<f64>,
    induced_st: &DMatrix<f64>,
    weights: &EnergyWeights,
) -> Result<(EnergyTerms, EnergyTerms)> {
    weights.validate()?;
    Ok((
        directional(f_ts, induced_ts, f_st, weights, None),
        directional(f_st, induced_st, f_ts, weights, None),
    ))
}
