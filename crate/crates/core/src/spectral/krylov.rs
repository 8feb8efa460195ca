//! Restarted block Krylov iteration for the smallest eigenpairs of
//! `K x = λ M x` (`K` sparse symmetric, `M` diagonal positive), driven by a
//! shift-invert operator `X ↦ (K - s M)⁻¹ M X`.
//!
//! The basis is kept `M`-orthonormal with two passes of block Gram-Schmidt;
//! Ritz pairs come from the Rayleigh-Ritz projection of `K` itself, so the
//! shift only affects convergence speed. On restart the best Ritz vectors are
//! kept and the expansion continues from the unconverged ones.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dense::sym_eig;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone)]
pub struct KrylovOptions {
    pub block: usize,
    pub tol: f64,
    pub max_restarts: usize,
    pub seed: u64,
    /// Ritz values below this are not required to converge (they are
    /// discarded by the caller).
    pub floor: f64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions {
            block: 6,
            tol: 1e-8,
            max_restarts: 30,
            seed: 0,
            floor: 0.0,
        }
    }
}

struct Basis<'a> {
    q: DMatrix<f64>,
    len: usize,
    mass: &'a [f64],
}

impl Basis<'_> {
    fn m_times(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut y = x.clone();
        for (i, &m) in self.mass.iter().enumerate() {
            y.row_mut(i).scale_mut(m);
        }
        y
    }

    /// Orthogonalizes `x` against the basis and itself, appends the surviving
    /// columns and returns how many were added.
    fn append(&mut self, mut x: DMatrix<f64>) -> usize {
        for _ in 0..2 {
            if self.len > 0 {
                let q = self.q.columns(0, self.len);
                let mx = self.m_times(&x);
                let coeff = q.transpose() * mx;
                x -= q * coeff;
            }
        }
        let block_start = self.len;
        let mut added = 0;
        for j in 0..x.ncols() {
            if self.len == self.q.ncols() {
                break;
            }
            let mut v = x.column(j).into_owned();
            let norm0 = m_norm(&v, self.mass);
            if norm0 == 0.0 {
                continue;
            }
            for _ in 0..2 {
                for k in block_start..self.len {
                    let qk = self.q.column(k);
                    let c: f64 = qk.iter().zip(v.iter()).zip(self.mass).map(|((a, b), m)| a * b * m).sum();
                    v.axpy(-c, &qk, 1.0);
                }
            }
            let norm = m_norm(&v, self.mass);
            if norm <= 1e-10 * norm0 {
                continue;
            }
            self.q.set_column(self.len, &(v / norm));
            self.len += 1;
            added += 1;
        }
        added
    }
}

fn m_norm(v: &nalgebra::DVector<f64>, mass: &[f64]) -> f64 {
    v.iter().zip(mass).map(|(x, m)| x * x * m).sum::<f64>().sqrt()
}

fn random_block(rng: &mut ChaCha8Rng, n: usize, b: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, b, |_, _| rng.random_range(-1.0..1.0))
}

/// Smallest `nev` eigenpairs of `K x = λ M x`. `apply` must return
/// `(K - s M)⁻¹ Y` for the given right-hand sides `Y`.
pub fn smallest_eigs(
    k: &CsrMatrix,
    mass: &[f64],
    apply: &dyn Fn(&DMatrix<f64>) -> DMatrix<f64>,
    nev: usize,
    opts: &KrylovOptions,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = k.nrows();
    if nev > n {
        return Err(Error::TooManyEigenpairs {
            requested: nev,
            available: n,
        });
    }
    if nev == 0 {
        return Ok((Vec::new(), DMatrix::zeros(n, 0)));
    }
    let b = opts.block.max(1);
    let cap = n.min((2 * nev + 4 * b).max(nev + 40));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut basis = Basis {
        q: DMatrix::zeros(n, cap),
        len: 0,
        mass,
    };
    let start = random_block(&mut rng, n, b);
    let first = basis.append(start);
    let mut frontier = (0, first);
    let mut last_worst = f64::INFINITY;

    for restart in 0..=opts.max_restarts {
        while basis.len < cap {
            let block = basis.q.columns(frontier.0, frontier.1).into_owned();
            let before = basis.len;
            let added = if block.ncols() == 0 {
                0
            } else {
                basis.append(apply(&basis.m_times(&block)))
            };
            if added == 0 {
                let r = random_block(&mut rng, n, b);
                let added = basis.append(r);
                if added == 0 {
                    break;
                }
                frontier = (before, added);
            } else {
                frontier = (before, added);
            }
        }
        let m = basis.len;
        let q = basis.q.columns(0, m).into_owned();
        let kq = k.mul_dense(&q);
        let h = q.transpose() * &kq;
        let (theta, s) = sym_eig(&h);
        let keep = nev.min(m);
        let s_keep = s.columns(0, keep);
        let u = &q * s_keep;
        let ku = &kq * s_keep;

        let mut worst = 0.0f64;
        let mut unconverged = Vec::new();
        for j in 0..keep {
            if theta[j] < opts.floor {
                continue;
            }
            let mut r2 = 0.0;
            let mut k2 = 0.0;
            for i in 0..n {
                let kui = ku[(i, j)];
                let ri = kui - theta[j] * mass[i] * u[(i, j)];
                r2 += ri * ri;
                k2 += kui * kui;
            }
            let rel = if k2 > 0.0 { (r2 / k2).sqrt() } else { r2.sqrt() };
            worst = worst.max(rel);
            if rel > opts.tol {
                unconverged.push(j);
            }
        }
        log::debug!("krylov restart {restart}: basis {m}, worst relative residual {worst:.3e}");
        if unconverged.is_empty() || m == n {
            return Ok((theta[..keep].to_vec(), u));
        }
        if restart == opts.max_restarts {
            // Accept a stalled iteration if it is close to the tolerance.
            if worst < 1e3 * opts.tol && worst >= 0.5 * last_worst {
                log::warn!("eigensolver stalled at relative residual {worst:.3e}");
                return Ok((theta[..keep].to_vec(), u));
            }
            return Err(Error::NoConvergence(format!(
                "{} of {nev} pairs above tolerance after {restart} restarts (worst {worst:.3e})",
                unconverged.len()
            )));
        }
        last_worst = worst;

        // Thick restart: keep the leading Ritz vectors, expand from the
        // unconverged ones.
        let retain = (keep + b).min(m).min(cap.saturating_sub(b)).max(keep.min(cap - 1));
        let s_ret = s.columns(0, retain);
        let kept = &q * s_ret;
        basis.q.columns_mut(0, retain).copy_from(&kept);
        basis.len = retain;
        let take: Vec<usize> = unconverged.iter().copied().take(b).collect();
        let seed = DMatrix::from_fn(n, take.len(), |i, c| kept[(i, take[c])]);
        let before = basis.len;
        let added = basis.append(apply(&basis.m_times(&seed)));
        frontier = (before, added);
    }
    unreachable!("loop returns on its last iteration")
}
