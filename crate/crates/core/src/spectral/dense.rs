//! Dense symmetric (generalized) eigensolvers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Eigenpairs of a symmetric matrix, ascending. The input is symmetrized
/// first.
pub fn sym_eig(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Solves `A x = λ diag(d) x` with `d > 0`; eigenvectors are
/// `diag(d)`-orthonormal.
pub fn generalized_eig_diag(a: &DMatrix<f64>, d: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if d.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::NotPositiveDefinite("diagonal mass has nonpositive entries".into()));
    }
    let inv_sqrt: Vec<f64> = d.iter().map(|x| 1.0 / x.sqrt()).collect();
    let c = DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| inv_sqrt[i] * a[(i, j)] * inv_sqrt[j]);
    let (values, mut y) = sym_eig(&c);
    for (i, s) in inv_sqrt.iter().enumerate() {
        y.row_mut(i).scale_mut(*s);
    }
    Ok((values, y))
}

/// Solves `A x = λ B x` with `B` symmetric positive definite; eigenvectors
/// are `B`-orthonormal.
pub fn generalized_eig_spd(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let chol = nalgebra::Cholesky::new((b + b.transpose()) * 0.5)
        .ok_or_else(|| Error::NotPositiveDefinite("dense mass matrix".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NotPositiveDefinite("dense mass factor".into()))?;
    let c = &linv * a * linv.transpose();
    let (values, y) = sym_eig(&c);
    Ok((values, linv.transpose() * y))
}

/// Flips the sign of each column so its largest-magnitude entry (first one on
/// ties) is positive.
pub fn fix_signs(v: &mut DMatrix<f64>) {
    for mut col in v.column_iter_mut() {
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for &x in col.iter() {
            if x.abs() > best {
                best = x.abs();
                sign = x.signum();
            }
        }
        if sign < 0.0 {
            col.neg_mut();
        }
    }
}

pub fn fix_sign_vec(v: &mut DVector<f64>) {
    let mut m = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
    fix_signs(&mut m);
    v.copy_from_slice(m.as_slice());
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generalized_diag_matches_spd() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let d = [1.0, 2.0, 3.0];
        let (v1, x1) = generalized_eig_diag(&a, &d).unwrap();
        let (v2, _) = generalized_eig_spd(&a, &DMatrix::from_diagonal(&DVector::from_row_slice(&d))).unwrap();
        for (a1, a2) in v1.iter().zip(&v2) {
            assert!((a1 - a2).abs() < 1e-12);
        }
        let b = DMatrix::from_diagonal(&DVector::from_row_slice(&d));
        let g = x1.transpose() * b * &x1;
        assert!((g - DMatrix::identity(3, 3)).amax() < 1e-12);
        assert!(v1.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn sign_convention() {
        let mut m = DMatrix::from_column_slice(3, 2, &[0.1, -0.9, 0.2, 0.5, 0.5, -0.1]);
        fix_signs(&mut m);
        assert_eq!(m[(1, 0)], 0.9);
        assert_eq!(m[(0, 1)], 0.5);
    }
}
