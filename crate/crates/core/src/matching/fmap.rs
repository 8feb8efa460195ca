//! Block-diagonal functional maps.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Which way a functional map transports coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Target-shape coefficients to source-shape coefficients: the pullback
    /// of a source -> target vertex map.
    TargetToSource,
    SourceToTarget,
}

/// A functional map with one square block for the Laplacian part and one per
/// landmark. Cross-block entries are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockFunctionalMap {
    g: DMatrix<f64>,
    h: Vec<DMatrix<f64>>,
    direction: Direction,
}

impl BlockFunctionalMap {
    pub fn new(g: DMatrix<f64>, h: Vec<DMatrix<f64>>, direction: Direction) -> Result<Self> {
        if !g.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "Laplacian block is {}x{}",
                g.nrows(),
                g.ncols()
            )));
        }
        if let Some(first) = h.first() {
            let n = first.nrows();
            if h.iter().any(|b| b.nrows() != n || b.ncols() != n) {
                return Err(Error::DimensionMismatch("landmark blocks differ in size".into()));
            }
        }
        Ok(BlockFunctionalMap { g, h, direction })
    }

    pub fn identity(g_size: usize, num_loops: usize, n_ds: usize, direction: Direction) -> Self {
        BlockFunctionalMap {
            g: DMatrix::identity(g_size, g_size),
            h: vec![DMatrix::identity(n_ds, n_ds); num_loops],
            direction,
        }
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn g_block(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn h_block(&self, j: usize) -> &DMatrix<f64> {
        &self.h[j]
    }

    pub fn g_size(&self) -> usize {
        self.g.nrows()
    }

    pub fn n_ds(&self) -> usize {
        self.h.first().map_or(0, |b| b.nrows())
    }

    pub fn num_loops(&self) -> usize {
        self.h.len()
    }

    pub fn dim(&self) -> usize {
        self.g_size() + self.num_loops() * self.n_ds()
    }

    /// Block ranges in the dense layout `[G | H_1 | ... | H_k]`.
    pub fn block_ranges(&self) -> Vec<std::ops::Range<usize>> {
        block_ranges(self.g_size(), self.num_loops(), self.n_ds())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut out = DMatrix::zeros(d, d);
        for (r, b) in self.block_ranges().into_iter().zip(std::iter::once(&self.g).chain(&self.h)) {
            out.view_mut((r.start, r.start), (r.len(), r.len())).copy_from(b);
        }
        out
    }

    /// Frobenius-nearest block-diagonal map to `full`. Also returns the
    /// squared norm of the discarded cross-block entries.
    pub fn project(
        full: &DMatrix<f64>,
        g_size: usize,
        num_loops: usize,
        n_ds: usize,
        direction: Direction,
    ) -> Result<(Self, f64)> {
        let d = g_size + num_loops * n_ds;
        if full.nrows() != d || full.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "expected a {d}x{d} map, got {}x{}",
                full.nrows(),
                full.ncols()
            )));
        }
        let ranges = block_ranges(g_size, num_loops, n_ds);
        let mut kept = 0.0;
        let mut blocks: Vec<DMatrix<f64>> = ranges
            .iter()
            .map(|r| {
                let b = full.view((r.start, r.start), (r.len(), r.len())).into_owned();
                kept += b.norm_squared();
                b
            })
            .collect();
        let discarded = (full.norm_squared() - kept).max(0.0);
        let g = blocks.remove(0);
        Ok((BlockFunctionalMap { g, h: blocks, direction }, discarded))
    }
}

pub fn block_ranges(g_size: usize, num_loops: usize, n_ds: usize) -> Vec<std::ops::Range<usize>> {
    std::iter::once(0..g_size)
        .chain((0..num_loops).map(|j| g_size + j * n_ds..g_size + (j + 1) * n_ds))
        .collect()
}

/// Rows of `phi` gathered through a vertex map: row `v` of the result is row
/// `map[v]` of `phi`.
pub fn gather_rows(phi: &DMatrix<f64>, map: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(map.len(), phi.ncols(), |r, c| phi[(map[r], c)])
}

/// Functional map induced by a vertex map `a -> b` (one `b` vertex for each
/// `a` vertex), expressed with the W-projection onto the `a` basis:
/// `Φ_aᵀ W_a Π Φ_b`. Treats `Φ_a` as W-orthonormal.
pub fn induced_fmap(phi_a: &DMatrix<f64>, w_a: &CsrMatrix, map: &[usize], phi_b: &DMatrix<f64>) -> DMatrix<f64> {
    let pulled = gather_rows(phi_b, map);
    phi_a.transpose() * w_a.mul_dense(&pulled)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_layout_and_projection() {
        let g = DMatrix::from_element(2, 2, 1.0);
        let h = vec![DMatrix::from_element(3, 3, 2.0), DMatrix::from_element(3, 3, 3.0)];
        let f = BlockFunctionalMap::new(g, h, Direction::TargetToSource).unwrap();
        assert_eq!(f.dim(), 8);
        let mut dense = f.to_dense();
        assert_eq!(dense[(0, 2)], 0.0);
        assert_eq!(dense[(5, 5)], 3.0);
        dense[(0, 7)] = 4.0;
        dense[(6, 1)] = -1.0;
        let (p, discarded) = BlockFunctionalMap::project(&dense, 2, 2, 3, Direction::TargetToSource).unwrap();
        assert_eq!(p, f);
        assert!((discarded - 17.0).abs() < 1e-12);
        // Zeroed blocks really are zero.
        let back = p.to_dense();
        for (ia, ra) in p.block_ranges().iter().enumerate() {
            for (ib, rb) in p.block_ranges().iter().enumerate() {
                if ia != ib {
                    assert_eq!(back.view((ra.start, rb.start), (ra.len(), rb.len())).amax(), 0.0);
                }
            }
        }
    }

    #[test]
    fn rejects_ragged_blocks() {
        let h = vec![DMatrix::identity(2, 2), DMatrix::identity(3, 3)];
        assert!(BlockFunctionalMap::new(DMatrix::identity(1, 1), h, Direction::SourceToTarget).is_err());
    }

    #[test]
    fn empty_g_block() {
        let f = BlockFunctionalMap::identity(0, 2, 4, Direction::SourceToTarget);
        assert_eq!(f.dim(), 8);
        assert_eq!(f.to_dense(), DMatrix::identity(8, 8));
    }
}
