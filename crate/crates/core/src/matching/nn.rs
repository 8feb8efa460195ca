//! Exact Euclidean nearest-neighbour search between matrix rows.
//!
//! Low dimensions use a KD-tree; higher ones a blocked brute force built on
//! `‖q‖² + ‖t‖² − 2 q·t` with an exact re-check of near-ties. Either way the
//! result is the exact nearest row, ties going to the smallest index.

use nalgebra::DMatrix;
use rayon::prelude::*;

/// Dimension at or below which the KD-tree is used.
pub const KD_TREE_MAX_DIM: usize = 30;
const LEAF_SIZE: usize = 16;
const QUERY_CHUNK: usize = 128;

/// For every row of `queries`, the index of the nearest row of `targets`
/// and the squared distance to it.
pub fn nearest_rows(targets: &DMatrix<f64>, queries: &DMatrix<f64>) -> Vec<(usize, f64)> {
    assert_eq!(targets.ncols(), queries.ncols(), "row dimensions differ");
    assert!(targets.nrows() > 0, "no target rows");
    if targets.ncols() <= KD_TREE_MAX_DIM {
        let tree = KdTree::new(targets);
        let q = RowMajor::new(queries);
        (0..q.rows).into_par_iter().map(|i| tree.nearest(q.row(i))).collect()
    } else {
        brute_force(targets, queries)
    }
}

struct RowMajor {
    data: Vec<f64>,
    rows: usize,
    dim: usize,
}

impl RowMajor {
    fn new(m: &DMatrix<f64>) -> Self {
        let (rows, dim) = m.shape();
        let data = m.transpose().as_slice().to_vec();
        RowMajor { data, rows, dim }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `(distance, index)` comparison with ties to the smaller index.
fn better(d: f64, i: usize, best: (usize, f64)) -> bool {
    d < best.1 || (d == best.1 && i < best.0)
}

fn brute_force(targets: &DMatrix<f64>, queries: &DMatrix<f64>) -> Vec<(usize, f64)> {
    let (n, dim) = targets.shape();
    let t_rows = RowMajor::new(targets);
    let q_rows = RowMajor::new(queries);
    // `[−2t | ‖t‖²] · [q | 1]ᵀ` gives `‖t‖² − 2 q·t` in one product, laid out
    // so every query's column is contiguous.
    let mut t_ext = DMatrix::zeros(n, dim + 1);
    t_ext.columns_mut(0, dim).copy_from(&(targets * -2.0));
    let t_norm: Vec<f64> = (0..n).map(|j| t_rows.row(j).iter().map(|x| x * x).sum()).collect();
    t_ext.set_column(dim, &nalgebra::DVector::from_column_slice(&t_norm));
    let t_max = t_norm.iter().cloned().fold(0.0, f64::max);
    let chunks: Vec<usize> = (0..queries.nrows()).step_by(QUERY_CHUNK).collect();
    let parts: Vec<Vec<(usize, f64)>> = chunks
        .into_par_iter()
        .map(|start| {
            let len = QUERY_CHUNK.min(queries.nrows() - start);
            let mut q_ext = DMatrix::from_element(dim + 1, len, 1.0);
            q_ext.rows_mut(0, dim).copy_from(&queries.rows(start, len).transpose());
            let approx = &t_ext * q_ext;
            let mut out = Vec::with_capacity(len);
            for r in 0..len {
                let qi = q_rows.row(start + r);
                let q_norm: f64 = qi.iter().map(|x| x * x).sum();
                let col = approx.column(r);
                let col = col.as_slice();
                let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
                // Rounding in the expanded form is bounded by a few ulps of the
                // norms involved; anything within the margin is re-checked.
                let bound = lo + 1e-10 * (q_norm + t_max) + f64::MIN_POSITIVE;
                let mut best = (usize::MAX, f64::INFINITY);
                for (j, &a) in col.iter().enumerate() {
                    if a <= bound {
                        let d = sq_dist(qi, t_rows.row(j));
                        if better(d, j, best) {
                            best = (j, d);
                        }
                    }
                }
                out.push(best);
            }
            out
        })
        .collect();
    parts.into_iter().flatten().collect()
}

struct KdTree {
    points: RowMajor,
    /// Permutation of point indices; nodes own contiguous ranges of it.
    order: Vec<usize>,
    nodes: Vec<Node>,
}

enum Node {
    Leaf { start: usize, end: usize },
    Split { dim: usize, value: f64, left: usize, right: usize },
}

impl KdTree {
    fn new(m: &DMatrix<f64>) -> Self {
        let points = RowMajor::new(m);
        let mut tree = KdTree {
            order: (0..points.rows).collect(),
            points,
            nodes: Vec::new(),
        };
        tree.build(0, tree.points.rows);
        tree
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { start, end });
        if end - start <= LEAF_SIZE || self.points.dim == 0 {
            return id;
        }
        // Split the widest dimension at the median.
        let mut dim = 0;
        let mut widest = -1.0;
        for d in 0..self.points.dim {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in &self.order[start..end] {
                let x = self.points.row(i)[d];
                lo = lo.min(x);
                hi = hi.max(x);
            }
            if hi - lo > widest {
                widest = hi - lo;
                dim = d;
            }
        }
        if widest <= 0.0 {
            return id;
        }
        let mid = (start + end) / 2;
        let pts = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            pts.row(a)[dim].total_cmp(&pts.row(b)[dim]).then(a.cmp(&b))
        });
        let value = self.points.row(self.order[mid])[dim];
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split { dim, value, left, right };
        id
    }

    fn nearest(&self, q: &[f64]) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, q, &mut best);
        best
    }

    fn search(&self, node: usize, q: &[f64], best: &mut (usize, f64)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = sq_dist(q, self.points.row(i));
                    if better(d, i, *best) {
                        *best = (i, d);
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = q[dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                // `<=` keeps equal-distance points with smaller indices reachable.
                if diff * diff <= best.1 {
                    self.search(far, q, best);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive(targets: &DMatrix<f64>, queries: &DMatrix<f64>) -> Vec<(usize, f64)> {
        let t = RowMajor::new(targets);
        let q = RowMajor::new(queries);
        (0..q.rows)
            .map(|i| {
                let mut best = (usize::MAX, f64::INFINITY);
                for j in 0..t.rows {
                    let d = sq_dist(q.row(i), t.row(j));
                    if better(d, j, best) {
                        best = (j, d);
                    }
                }
                best
            })
            .collect()
    }

    fn random(rows: usize, dim: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, dim, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn both_backends_match_naive() {
        for dim in [1, 3, 12, 30, 31, 90] {
            let t = random(700, dim, dim as u64);
            let q = random(300, dim, 100 + dim as u64);
            assert_eq!(nearest_rows(&t, &q), naive(&t, &q), "dim {dim}");
        }
    }

    #[test]
    fn self_query_is_identity() {
        for dim in [5, 60] {
            let t = random(500, dim, 7);
            let res = nearest_rows(&t, &t);
            assert!(res.iter().enumerate().all(|(i, &(j, d))| i == j && d == 0.0));
        }
    }

    #[test]
    fn ties_go_to_smallest_index() {
        for dim in [2, 40] {
            // Many duplicated rows.
            let base = random(10, dim, 3);
            let t = DMatrix::from_fn(200, dim, |r, c| base[(r % 10, c)]);
            let res = nearest_rows(&t, &base);
            for (i, &(j, _)) in res.iter().enumerate() {
                assert_eq!(j, i);
            }
            // Query equidistant from rows 4 and 1.
            let mut t = DMatrix::zeros(6, dim);
            t[(4, 0)] = 1.0;
            t[(1, 0)] = -1.0;
            for r in [0, 2, 3, 5] {
                t[(r, 0)] = 5.0;
            }
            let q = DMatrix::zeros(1, dim);
            assert_eq!(nearest_rows(&t, &q)[0].0, 1);
        }
    }

    proptest! {
        #[test]
        fn kd_tree_is_exact(n in 1usize..80, dim in 1usize..6, seed in 0u64..1000) {
            // Coarse grid values produce plenty of exact ties.
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = DMatrix::from_fn(n, dim, |_, _| rng.random_range(-3i32..3) as f64);
            let q = DMatrix::from_fn(20, dim, |_, _| rng.random_range(-3i32..3) as f64);
            prop_assert_eq!(nearest_rows(&t, &q), naive(&t, &q));
        }
    }
}
