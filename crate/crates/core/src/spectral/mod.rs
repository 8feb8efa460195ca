//! Dirichlet-Laplacian and Dirichlet-Steklov eigenproblems on a cut mesh.
//!
//! Both problems eliminate the landmark-loop DOFs. The interior block `W_II`
//! (interior = every vertex on no landmark loop) is factorized once and
//! reused by the Laplacian shift-invert iteration, by every Steklov Schur
//! complement, and by harmonic extensions.

pub mod dense;
pub mod krylov;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fem::FemOperators;
use crate::sparse::{CsrMatrix, SparseCholesky};
use dense::{fix_signs, generalized_eig_diag, generalized_eig_spd};
use krylov::{smallest_eigs, KrylovOptions};

/// Which mass matrix the eigenvectors are orthonormal in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassKind {
    /// Lumped vertex mass.
    Area,
    /// Boundary mass of the given landmark loop.
    Boundary(usize),
}

#[derive(Debug, Clone)]
pub struct EigenPairSet {
    /// Ascending.
    pub values: Vec<f64>,
    /// One column per eigenvalue, over all mesh vertices (zero on
    /// constrained DOFs).
    pub vectors: DMatrix<f64>,
    pub mass: MassKind,
}

impl EigenPairSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct SpectralOptions {
    /// Relative residual tolerance `‖W u − μ M u‖ ≤ tol ‖W u‖`.
    pub tol: f64,
    /// Eigenvalues below `rejection × mean(diag W)` are discarded.
    pub rejection: f64,
    /// Interior sizes up to this use a dense Laplacian solve.
    pub dense_limit: usize,
    pub krylov: KrylovOptions,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions {
            tol: 1e-8,
            rejection: 1e-8,
            dense_limit: 300,
            krylov: KrylovOptions::default(),
        }
    }
}

/// Shared factorizations for all eigenproblems of one cut mesh.
pub struct SpectralSolver<'a> {
    ops: &'a FemOperators,
    opts: SpectralOptions,
    /// Interior DOFs (every vertex on no landmark loop).
    interior: Vec<usize>,
    /// Vertex -> position in `interior`.
    interior_pos: Vec<Option<usize>>,
    /// Interior DOFs in components that touch a landmark loop.
    anchored: Vec<usize>,
    anchored_pos: Vec<Option<usize>>,
    anchored_chol: Option<SparseCholesky>,
    /// Number of connected components with no landmark loop.
    free_components: usize,
    threshold: f64,
}

impl<'a> SpectralSolver<'a> {
    pub fn new(ops: &'a FemOperators, mesh: &crate::mesh::TriangleMesh, opts: SpectralOptions) -> Result<Self> {
        let n = ops.num_vertices();
        let interior = ops.interior.clone();
        let mut interior_pos = vec![None; n];
        for (i, &v) in interior.iter().enumerate() {
            interior_pos[v] = Some(i);
        }
        let (labels, count) = mesh.components();
        let mut anchored_comp = vec![false; count];
        for l in &ops.loop_dofs {
            for &v in l {
                anchored_comp[labels[v]] = true;
            }
        }
        let free_components = (0..count)
            .filter(|&c| !anchored_comp[c])
            .filter(|&c| (0..n).any(|v| labels[v] == c && !mesh.vertex_faces(v).is_empty()))
            .count();
        let anchored: Vec<usize> = interior.iter().copied().filter(|&v| anchored_comp[labels[v]]).collect();
        let mut anchored_pos = vec![None; n];
        for (i, &v) in anchored.iter().enumerate() {
            anchored_pos[v] = Some(i);
        }
        let anchored_chol = if anchored.is_empty() {
            None
        } else {
            Some(SparseCholesky::new(&ops.stiffness.submatrix(&anchored, &anchored))?)
        };
        let diag = ops.stiffness.diagonal();
        let threshold = opts.rejection * diag.iter().sum::<f64>() / diag.len() as f64;
        Ok(SpectralSolver {
            ops,
            opts,
            interior,
            interior_pos,
            anchored,
            anchored_pos,
            anchored_chol,
            free_components,
            threshold,
        })
    }

    fn krylov_options(&self) -> KrylovOptions {
        KrylovOptions {
            tol: self.opts.tol,
            floor: self.threshold,
            ..self.opts.krylov.clone()
        }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    /// Smallest `count` Dirichlet-Laplacian pairs with every landmark loop
    /// constrained to zero.
    pub fn laplacian(&self, count: usize) -> Result<EigenPairSet> {
        let ops = self.ops;
        let ni = self.interior.len();
        if ni == 0 {
            return Err(Error::AllConstrained);
        }
        // Free components contribute one zero eigenvalue each; ask for extra
        // pairs so enough survive rejection.
        let request = count + self.free_components;
        if request > ni {
            return Err(Error::TooManyEigenpairs {
                requested: count,
                available: ni.saturating_sub(self.free_components),
            });
        }
        let w_ii = ops.stiffness.submatrix(&self.interior, &self.interior);
        let a_i: Vec<f64> = self.interior.iter().map(|&v| ops.mass[v]).collect();

        let (values, vecs) = if ni <= self.opts.dense_limit {
            generalized_eig_diag(&w_ii.to_dense(), &a_i)?
        } else if self.free_components == 0 {
            let chol = self
                .anchored_chol
                .as_ref()
                .expect("no free components means the interior is anchored");
            let apply = |y: &DMatrix<f64>| chol.solve(y);
            smallest_eigs(&w_ii, &a_i, &apply, request, &self.krylov_options())?
        } else {
            // Components without a landmark loop make W_II singular; shift
            // slightly below zero.
            let mean_w = w_ii.diagonal().iter().sum::<f64>() / ni as f64;
            let mean_a = a_i.iter().sum::<f64>() / ni as f64;
            let shift = 1e-6 * mean_w / mean_a;
            log::info!("interior stiffness is singular; using shift -{shift:.3e}");
            let mut t = w_ii.triplets();
            t.extend(a_i.iter().enumerate().map(|(i, &a)| (i, i, shift * a)));
            let shifted = CsrMatrix::from_triplets(ni, ni, &t);
            let chol = SparseCholesky::new(&shifted)?;
            let apply = |y: &DMatrix<f64>| chol.solve(y);
            smallest_eigs(&w_ii, &a_i, &apply, request, &self.krylov_options())?
        };

        let keep: Vec<usize> = (0..values.len()).filter(|&j| values[j] >= self.threshold).take(count).collect();
        if keep.len() < count {
            return Err(Error::TooManyEigenpairs {
                requested: count,
                available: keep.len(),
            });
        }
        let n = ops.num_vertices();
        let mut full = DMatrix::zeros(n, count);
        for (c, &j) in keep.iter().enumerate() {
            let mut col = vecs.column(j).into_owned();
            let norm = col.iter().zip(&a_i).map(|(x, a)| x * x * a).sum::<f64>().sqrt();
            col /= norm;
            for (i, &v) in self.interior.iter().enumerate() {
                full[(v, c)] = col[i];
            }
        }
        fix_signs(&mut full);
        let out = EigenPairSet {
            values: keep.iter().map(|&j| values[j]).collect(),
            vectors: full,
            mass: MassKind::Area,
        };
        self.check_residuals(&out, &self.interior)?;
        Ok(out)
    }

    /// Steklov-to-interior coupling `X = W_AA⁻¹ W_Ab` for loop `j`, with A
    /// the anchored interior DOFs.
    fn interior_response(&self, j: usize) -> Result<DMatrix<f64>> {
        let b = &self.ops.loop_dofs[j];
        if self.anchored.is_empty() {
            return Ok(DMatrix::zeros(0, b.len()));
        }
        let w_ab = self.ops.stiffness.submatrix(&self.anchored, b).to_dense();
        let chol = self.anchored_chol.as_ref().expect("anchored interior is factorized");
        Ok(chol.solve(&w_ab))
    }

    /// Dense Schur complement `T = W_bb − W_bI W_II⁻¹ W_Ib` on loop `j`.
    pub fn schur_complement(&self, j: usize) -> Result<DMatrix<f64>> {
        Ok(self.schur_with_response(j)?.0)
    }

    fn schur_with_response(&self, j: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let b = &self.ops.loop_dofs[j];
        let w_bb = self.ops.stiffness.submatrix(b, b).to_dense();
        let x = self.interior_response(j)?;
        let t = if self.anchored.is_empty() {
            w_bb
        } else {
            let w_ab = self.ops.stiffness.submatrix(&self.anchored, b).to_dense();
            let t = w_bb - w_ab.transpose() * &x;
            (&t + t.transpose()) * 0.5
        };
        Ok((t, x))
    }

    /// Smallest `count` finite Dirichlet-Steklov pairs with the Steklov
    /// condition on loop `j` and zero values on every other loop.
    pub fn steklov(&self, j: usize, count: usize) -> Result<EigenPairSet> {
        let ops = self.ops;
        let b = &ops.loop_dofs[j];
        let (t, x) = self.schur_with_response(j)?;
        let s = &ops.steklov[j];
        let (values, ub) = match ops.steklov_variant {
            crate::fem::SteklovMass::Lumped => generalized_eig_diag(&t, s.diagonal().as_slice())?,
            crate::fem::SteklovMass::Fem => generalized_eig_spd(&t, s)?,
        };
        let keep: Vec<usize> = (0..values.len()).filter(|&i| values[i] >= self.threshold).take(count).collect();
        if keep.len() < count {
            return Err(Error::TooManyEigenpairs {
                requested: count,
                available: keep.len(),
            });
        }
        let n = ops.num_vertices();
        let mut full = DMatrix::zeros(n, count);
        for (c, &i) in keep.iter().enumerate() {
            let mut u = ub.column(i).into_owned();
            let norm = (u.transpose() * s * &u)[(0, 0)].sqrt();
            u /= norm;
            for (k, &v) in b.iter().enumerate() {
                full[(v, c)] = u[k];
            }
            if x.nrows() > 0 {
                let ui = -&x * &u;
                for (k, &v) in self.anchored.iter().enumerate() {
                    full[(v, c)] = ui[k];
                }
            }
        }
        fix_signs(&mut full);
        let out = EigenPairSet {
            values: keep.iter().map(|&i| values[i]).collect(),
            vectors: full,
            mass: MassKind::Boundary(j),
        };
        let mut dofs = self.anchored.clone();
        dofs.extend_from_slice(b);
        self.check_residuals(&out, &dofs)?;
        Ok(out)
    }

    /// Discretely harmonic function with the given values on each landmark
    /// loop (one value per loop); zero in components without loops.
    pub fn harmonic(&self, loop_values: &[f64]) -> Result<DVector<f64>> {
        let ops = self.ops;
        let n = ops.num_vertices();
        let mut h = DVector::zeros(n);
        for (l, &val) in ops.loop_dofs.iter().zip(loop_values) {
            for &v in l {
                h[v] = val;
            }
        }
        if let Some(chol) = &self.anchored_chol {
            let mut rhs = vec![0.0; self.anchored.len()];
            for (i, &v) in self.anchored.iter().enumerate() {
                rhs[i] = -ops.stiffness.row(v).map(|(c, w)| w * h[c]).sum::<f64>();
            }
            let sol = chol.solve_vec(&rhs);
            for (i, &v) in self.anchored.iter().enumerate() {
                h[v] = sol[i];
            }
        }
        Ok(h)
    }

    /// Checks `‖(W u − μ M u)_D‖ ≤ tol ‖(W u)_D‖` over the unconstrained DOFs `D`.
    fn check_residuals(&self, set: &EigenPairSet, dofs: &[usize]) -> Result<()> {
        for (c, &mu) in set.values.iter().enumerate() {
            let u = set.vectors.column(c);
            let wu = self.ops.stiffness.mul_vec(u.as_slice());
            let mut mu_vec = vec![0.0; wu.len()];
            match set.mass {
                MassKind::Area => {
                    for &v in dofs {
                        mu_vec[v] = self.ops.mass[v] * u[v];
                    }
                }
                MassKind::Boundary(j) => {
                    let b = &self.ops.loop_dofs[j];
                    let s = &self.ops.steklov[j];
                    for (p, &vp) in b.iter().enumerate() {
                        mu_vec[vp] = (0..b.len()).map(|q| s[(p, q)] * u[b[q]]).sum();
                    }
                }
            }
            let (mut r2, mut w2) = (0.0, 0.0);
            for &v in dofs {
                let r = wu[v] - mu * mu_vec[v];
                r2 += r * r;
                w2 += wu[v] * wu[v];
            }
            let rel = (r2 / w2.max(f64::MIN_POSITIVE)).sqrt();
            if rel > 1e3 * self.opts.tol {
                return Err(Error::NoConvergence(format!(
                    "eigenpair {c} has relative residual {rel:.3e}"
                )));
            }
            if rel > self.opts.tol {
                log::warn!("eigenpair {c} relative residual {rel:.3e} above tolerance");
            }
        }
        Ok(())
    }

    /// Position of a vertex among the interior DOFs.
    pub fn interior_index(&self, v: usize) -> Option<usize> {
        self.interior_pos[v]
    }

    pub fn anchored_index(&self, v: usize) -> Option<usize> {
        self.anchored_pos[v]
    }
}
