//! Piecewise-linear finite element operators: cotangent stiffness, lumped
//! vertex mass and boundary (Steklov) mass on closed loops.
//!
//! Sign convention: the stiffness matrix is positive semi-definite, with
//! `W_pq = -w_pq` off the diagonal and `W_pp = Σ_q w_pq`, where
//! `w_pq = ½ (cot α + cot β)` for the angles opposite edge `pq`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::mesh::{BoundaryLoop, TriangleMesh};
use crate::sparse::CsrMatrix;
use crate::surgery::CutMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SteklovMass {
    /// Diagonal: each loop vertex gets half of its two incident loop edges.
    #[default]
    Lumped,
    /// Consistent 1D linear-element mass on the loop.
    Fem,
}

impl FromStr for SteklovMass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lumped" => Ok(SteklovMass::Lumped),
            "fem" => Ok(SteklovMass::Fem),
            other => Err(Error::Config(format!("unknown Steklov mass variant '{other}'"))),
        }
    }
}

impl fmt::Display for SteklovMass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SteklovMass::Lumped => "lumped",
            SteklovMass::Fem => "fem",
        })
    }
}

/// Cotangent of the angle at `a` in triangle `(a, b, c)`.
fn cot_at(mesh: &TriangleMesh, a: usize, b: usize, c: usize) -> Result<f64> {
    let u = mesh.vertex(b) - mesh.vertex(a);
    let v = mesh.vertex(c) - mesh.vertex(a);
    let cross = u.cross(&v).norm();
    if !(cross > 0.0) {
        return Err(Error::ZeroArea);
    }
    Ok(u.dot(&v) / cross)
}

/// Per-edge cotangent weights `w_pq`, in `mesh.edges()` order.
pub fn cotangent_weights(mesh: &TriangleMesh) -> Result<Vec<f64>> {
    let mut w = vec![0.0; mesh.edges().len()];
    for f in mesh.faces() {
        for k in 0..3 {
            let (a, b, c) = (f[k], f[(k + 1) % 3], f[(k + 2) % 3]);
            let cot = cot_at(mesh, a, b, c)?;
            let key = [b.min(c), b.max(c)];
            let e = mesh.edges().binary_search(&key).expect("face edge is a mesh edge");
            w[e] += 0.5 * cot;
        }
    }
    Ok(w)
}

pub fn assemble_stiffness(mesh: &TriangleMesh) -> Result<CsrMatrix> {
    let w = cotangent_weights(mesh)?;
    let n = mesh.num_vertices();
    let mut t = Vec::with_capacity(4 * w.len() + n);
    let mut diag = vec![0.0; n];
    for (&[a, b], &wab) in mesh.edges().iter().zip(&w) {
        t.push((a, b, -wab));
        t.push((b, a, -wab));
        diag[a] += wab;
        diag[b] += wab;
    }
    t.extend(diag.iter().enumerate().map(|(i, &d)| (i, i, d)));
    Ok(CsrMatrix::from_triplets(n, n, &t))
}

/// Diagonal of the lumped mass matrix: a third of the incident triangle
/// areas per vertex.
pub fn assemble_lumped_mass(mesh: &TriangleMesh) -> Vec<f64> {
    let mut a = vec![0.0; mesh.num_vertices()];
    for (f, &area) in mesh.faces().iter().zip(mesh.face_areas()) {
        for &v in f {
            a[v] += area / 3.0;
        }
    }
    let zero = a.iter().filter(|&&x| x <= 0.0).count();
    if zero > 0 {
        log::warn!("lumped mass has {zero} zero entries; the mass matrix is not positive definite");
    }
    a
}

/// Boundary mass on one loop, indexed by position along the loop.
pub fn assemble_steklov_mass(lp: &BoundaryLoop, variant: SteklovMass) -> Result<DMatrix<f64>> {
    let n = lp.len();
    if n < 3 {
        return Err(Error::OpenLoop);
    }
    let r = lp.edge_lengths();
    if r.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::OpenLoop);
    }
    let mut s = DMatrix::zeros(n, n);
    for p in 0..n {
        let prev = r[(p + n - 1) % n];
        let next = r[p];
        match variant {
            SteklovMass::Lumped => s[(p, p)] = 0.5 * (prev + next),
            SteklovMass::Fem => {
                s[(p, p)] = (prev + next) / 3.0;
                s[(p, (p + 1) % n)] = next / 6.0;
                s[((p + 1) % n, p)] = next / 6.0;
            }
        }
    }
    Ok(s)
}

/// Embeds a loop mass matrix into an `n × n` sparse matrix over mesh vertices.
pub fn loop_mass_to_sparse(v: &[usize], s: &DMatrix<f64>, n: usize) -> CsrMatrix {
    let mut t = Vec::new();
    for i in 0..v.len() {
        for j in 0..v.len() {
            if s[(i, j)] != 0.0 {
                t.push((v[i], v[j], s[(i, j)]));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &t)
}

/// Result of eliminating constrained DOFs.
#[derive(Debug, Clone)]
pub struct Reduced {
    pub matrix: CsrMatrix,
    /// Free DOFs, in increasing order; row `i` of `matrix` is DOF `free[i]`.
    pub free: Vec<usize>,
}

/// Removes the rows and columns of `constrained` (Dirichlet condition by
/// elimination).
pub fn apply_dirichlet(w: &CsrMatrix, constrained: &[usize]) -> Result<Reduced> {
    let mut fixed = vec![false; w.nrows()];
    for &c in constrained {
        fixed[c] = true;
    }
    let free: Vec<usize> = (0..w.nrows()).filter(|&v| !fixed[v]).collect();
    if free.is_empty() {
        return Err(Error::AllConstrained);
    }
    Ok(Reduced {
        matrix: w.submatrix(&free, &free),
        free,
    })
}

/// All operators needed downstream for a cut mesh.
#[derive(Debug, Clone)]
pub struct FemOperators {
    pub stiffness: CsrMatrix,
    pub mass: Vec<f64>,
    /// One boundary mass matrix per landmark loop, indexed along the loop.
    pub steklov: Vec<DMatrix<f64>>,
    pub steklov_variant: SteklovMass,
    /// Vertices on no landmark loop (pre-existing boundaries included).
    pub interior: Vec<usize>,
    pub loop_dofs: Vec<Vec<usize>>,
    pub neumann_dofs: Vec<usize>,
}

impl FemOperators {
    pub fn new(cut: &CutMesh, variant: SteklovMass) -> Result<Self> {
        let mesh = cut.mesh();
        let stiffness = assemble_stiffness(mesh)?;
        let mass = assemble_lumped_mass(mesh);
        let steklov = cut
            .loops()
            .iter()
            .map(|l| assemble_steklov_mass(l, variant))
            .collect::<Result<Vec<_>>>()?;
        let mut on_loop = vec![false; mesh.num_vertices()];
        let loop_dofs: Vec<Vec<usize>> = cut.loops().iter().map(|l| l.vertices().to_vec()).collect();
        for l in &loop_dofs {
            for &v in l {
                on_loop[v] = true;
            }
        }
        let interior = (0..mesh.num_vertices()).filter(|&v| !on_loop[v]).collect();
        let mut neumann_dofs: Vec<usize> = cut
            .neumann_loops()
            .iter()
            .flat_map(|l| l.vertices().iter().copied())
            .collect();
        neumann_dofs.sort_unstable();
        Ok(FemOperators {
            stiffness,
            mass,
            steklov,
            steklov_variant: variant,
            interior,
            loop_dofs,
            neumann_dofs,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.mass.len()
    }

    pub fn num_loops(&self) -> usize {
        self.loop_dofs.len()
    }
}
