//! Triangle mesh data model.
//!
//! A [`TriangleMesh`] is immutable once built: construction validates the
//! connectivity (valid indices, no repeated corners, at most two faces per
//! edge with opposite orientations) and caches the derived quantities the
//! rest of the pipeline needs (edge list, vertex rings, face areas).

pub mod geodesic;
pub mod io;
pub mod shapes;

use std::collections::HashMap;

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Point = Vector3<f64>;

#[derive(Debug, Clone)]
pub struct TriangleMesh {
    vertices: Vec<Point>,
    faces: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    neighbors: Vec<Vec<usize>>,
    vertex_faces: Vec<Vec<usize>>,
    face_areas: Vec<f64>,
    total_area: f64,
    /// Directed edge (a, b) -> face containing it in that orientation.
    half_edges: HashMap<(usize, usize), usize>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.is_empty() || faces.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let n = vertices.len();
        let mut half_edges = HashMap::with_capacity(faces.len() * 3);
        let mut undirected: HashMap<(usize, usize), u8> = HashMap::with_capacity(faces.len() * 2);
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                if v >= n {
                    return Err(Error::InvalidFaceIndex {
                        index: v,
                        vertex_count: n,
                    });
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::DegenerateFace { face: fi });
            }
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let count = undirected.entry(key).or_insert(0);
                *count += 1;
                if *count > 2 {
                    return Err(Error::NonManifoldEdge(key.0, key.1));
                }
                if half_edges.insert((a, b), fi).is_some() {
                    return Err(Error::InconsistentOrientation(a, b));
                }
            }
        }

        let mut edges: Vec<[usize; 2]> = undirected.keys().map(|&(a, b)| [a, b]).collect();
        edges.sort_unstable();

        let mut neighbors = vec![Vec::new(); n];
        for &[a, b] in &edges {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for ring in &mut neighbors {
            ring.sort_unstable();
        }

        let mut vertex_faces = vec![Vec::new(); n];
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                vertex_faces[v].push(fi);
            }
        }

        let face_areas: Vec<f64> = faces
            .iter()
            .map(|f| triangle_area(&vertices[f[0]], &vertices[f[1]], &vertices[f[2]]))
            .collect();
        let total_area: f64 = face_areas.iter().sum();
        if !(total_area > 0.0) {
            return Err(Error::ZeroArea);
        }

        let unreferenced = vertex_faces.iter().filter(|f| f.is_empty()).count();
        if unreferenced > 0 {
            log::warn!("mesh has {unreferenced} unreferenced vertices");
        }

        Ok(TriangleMesh {
            vertices,
            faces,
            edges,
            neighbors,
            vertex_faces,
            face_areas,
            total_area,
            half_edges,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> &Point {
        &self.vertices[v]
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    /// Undirected edges `[a, b]` with `a < b`, sorted.
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Sorted one-ring of `v`.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn vertex_faces(&self, v: usize) -> &[usize] {
        &self.vertex_faces[v]
    }

    pub fn face_area(&self, f: usize) -> f64 {
        self.face_areas[f]
    }

    pub fn face_areas(&self) -> &[f64] {
        &self.face_areas
    }

    pub fn total_area(&self) -> f64 {
        self.total_area
    }

    pub fn edge_length(&self, a: usize, b: usize) -> f64 {
        (self.vertices[a] - self.vertices[b]).norm()
    }

    /// Face containing the directed edge `a -> b`, if any.
    pub fn face_with_half_edge(&self, a: usize, b: usize) -> Option<usize> {
        self.half_edges.get(&(a, b)).copied()
    }

    pub fn is_boundary_edge(&self, a: usize, b: usize) -> bool {
        self.half_edges.contains_key(&(a, b)) != self.half_edges.contains_key(&(b, a))
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.neighbors[v].iter().any(|&u| self.is_boundary_edge(v, u))
    }

    pub fn unreferenced_vertices(&self) -> Vec<usize> {
        (0..self.num_vertices())
            .filter(|&v| self.vertex_faces[v].is_empty())
            .collect()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.edges.len() as i64 + self.num_faces() as i64
    }

    /// Connected-component label per vertex (unreferenced vertices get their
    /// own singleton component) and the number of components.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let n = self.num_vertices();
        let mut label = vec![usize::MAX; n];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = count;
            stack.push(start);
            while let Some(v) = stack.pop() {
                for &u in &self.neighbors[v] {
                    if label[u] == usize::MAX {
                        label[u] = count;
                        stack.push(u);
                    }
                }
            }
            count += 1;
        }
        (label, count)
    }

    /// Closed boundary loops, each traversed along the face orientation
    /// (surface on the left). Loops start at their smallest vertex index and
    /// are sorted by that index.
    pub fn boundary_loops(&self) -> Vec<BoundaryLoop> {
        let mut next: HashMap<usize, Vec<usize>> = HashMap::new();
        for &(a, b) in self.half_edges.keys() {
            if !self.half_edges.contains_key(&(b, a)) {
                next.entry(a).or_default().push(b);
            }
        }
        for outs in next.values_mut() {
            outs.sort_unstable();
        }
        let mut starts: Vec<usize> = next.keys().copied().collect();
        starts.sort_unstable();
        let mut used: HashMap<(usize, usize), bool> = HashMap::new();
        let mut loops = Vec::new();
        for &s in &starts {
            while let Some(&first) = next[&s].iter().find(|&&b| !used.contains_key(&(s, b))) {
                let mut verts = vec![s];
                used.insert((s, first), true);
                let mut cur = first;
                while cur != s {
                    verts.push(cur);
                    let Some(&nx) = next
                        .get(&cur)
                        .and_then(|outs| outs.iter().find(|&&b| !used.contains_key(&(cur, b))))
                    else {
                        break;
                    };
                    used.insert((cur, nx), true);
                    cur = nx;
                }
                if let Ok(l) = BoundaryLoop::new(verts, &self.vertices) {
                    loops.push(l);
                }
            }
        }
        loops
    }

    /// Returns a copy with every vertex multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> TriangleMesh {
        let vertices = self.vertices.iter().map(|p| p * factor).collect();
        TriangleMesh::new(vertices, self.faces.clone()).expect("scaling preserves validity")
    }

    /// Same connectivity, new positions.
    pub fn with_vertices(&self, vertices: Vec<Point>) -> Result<TriangleMesh> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} positions for {} vertices",
                vertices.len(),
                self.vertices.len()
            )));
        }
        TriangleMesh::new(vertices, self.faces.clone())
    }

    /// Hop distance (number of edges) between two vertices, or `None` if
    /// disconnected.
    pub fn ring_distance(&self, from: usize, to: usize) -> Option<usize> {
        if from == to {
            return Some(0);
        }
        let mut dist = vec![usize::MAX; self.num_vertices()];
        let mut queue = std::collections::VecDeque::new();
        dist[from] = 0;
        queue.push_back(from);
        while let Some(v) = queue.pop_front() {
            for &u in &self.neighbors[v] {
                if dist[u] == usize::MAX {
                    dist[u] = dist[v] + 1;
                    if u == to {
                        return Some(dist[u]);
                    }
                    queue.push_back(u);
                }
            }
        }
        None
    }
}

pub fn triangle_area(a: &Point, b: &Point, c: &Point) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// Rescales both meshes uniformly so each has total surface area 1.
pub fn normalize_pair_area(a: &TriangleMesh, b: &TriangleMesh) -> Result<(TriangleMesh, TriangleMesh)> {
    Ok((normalize_area(a)?, normalize_area(b)?))
}

pub fn normalize_area(mesh: &TriangleMesh) -> Result<TriangleMesh> {
    let area = mesh.total_area();
    if !(area > 0.0) || !area.is_finite() {
        return Err(Error::ZeroArea);
    }
    Ok(mesh.scaled(1.0 / area.sqrt()))
}

/// A closed boundary cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryLoop {
    vertices: Vec<usize>,
    /// `edge_lengths[i]` is the length of edge `(vertices[i], vertices[i + 1])`,
    /// wrapping around at the end.
    edge_lengths: Vec<f64>,
}

impl BoundaryLoop {
    pub fn new(vertices: Vec<usize>, positions: &[Point]) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::OpenLoop);
        }
        let mut seen = std::collections::HashSet::new();
        if !vertices.iter().all(|v| seen.insert(*v)) {
            return Err(Error::OpenLoop);
        }
        let n = vertices.len();
        let edge_lengths = (0..n)
            .map(|i| (positions[vertices[i]] - positions[vertices[(i + 1) % n]]).norm())
            .collect();
        Ok(BoundaryLoop {
            vertices,
            edge_lengths,
        })
    }

    /// Builds a loop from explicit edge lengths (used for purely 1D tests).
    pub fn from_lengths(vertices: Vec<usize>, edge_lengths: Vec<f64>) -> Result<Self> {
        if vertices.len() < 3 || vertices.len() != edge_lengths.len() {
            return Err(Error::OpenLoop);
        }
        Ok(BoundaryLoop {
            vertices,
            edge_lengths,
        })
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn edge_lengths(&self) -> &[f64] {
        &self.edge_lengths
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.edge_lengths.iter().sum()
    }

    /// The same cycle traversed in the opposite direction, keeping the first
    /// vertex.
    pub fn reversed(&self) -> BoundaryLoop {
        let n = self.len();
        let vertices = std::iter::once(self.vertices[0])
            .chain((1..n).rev().map(|i| self.vertices[i]))
            .collect();
        let edge_lengths = (0..n).map(|i| self.edge_lengths[(2 * n - 1 - i) % n]).collect();
        BoundaryLoop {
            vertices,
            edge_lengths,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> TriangleMesh {
        let v = vec![
            Point::new(0.0, 0.0, 0.0),
            Point::new(1.0, 0.0, 0.0),
            Point::new(1.0, 1.0, 0.0),
            Point::new(0.0, 1.0, 0.0),
        ];
        TriangleMesh::new(v, vec![[0, 1, 2], [0, 2, 3]]).unwrap()
    }

    #[test]
    fn single_triangle_area() {
        let v = vec![
            Point::new(0.0, 0.0, 0.0),
            Point::new(1.0, 0.0, 0.0),
            Point::new(0.0, 1.0, 0.0),
        ];
        let m = TriangleMesh::new(v, vec![[0, 1, 2]]).unwrap();
        assert_eq!(m.num_vertices(), 3);
        assert_eq!(m.num_faces(), 1);
        assert!((m.total_area() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn unit_square_topology() {
        let m = square();
        assert_eq!(m.num_vertices(), 4);
        assert_eq!(m.num_faces(), 2);
        assert_eq!(m.edges().len(), 5);
        let loops = m.boundary_loops();
        assert_eq!(loops.len(), 1);
        assert_eq!(loops[0].len(), 4);
        assert!((loops[0].length() - 4.0).abs() < 1e-12);
        assert_eq!(loops[0].vertices(), &[0, 1, 2, 3]);
    }

    #[test]
    fn rejects_bad_connectivity() {
        let v = vec![Point::zeros(), Point::x(), Point::y()];
        assert!(matches!(
            TriangleMesh::new(v.clone(), vec![[0, 1, 5]]),
            Err(Error::InvalidFaceIndex { index: 5, .. })
        ));
        assert!(matches!(
            TriangleMesh::new(v.clone(), vec![[0, 1, 1]]),
            Err(Error::DegenerateFace { face: 0 })
        ));
        assert!(matches!(
            TriangleMesh::new(v, vec![[0, 1, 2], [0, 1, 2]]),
            Err(Error::InconsistentOrientation(..))
        ));
        let v4 = vec![Point::zeros(), Point::x(), Point::y(), Point::z(), -Point::y()];
        assert!(matches!(
            TriangleMesh::new(v4, vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]]),
            Err(Error::NonManifoldEdge(0, 1)) | Err(Error::InconsistentOrientation(..))
        ));
        assert!(matches!(TriangleMesh::new(vec![], vec![]), Err(Error::EmptyMesh)));
    }

    #[test]
    fn area_normalization() {
        let m = square().scaled(2.0);
        assert!((m.total_area() - 4.0).abs() < 1e-12);
        let n = normalize_area(&m).unwrap();
        assert!((n.total_area() - 1.0).abs() < 1e-12);
        assert!((n.vertex(2) - Point::new(1.0, 1.0, 0.0)).norm() < 1e-12);
        let again = normalize_area(&n).unwrap();
        for (p, q) in n.vertices().iter().zip(again.vertices()) {
            assert!((p - q).norm() < 1e-12);
        }
    }

    #[test]
    fn reversed_loop_keeps_lengths() {
        let l = BoundaryLoop::from_lengths(vec![0, 1, 2], vec![1.0, 2.0, 3.0]).unwrap();
        let r = l.reversed();
        assert_eq!(r.vertices(), &[0, 2, 1]);
        assert_eq!(r.edge_lengths(), &[3.0, 2.0, 1.0]);
    }
}
