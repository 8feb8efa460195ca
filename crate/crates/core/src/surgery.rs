//! Landmark surgery: replaces each landmark vertex by a small circular hole
//! lying inside its one-ring.
//!
//! Every triangle around the landmark is split into `n_s` equal-angle wedges.
//! The wedge rays get a vertex at distance `r` from the landmark (these form
//! the new boundary circle) and, for the interior rays, a vertex where they
//! meet the opposite edge. The band between circle and opposite edge is cut
//! into quads, each split along its shorter diagonal, and the triangles
//! across the opposite edges are fanned from their far vertex so the
//! connectivity stays conforming. The landmark and the disk triangles are
//! dropped.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::mesh::{BoundaryLoop, Point, TriangleMesh};

/// Minimum hop distance allowed between two landmarks.
pub const MIN_LANDMARK_RINGS: usize = 4;

/// Validated, ordered landmark vertices of one mesh.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LandmarkSet {
    indices: Vec<usize>,
}

impl LandmarkSet {
    pub fn new(mesh: &TriangleMesh, indices: Vec<usize>) -> Result<Self> {
        let n = mesh.num_vertices();
        for (i, &v) in indices.iter().enumerate() {
            if v >= n {
                return Err(Error::InvalidLandmark(format!(
                    "index {v} out of range for mesh with {n} vertices"
                )));
            }
            if indices[..i].contains(&v) {
                return Err(Error::InvalidLandmark(format!("vertex {v} listed twice")));
            }
            if mesh.vertex_faces(v).is_empty() {
                return Err(Error::InvalidLandmark(format!("vertex {v} belongs to no triangle")));
            }
            if mesh.is_boundary_vertex(v) {
                return Err(Error::LandmarkOnBoundary(v));
            }
        }
        for (i, &a) in indices.iter().enumerate() {
            let near = rings_within(mesh, a, MIN_LANDMARK_RINGS - 1);
            for &b in &indices[i + 1..] {
                if let Some(&d) = near.get(&b) {
                    return Err(Error::LandmarksTooClose(a, b, d));
                }
            }
        }
        Ok(LandmarkSet { indices })
    }

    /// Empty set (pipeline passthrough).
    pub fn empty() -> Self {
        LandmarkSet { indices: Vec::new() }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Hop distances of all vertices within `depth` rings of `start`.
fn rings_within(mesh: &TriangleMesh, start: usize, depth: usize) -> HashMap<usize, usize> {
    let mut dist = HashMap::from([(start, 0)]);
    let mut frontier = vec![start];
    for d in 1..=depth {
        let mut next = Vec::new();
        for v in frontier {
            for &u in mesh.neighbors(v) {
                if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(u) {
                    e.insert(d);
                    next.push(u);
                }
            }
        }
        frontier = next;
    }
    dist
}

fn min_incident_edge(mesh: &TriangleMesh, v: usize) -> Result<f64> {
    let mut best = f64::INFINITY;
    for &u in mesh.neighbors(v) {
        let l = mesh.edge_length(v, u);
        if !(l > 0.0) {
            return Err(Error::ZeroLengthEdge(v));
        }
        best = best.min(l);
    }
    Ok(best)
}

/// Shortest distance from `v` to the edges opposite it in its one-ring.
fn min_opposite_distance(mesh: &TriangleMesh, v: usize) -> f64 {
    let c = mesh.vertex(v);
    let mut best = f64::INFINITY;
    for &f in mesh.vertex_faces(v) {
        let face = mesh.faces()[f];
        let k = face.iter().position(|&x| x == v).expect("incident face contains the vertex");
        let (a, b) = (mesh.vertex(face[(k + 1) % 3]), mesh.vertex(face[(k + 2) % 3]));
        let ab = b - a;
        let t = ((c - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
        best = best.min((a + ab * t - c).norm());
    }
    best
}

/// Fraction of the opposite-edge distance a clamped radius may reach.
const OPPOSITE_EDGE_MARGIN: f64 = 0.9;

/// Circle radius for a landmark pair: `r_f` times the shortest edge incident
/// to the landmark on either mesh. On badly shaped one-rings, where that disk
/// would cross an opposite edge, the radius is clamped to 90% of the
/// opposite-edge distance.
pub fn circle_radius(
    mesh_a: &TriangleMesh,
    landmark_a: usize,
    mesh_b: &TriangleMesh,
    landmark_b: usize,
    r_f: f64,
) -> Result<f64> {
    if !(r_f > 0.0 && r_f < 1.0) {
        return Err(Error::Config(format!("radius factor must lie in (0, 1), got {r_f}")));
    }
    let s = min_incident_edge(mesh_a, landmark_a)?.min(min_incident_edge(mesh_b, landmark_b)?);
    let limit = OPPOSITE_EDGE_MARGIN
        * min_opposite_distance(mesh_a, landmark_a).min(min_opposite_distance(mesh_b, landmark_b));
    if r_f * s >= limit {
        log::warn!(
            "landmark {landmark_a}/{landmark_b}: radius {:.3e} would leave the one-ring, clamped to {limit:.3e}",
            r_f * s
        );
        return Ok(limit);
    }
    Ok(r_f * s)
}

/// θ in [0, 1) proportional to arc length, starting at the first stored vertex.
pub fn circular_coordinates(lp: &BoundaryLoop) -> Vec<f64> {
    let total = lp.length();
    let mut acc = 0.0;
    let mut theta = Vec::with_capacity(lp.len());
    for &e in lp.edge_lengths() {
        theta.push(acc / total);
        acc += e;
    }
    theta
}

/// A mesh with its landmark disks removed.
#[derive(Debug, Clone)]
pub struct CutMesh {
    mesh: TriangleMesh,
    landmarks: Vec<usize>,
    landmark_positions: Vec<Point>,
    radii: Vec<f64>,
    loops: Vec<BoundaryLoop>,
    theta: Vec<Vec<f64>>,
    neumann: Vec<BoundaryLoop>,
    to_original: Vec<Option<usize>>,
    from_original: Vec<Option<usize>>,
}

impl CutMesh {
    /// Uses the mesh's own boundary loops as the constrained loops, without
    /// any surgery. Vertex indices are unchanged.
    pub fn from_boundary(mesh: &TriangleMesh) -> Self {
        let loops = mesh.boundary_loops();
        let theta = loops.iter().map(circular_coordinates).collect();
        let n = mesh.num_vertices();
        CutMesh {
            mesh: mesh.clone(),
            landmarks: Vec::new(),
            landmark_positions: Vec::new(),
            radii: Vec::new(),
            loops,
            theta,
            neumann: Vec::new(),
            to_original: (0..n).map(Some).collect(),
            from_original: (0..n).map(Some).collect(),
        }
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    /// Original indices of the removed landmark vertices, in loop order.
    pub fn landmarks(&self) -> &[usize] {
        &self.landmarks
    }

    pub fn landmark_positions(&self) -> &[Point] {
        &self.landmark_positions
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Landmark circles (Dirichlet/Steklov loops), one per landmark.
    pub fn loops(&self) -> &[BoundaryLoop] {
        &self.loops
    }

    pub fn num_loops(&self) -> usize {
        self.loops.len()
    }

    /// Circular coordinate per vertex of `loops()[i]`.
    pub fn theta(&self, i: usize) -> &[f64] {
        &self.theta[i]
    }

    /// Pre-existing boundaries, left free (natural boundary condition).
    pub fn neumann_loops(&self) -> &[BoundaryLoop] {
        &self.neumann
    }

    /// Original vertex of a cut-mesh vertex, `None` for inserted vertices.
    pub fn original_of(&self, v: usize) -> Option<usize> {
        self.to_original[v]
    }

    /// Cut-mesh index of an original vertex, `None` for removed landmarks.
    pub fn cut_index_of(&self, original: usize) -> Option<usize> {
        self.from_original[original]
    }

    pub fn num_original_vertices(&self) -> usize {
        self.from_original.len()
    }

    /// Cut-mesh indices of all surviving original vertices, in original order.
    pub fn original_vertices(&self) -> Vec<usize> {
        self.from_original.iter().flatten().copied().collect()
    }
}

struct Builder<'a> {
    mesh: &'a TriangleMesh,
    positions: Vec<Point>,
    face_removed: Vec<bool>,
    new_faces: Vec<[usize; 3]>,
    vertex_removed: Vec<bool>,
}

impl Builder<'_> {
    fn add_vertex(&mut self, p: Point) -> usize {
        self.positions.push(p);
        self.positions.len() - 1
    }
}

/// Faces around an interior vertex in counter-clockwise order, starting at
/// the incident face with the smallest index, and the ring vertex `v_t`
/// such that face `t` is `(γ, v_t, v_{t+1})`.
fn ordered_fan(mesh: &TriangleMesh, g: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let first = *mesh
        .vertex_faces(g)
        .iter()
        .min()
        .ok_or_else(|| Error::InvalidLandmark(format!("vertex {g} belongs to no triangle")))?;
    let mut faces = Vec::new();
    let mut ring = Vec::new();
    let mut f = first;
    loop {
        let tri = mesh.faces()[f];
        let k = tri.iter().position(|&v| v == g).expect("fan face contains landmark");
        let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
        faces.push(f);
        ring.push(a);
        f = mesh.face_with_half_edge(g, b).ok_or(Error::LandmarkOnBoundary(g))?;
        if f == first {
            break;
        }
        if faces.len() > mesh.vertex_faces(g).len() {
            return Err(Error::InvalidLandmark(format!("vertex {g} has a non-manifold fan")));
        }
    }
    Ok((faces, ring))
}

fn cut_landmark(b: &mut Builder, g: usize, r: f64, n_s: usize) -> Result<Vec<usize>> {
    let mesh = b.mesh;
    let (fan, ring) = ordered_fan(mesh, g)?;
    let m = ring.len();
    let min_edge = min_incident_edge(mesh, g)?;
    if !(r > 0.0) || r >= min_edge {
        return Err(Error::RadiusTooLarge {
            radius: r,
            edge: min_edge,
        });
    }
    let c = *mesh.vertex(g);
    let dirs: Vec<Point> = ring.iter().map(|&v| (mesh.vertex(v) - c).normalize()).collect();

    // Circle vertices in loop order: spoke point of v_t, then the wedge points of face t.
    let mut circle = Vec::with_capacity(m * n_s);
    let mut wedge_angles = Vec::with_capacity(m);
    for t in 0..m {
        let (d0, d1) = (dirs[t], dirs[(t + 1) % m]);
        let theta = d0.dot(&d1).clamp(-1.0, 1.0).acos();
        circle.push(b.add_vertex(c + d0 * r));
        let mut angles = Vec::with_capacity(n_s.saturating_sub(1));
        for s in 1..n_s {
            let phi = theta * s as f64 / n_s as f64;
            let dir = (d0 * (theta - phi).sin() + d1 * phi.sin()) / theta.sin();
            circle.push(b.add_vertex(c + dir * r));
            angles.push((phi, theta, dir));
        }
        wedge_angles.push(angles);
    }

    // Points where interior wedge rays meet the opposite edges.
    let mut splits: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    let mut outer_points = Vec::with_capacity(m);
    for t in 0..m {
        let (va, vb) = (ring[t], ring[(t + 1) % m]);
        let (pa, pb) = (*mesh.vertex(va), *mesh.vertex(vb));
        let (la, lb) = ((pa - c).norm(), (pb - c).norm());
        let mut pts = Vec::with_capacity(n_s.saturating_sub(1));
        for &(phi, theta, _) in &wedge_angles[t] {
            let u = la * phi.sin() / (la * phi.sin() + lb * (theta - phi).sin());
            let q = pa + (pb - pa) * u;
            if (q - c).norm() <= r {
                return Err(Error::RadiusTooLarge {
                    radius: r,
                    edge: (q - c).norm(),
                });
            }
            pts.push(b.add_vertex(q));
        }
        // The face across (va, vb) sees the edge as vb -> va.
        splits.insert((vb, va), pts.iter().rev().copied().collect());
        outer_points.push(pts);
    }

    // Band between the circle and the opposite edge, face by face.
    for t in 0..m {
        let arc: Vec<usize> = (0..=n_s).map(|s| circle[(t * n_s + s) % (m * n_s)]).collect();
        let mut outer = vec![ring[t]];
        outer.extend_from_slice(&outer_points[t]);
        outer.push(ring[(t + 1) % m]);
        for s in 0..n_s {
            let (a0, a1, o0, o1) = (arc[s], arc[s + 1], outer[s], outer[s + 1]);
            let d_a0o1 = (b.positions[a0] - b.positions[o1]).norm();
            let d_o0a1 = (b.positions[o0] - b.positions[a1]).norm();
            if d_a0o1 <= d_o0a1 {
                b.new_faces.push([a0, o0, o1]);
                b.new_faces.push([a0, o1, a1]);
            } else {
                b.new_faces.push([a0, o0, a1]);
                b.new_faces.push([o0, o1, a1]);
            }
        }
        b.face_removed[fan[t]] = true;
    }
    b.vertex_removed[g] = true;

    // Close the gap in triangles across the split edges.
    if n_s > 1 {
        let mut across: Vec<usize> = splits
            .keys()
            .filter_map(|&(x, y)| mesh.face_with_half_edge(x, y))
            .collect();
        across.sort_unstable();
        across.dedup();
        for f in across {
            let tri = mesh.faces()[f];
            let split_edges: Vec<usize> = (0..3)
                .filter(|&k| splits.contains_key(&(tri[k], tri[(k + 1) % 3])))
                .collect();
            let mut polygon = Vec::new();
            for k in 0..3 {
                polygon.push(tri[k]);
                if let Some(pts) = splits.get(&(tri[k], tri[(k + 1) % 3])) {
                    polygon.extend_from_slice(pts);
                }
            }
            if split_edges.len() == 1 {
                // Rotate so the split edge comes first, then fan from the far vertex.
                let k = split_edges[0];
                let apex = tri[(k + 2) % 3];
                let start = polygon.iter().position(|&v| v == tri[k]).expect("corner present");
                let chain: Vec<usize> = (0..polygon.len())
                    .map(|i| polygon[(start + i) % polygon.len()])
                    .take_while(|&v| v != apex)
                    .collect();
                for w in chain.windows(2) {
                    b.new_faces.push([w[0], w[1], apex]);
                }
            } else {
                let centroid = tri.iter().fold(Point::zeros(), |acc, &v| acc + mesh.vertex(v)) / 3.0;
                let cv = b.add_vertex(centroid);
                let p = polygon.len();
                for i in 0..p {
                    b.new_faces.push([polygon[i], polygon[(i + 1) % p], cv]);
                }
            }
            b.face_removed[f] = true;
        }
    }
    Ok(circle)
}

/// Cuts every landmark of `landmarks` (in list order) with its radius from
/// `radii` and `n_s` wedges per incident triangle.
pub fn cut_all(mesh: &TriangleMesh, landmarks: &LandmarkSet, radii: &[f64], n_s: usize) -> Result<CutMesh> {
    if radii.len() != landmarks.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} radii for {} landmarks",
            radii.len(),
            landmarks.len()
        )));
    }
    if n_s == 0 {
        return Err(Error::Config("wedge count must be at least 1".into()));
    }
    let n = mesh.num_vertices();
    let mut b = Builder {
        mesh,
        positions: mesh.vertices().to_vec(),
        face_removed: vec![false; mesh.num_faces()],
        new_faces: Vec::new(),
        vertex_removed: vec![false; n],
    };
    let mut raw_loops = Vec::with_capacity(landmarks.len());
    for (&g, &r) in landmarks.indices().iter().zip(radii) {
        raw_loops.push(cut_landmark(&mut b, g, r, n_s)?);
    }

    // Compact: surviving originals first, then inserted vertices.
    let total = b.positions.len();
    let mut remap = vec![usize::MAX; total];
    let mut to_original = Vec::with_capacity(total);
    let mut from_original = vec![None; n];
    let mut positions = Vec::with_capacity(total);
    for v in 0..total {
        if v < n && b.vertex_removed[v] {
            continue;
        }
        remap[v] = positions.len();
        positions.push(b.positions[v]);
        if v < n {
            from_original[v] = Some(remap[v]);
            to_original.push(Some(v));
        } else {
            to_original.push(None);
        }
    }
    let faces: Vec<[usize; 3]> = mesh
        .faces()
        .iter()
        .enumerate()
        .filter(|(f, _)| !b.face_removed[*f])
        .map(|(_, f)| *f)
        .chain(b.new_faces.iter().copied())
        .map(|f| [remap[f[0]], remap[f[1]], remap[f[2]]])
        .collect();
    let cut = TriangleMesh::new(positions, faces)?;

    let mut loops = Vec::with_capacity(raw_loops.len());
    let mut on_landmark_loop = vec![false; cut.num_vertices()];
    for raw in raw_loops {
        let verts: Vec<usize> = raw.iter().map(|&v| remap[v]).collect();
        for &v in &verts {
            on_landmark_loop[v] = true;
        }
        loops.push(BoundaryLoop::new(verts, cut.vertices())?);
    }
    let neumann = cut
        .boundary_loops()
        .into_iter()
        .filter(|l| !on_landmark_loop[l.vertices()[0]])
        .collect();
    let theta = loops.iter().map(circular_coordinates).collect();
    Ok(CutMesh {
        landmarks: landmarks.indices().to_vec(),
        landmark_positions: landmarks.indices().iter().map(|&g| *mesh.vertex(g)).collect(),
        radii: radii.to_vec(),
        mesh: cut,
        loops,
        theta,
        neumann,
        to_original,
        from_original,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    fn barycentric(p: &Point, a: &Point, b: &Point, c: &Point) -> [f64; 3] {
        let (v0, v1, v2) = (b - a, c - a, p - a);
        let (d00, d01, d11) = (v0.dot(&v0), v0.dot(&v1), v1.dot(&v1));
        let (d20, d21) = (v2.dot(&v0), v2.dot(&v1));
        let den = d00 * d11 - d01 * d01;
        let v = (d11 * d20 - d01 * d21) / den;
        let w = (d00 * d21 - d01 * d20) / den;
        [1.0 - v - w, v, w]
    }

    /// Hexagonal patch: vertex 0 at the center with valence 6 and two rings
    /// of neighbors so the landmark is interior.
    fn hex_patch() -> TriangleMesh {
        shapes::disk(3)
    }

    #[test]
    fn valence_six_gives_eighteen_edges() {
        let m = hex_patch();
        assert_eq!(m.neighbors(0).len(), 6);
        let lm = LandmarkSet::new(&m, vec![0]).unwrap();
        let r = circle_radius(&m, 0, &m, 0, 0.5).unwrap();
        let cut = cut_all(&m, &lm, &[r], 3).unwrap();
        assert_eq!(cut.loops()[0].len(), 18);
        for &v in cut.loops()[0].vertices() {
            assert!(((cut.mesh().vertex(v) - m.vertex(0)).norm() - r).abs() < 1e-12);
        }
        // The loop is a boundary of the cut mesh, and the original outer
        // boundary becomes a Neumann loop.
        assert_eq!(cut.mesh().boundary_loops().len(), 2);
        assert_eq!(cut.neumann_loops().len(), 1);
        assert_eq!(cut.mesh().euler_characteristic(), m.euler_characteristic() - 1);
    }

    #[test]
    fn single_wedge_loop_matches_valence() {
        let m = hex_patch();
        let lm = LandmarkSet::new(&m, vec![0]).unwrap();
        let cut = cut_all(&m, &lm, &[0.1], 1).unwrap();
        assert_eq!(cut.loops()[0].len(), 6);
        assert_eq!(cut.mesh().euler_characteristic(), 0);
    }

    #[test]
    fn too_close_landmarks_rejected() {
        let m = shapes::grid(12, 12, 1.0, 1.0);
        let id = |i: usize, j: usize| j * 13 + i;
        assert!(matches!(
            LandmarkSet::new(&m, vec![id(3, 3), id(6, 3)]),
            Err(Error::LandmarksTooClose(_, _, 3))
        ));
        assert!(LandmarkSet::new(&m, vec![id(3, 3), id(7, 3)]).is_ok());
        assert!(matches!(
            LandmarkSet::new(&m, vec![id(0, 3)]),
            Err(Error::LandmarkOnBoundary(_))
        ));
    }

    #[test]
    fn radius_is_clamped_on_obtuse_rings() {
        // Landmark 0 sits 0.1 below a long opposite edge.
        let mesh = TriangleMesh::new(
            vec![
                Point::new(0.0, 0.0, 0.0),
                Point::new(1.0, 0.1, 0.0),
                Point::new(-1.0, 0.1, 0.0),
                Point::new(0.0, -1.0, 0.0),
            ],
            vec![[0, 1, 2], [0, 3, 1], [0, 2, 3]],
        )
        .unwrap();
        let r = circle_radius(&mesh, 0, &mesh, 0, 0.5).unwrap();
        assert!((r - 0.09).abs() < 1e-12);
        let cut = cut_all(&mesh, &LandmarkSet::new(&mesh, vec![0]).unwrap(), &[r], 3);
        assert!(cut.is_ok());
    }

    #[test]
    fn radius_uses_both_shapes() {
        let a = shapes::disk(4);
        let b = a.scaled(0.5);
        let ea = min_incident_edge(&a, 0).unwrap();
        let r = circle_radius(&a, 0, &b, 0, 0.5).unwrap();
        assert!((r - 0.5 * 0.5 * ea).abs() < 1e-15);
        assert!(circle_radius(&a, 0, &b, 0, 1.5).is_err());
        let cut = cut_all(&a, &LandmarkSet::new(&a, vec![0]).unwrap(), &[ea], 3);
        assert!(matches!(cut, Err(Error::RadiusTooLarge { .. })));
    }

    #[test]
    fn sphere_six_landmarks() {
        let m = shapes::icosphere(8);
        let idx = shapes::sphere_landmarks(&m, 6);
        let lm = LandmarkSet::new(&m, idx.clone()).unwrap();
        let radii: Vec<f64> = idx
            .iter()
            .map(|&g| circle_radius(&m, g, &m, g, 0.5).unwrap())
            .collect();
        let cut = cut_all(&m, &lm, &radii, 3).unwrap();
        assert_eq!(cut.num_loops(), 6);
        assert!(cut.neumann_loops().is_empty());
        assert_eq!(cut.mesh().euler_characteristic(), 2 - 6);
        assert_eq!(cut.mesh().boundary_loops().len(), 6);

        // Loops pairwise disjoint.
        let mut seen = std::collections::HashSet::new();
        for l in cut.loops() {
            for &v in l.vertices() {
                assert!(seen.insert(v));
            }
        }

        // Surviving originals keep their positions bit for bit.
        for v in 0..m.num_vertices() {
            match cut.cut_index_of(v) {
                Some(c) => {
                    assert_eq!(cut.mesh().vertex(c), m.vertex(v));
                    assert_eq!(cut.original_of(c), Some(v));
                }
                None => assert!(idx.contains(&v)),
            }
        }

        // Inserted vertices lie inside some original triangle near their landmark.
        for c in 0..cut.mesh().num_vertices() {
            if cut.original_of(c).is_some() {
                continue;
            }
            let p = cut.mesh().vertex(c);
            let inside = m.faces().iter().any(|f| {
                let (a, b, cc) = (m.vertex(f[0]), m.vertex(f[1]), m.vertex(f[2]));
                let n = (b - a).cross(&(cc - a)).normalize();
                if ((p - a).dot(&n)).abs() > 1e-9 {
                    return false;
                }
                let w = barycentric(p, a, b, cc);
                w.iter().all(|x| (-1e-9..=1.0 + 1e-9).contains(x))
            });
            assert!(inside, "inserted vertex {c} not inside an original triangle");
        }
    }

    #[test]
    fn loop_is_counter_clockwise_around_landmark() {
        let m = shapes::disk(4);
        let lm = LandmarkSet::new(&m, vec![0]).unwrap();
        let cut = cut_all(&m, &lm, &[0.1], 3).unwrap();
        let l = &cut.loops()[0];
        let mut signed = 0.0;
        for i in 0..l.len() {
            let p = cut.mesh().vertex(l.vertices()[i]);
            let q = cut.mesh().vertex(l.vertices()[(i + 1) % l.len()]);
            signed += p.x * q.y - p.y * q.x;
        }
        assert!(signed > 0.0);
        // θ origin is the first inserted vertex.
        let first_inserted = (0..cut.mesh().num_vertices())
            .find(|&v| cut.original_of(v).is_none())
            .unwrap();
        assert_eq!(l.vertices()[0], first_inserted);
    }

    #[test]
    fn surgery_is_deterministic() {
        let m = shapes::bumpy_sphere(6, 0.1);
        let idx = shapes::sphere_landmarks(&m, 4);
        let lm = LandmarkSet::new(&m, idx).unwrap();
        let radii = vec![0.01; 4];
        let a = cut_all(&m, &lm, &radii, 3).unwrap();
        let b = cut_all(&m, &lm, &radii, 3).unwrap();
        assert_eq!(a.mesh().faces(), b.mesh().faces());
        assert_eq!(a.mesh().vertices(), b.mesh().vertices());
        assert_eq!(a.loops(), b.loops());
    }

    #[test]
    fn no_landmarks_is_passthrough() {
        let m = shapes::icosphere(3);
        let cut = cut_all(&m, &LandmarkSet::empty(), &[], 3).unwrap();
        assert_eq!(cut.num_loops(), 0);
        assert_eq!(cut.mesh().faces(), m.faces());
        assert_eq!(cut.mesh().vertices(), m.vertices());
    }

    #[test]
    fn preexisting_boundary_is_neumann() {
        let m = shapes::grid(14, 14, 1.0, 1.0);
        let id = |i: usize, j: usize| j * 15 + i;
        let lm = LandmarkSet::new(&m, vec![id(4, 4), id(10, 10)]).unwrap();
        let cut = cut_all(&m, &lm, &[0.02, 0.02], 3).unwrap();
        assert_eq!(cut.num_loops(), 2);
        assert_eq!(cut.neumann_loops().len(), 1);
        assert_eq!(cut.neumann_loops()[0].len(), 56);
    }

    #[test]
    fn circular_coordinate_examples() {
        let l = BoundaryLoop::from_lengths(vec![0, 1, 2, 3], vec![1.0; 4]).unwrap();
        assert_eq!(circular_coordinates(&l), vec![0.0, 0.25, 0.5, 0.75]);
        let l = BoundaryLoop::from_lengths(vec![0, 1, 2], vec![1.0, 1.0, 2.0]).unwrap();
        assert_eq!(circular_coordinates(&l), vec![0.0, 0.25, 0.5]);
        let r = l.reversed();
        let tr = circular_coordinates(&r);
        let t = circular_coordinates(&l);
        // r = [0, 2, 1]
        assert_eq!(tr[0], 0.0);
        assert!((tr[1] - (1.0 - t[2])).abs() < 1e-15);
        assert!((tr[2] - (1.0 - t[1])).abs() < 1e-15);
    }
}
