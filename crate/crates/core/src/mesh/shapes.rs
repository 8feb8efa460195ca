//! Procedural meshes used by tests, benchmarks and the CLI fixtures.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Point, TriangleMesh};

fn icosahedron() -> (Vec<Point>, Vec<[usize; 3]>) {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut v = Vec::with_capacity(12);
    for &a in &[-1.0, 1.0] {
        for &b in &[-phi, phi] {
            v.push(Point::new(0.0, a, b));
            v.push(Point::new(a, b, 0.0));
            v.push(Point::new(b, 0.0, a));
        }
    }
    let mut faces = Vec::with_capacity(20);
    let is_edge = |i: usize, j: usize| ((v[i] - v[j]).norm() - 2.0).abs() < 1e-9;
    for i in 0..12 {
        for j in i + 1..12 {
            for k in j + 1..12 {
                if is_edge(i, j) && is_edge(j, k) && is_edge(i, k) {
                    let n = (v[j] - v[i]).cross(&(v[k] - v[i]));
                    if n.dot(&(v[i] + v[j] + v[k])) > 0.0 {
                        faces.push([i, j, k]);
                    } else {
                        faces.push([i, k, j]);
                    }
                }
            }
        }
    }
    (v, faces)
}

/// Unit sphere from an icosahedron with every face split into `frequency²`
/// triangles; `10 f² + 2` vertices.
pub fn icosphere(frequency: usize) -> TriangleMesh {
    let f = frequency.max(1);
    let (corners, base) = icosahedron();
    let mut index: HashMap<Vec<(usize, usize)>, usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for tri in &base {
        let mut id = |k: usize, i: usize, j: usize| -> usize {
            let mut key: Vec<(usize, usize)> = [(tri[0], k), (tri[1], i), (tri[2], j)]
                .into_iter()
                .filter(|&(_, w)| w > 0)
                .collect();
            key.sort_unstable();
            // Edge points are keyed by their weights, which are symmetric in
            // the two corners, so both faces produce the same key.
            *index.entry(key).or_insert_with(|| {
                let p = (corners[tri[0]] * k as f64 + corners[tri[1]] * i as f64 + corners[tri[2]] * j as f64)
                    / f as f64;
                vertices.push(p.normalize());
                vertices.len() - 1
            })
        };
        for i in 0..f {
            for j in 0..f - i {
                let a = id(f - i - j, i, j);
                let b = id(f - i - j - 1, i + 1, j);
                let c = id(f - i - j - 1, i, j + 1);
                faces.push([a, b, c]);
                if i + j + 2 <= f {
                    let d = id(f - i - j - 2, i + 1, j + 1);
                    faces.push([b, d, c]);
                }
            }
        }
    }
    TriangleMesh::new(vertices, faces).expect("icosphere is valid")
}

/// Icosphere with smooth radial bumps of relative height `amplitude`.
pub fn bumpy_sphere(frequency: usize, amplitude: f64) -> TriangleMesh {
    let s = icosphere(frequency);
    let v = s
        .vertices()
        .iter()
        .map(|p| p * (1.0 + amplitude * (3.0 * p.x).sin() * (2.0 * p.y).cos() * (1.0 + p.z)))
        .collect();
    s.with_vertices(v).expect("radial bumps keep validity")
}

/// Icosphere scaled along the axes.
pub fn ellipsoid(frequency: usize, a: f64, b: f64, c: f64) -> TriangleMesh {
    let s = icosphere(frequency);
    let v = s
        .vertices()
        .iter()
        .map(|p| Point::new(a * p.x, b * p.y, c * p.z))
        .collect();
    s.with_vertices(v).expect("axis scaling keeps validity")
}

/// Triangulates the band between two concentric point rings by merging them
/// in angular order. Each ring entry is `(vertex index, angle)` with angles
/// increasing within `[start, start + 2π)`.
fn zip_rings(inner: &[(usize, f64)], outer: &[(usize, f64)], faces: &mut Vec<[usize; 3]>) {
    let (m, n) = (inner.len(), outer.len());
    let next_angle = |ring: &[(usize, f64)], i: usize| {
        if i + 1 < ring.len() {
            ring[i + 1].1
        } else {
            ring[0].1 + 2.0 * PI
        }
    };
    let (mut ia, mut ib) = (0, 0);
    while ia < m || ib < n {
        let advance_outer = if m == 1 || ia == m {
            true
        } else if ib == n {
            false
        } else {
            next_angle(outer, ib) <= next_angle(inner, ia)
        };
        if advance_outer {
            if ib == n {
                break;
            }
            faces.push([inner[ia % m].0, outer[ib].0, outer[(ib + 1) % n].0]);
            ib += 1;
        } else {
            faces.push([inner[ia].0, outer[ib % n].0, inner[(ia + 1) % m].0]);
            ia += 1;
        }
    }
}

fn planar_mesh(points: Vec<(f64, f64)>, mut faces: Vec<[usize; 3]>) -> TriangleMesh {
    for f in &mut faces {
        let (a, b, c) = (points[f[0]], points[f[1]], points[f[2]]);
        let signed = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
        if signed < 0.0 {
            f.swap(1, 2);
        }
    }
    let vertices = points.into_iter().map(|(x, y)| Point::new(x, y, 0.0)).collect();
    TriangleMesh::new(vertices, faces).expect("planar fixture is valid")
}

/// Unit disk with a center vertex and `rings` concentric rings of `6 i`
/// points each.
pub fn disk(rings: usize) -> TriangleMesh {
    let rings = rings.max(1);
    let mut points = vec![(0.0, 0.0)];
    let mut prev: Vec<(usize, f64)> = vec![(0, 0.0)];
    let mut faces = Vec::new();
    for i in 1..=rings {
        let r = i as f64 / rings as f64;
        let count = 6 * i;
        let ring: Vec<(usize, f64)> = (0..count)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / count as f64;
                points.push((r * t.cos(), r * t.sin()));
                (points.len() - 1, t)
            })
            .collect();
        zip_rings(&prev, &ring, &mut faces);
        prev = ring;
    }
    planar_mesh(points, faces)
}

/// Planar annulus between radii `inner` and `outer` with target edge length
/// `h`. Adjacent rings are offset by half an angular step.
pub fn annulus(inner: f64, outer: f64, h: f64) -> TriangleMesh {
    let radial = (((outer - inner) / h).round() as usize).max(1);
    let mut points = Vec::new();
    let mut faces = Vec::new();
    let mut prev: Vec<(usize, f64)> = Vec::new();
    for i in 0..=radial {
        let r = inner + (outer - inner) * i as f64 / radial as f64;
        let count = ((2.0 * PI * r / h).round() as usize).max(6);
        let offset = if i % 2 == 1 { 0.5 } else { 0.0 };
        let ring: Vec<(usize, f64)> = (0..count)
            .map(|j| {
                let t = 2.0 * PI * (j as f64 + offset) / count as f64;
                points.push((r * t.cos(), r * t.sin()));
                (points.len() - 1, t)
            })
            .collect();
        if !prev.is_empty() {
            zip_rings(&prev, &ring, &mut faces);
        }
        prev = ring;
    }
    planar_mesh(points, faces)
}

/// The two-triangle unit square `[0,1]²`, split along the (0,0)-(1,1) diagonal.
pub fn unit_square() -> TriangleMesh {
    planar_mesh(
        vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)],
        vec![[0, 1, 2], [0, 2, 3]],
    )
}

/// Rectangular `nx × ny` cell grid over `[0,w]×[0,h]`; vertex `(i, j)` has
/// index `j (nx + 1) + i`.
pub fn grid(nx: usize, ny: usize, w: f64, h: f64) -> TriangleMesh {
    let mut points = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            points.push((w * i as f64 / nx as f64, h * j as f64 / ny as f64));
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut faces = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    planar_mesh(points, faces)
}

pub fn disjoint_union(parts: &[&TriangleMesh]) -> TriangleMesh {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for m in parts {
        let base = vertices.len();
        vertices.extend_from_slice(m.vertices());
        faces.extend(m.faces().iter().map(|f| [f[0] + base, f[1] + base, f[2] + base]));
    }
    TriangleMesh::new(vertices, faces).expect("union of valid meshes is valid")
}

/// Conformal map of the unit sphere: stereographic projection from the north
/// pole, dilation of the plane by `scale`, and projection back. Points are
/// radially projected onto the sphere first.
pub fn stereographic_dilation(mesh: &TriangleMesh, scale: f64) -> TriangleMesh {
    let v = mesh
        .vertices()
        .iter()
        .map(|p| {
            let p = p.normalize();
            if 1.0 - p.z < 1e-14 {
                return p;
            }
            let wx = scale * p.x / (1.0 - p.z);
            let wy = scale * p.y / (1.0 - p.z);
            let r2 = wx * wx + wy * wy;
            Point::new(2.0 * wx, 2.0 * wy, r2 - 1.0) / (r2 + 1.0)
        })
        .collect();
    mesh.with_vertices(v).expect("conformal map keeps connectivity")
}

/// Moves each vertex by a random offset of length at most `max_offset`
/// (uniform in the ball), deterministically from `seed`.
pub fn jittered(mesh: &TriangleMesh, max_offset: f64, seed: u64) -> TriangleMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = mesh
        .vertices()
        .iter()
        .map(|p| loop {
            let d = Point::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if d.norm_squared() <= 1.0 {
                break p + d * max_offset;
            }
        })
        .collect();
    mesh.with_vertices(v).expect("jitter keeps connectivity")
}

/// Vertex closest to `target` (smallest index on ties).
pub fn nearest_vertex(mesh: &TriangleMesh, target: &Point) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, p) in mesh.vertices().iter().enumerate() {
        let d = (p - target).norm_squared();
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Up to eight well-separated directions on the unit sphere: the six axis
/// directions followed by two diagonals.
pub fn sphere_landmark_directions(count: usize) -> Vec<Point> {
    let s = 1.0 / 3f64.sqrt();
    let dirs = [
        Point::new(1.0, 0.0, 0.0),
        Point::new(-1.0, 0.0, 0.0),
        Point::new(0.0, 1.0, 0.0),
        Point::new(0.0, -1.0, 0.0),
        Point::new(0.0, 0.0, 1.0),
        Point::new(0.0, 0.0, -1.0),
        Point::new(s, s, s),
        Point::new(-s, -s, -s),
    ];
    dirs.iter().take(count).copied().collect()
}

/// Landmarks on a sphere-like mesh: for each direction, the vertex whose
/// position direction from the centroid is closest.
pub fn sphere_landmarks(mesh: &TriangleMesh, count: usize) -> Vec<usize> {
    let centroid = mesh.vertices().iter().fold(Point::zeros(), |a, p| a + p) / mesh.num_vertices() as f64;
    sphere_landmark_directions(count)
        .iter()
        .map(|d| {
            let mut best = 0;
            let mut best_c = f64::NEG_INFINITY;
            for (i, p) in mesh.vertices().iter().enumerate() {
                let c = (p - centroid).normalize().dot(d);
                if c > best_c {
                    best = i;
                    best_c = c;
                }
            }
            best
        })
        .collect()
}
