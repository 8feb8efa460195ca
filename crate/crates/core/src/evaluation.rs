//! Map quality: geodesic error curves against a ground truth and the
//! discrete Dirichlet energy of a vertex map.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::cotangent_weights;
use crate::matching::VertexMap;
use crate::mesh::geodesic::{geodesic_diameter, GeodesicGraph};
use crate::mesh::TriangleMesh;

/// Seeds for the diameter estimate.
pub const DIAMETER_SEEDS: usize = 10;

/// Thresholds 0, 0.01, ..., 0.25 (fractions of the geodesic diameter).
pub fn default_thresholds() -> Vec<f64> {
    (0..=25).map(|i| i as f64 / 100.0).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorCurve {
    pub thresholds: Vec<f64>,
    /// Percentage of vertices with normalized error at most each threshold.
    pub percentages: Vec<f64>,
    /// Mean normalized error (a fraction of the diameter, not ×100).
    pub mean: f64,
    pub max: f64,
    #[serde(skip)]
    pub errors: Vec<f64>,
}

impl ErrorCurve {
    pub fn from_errors(errors: Vec<f64>, thresholds: &[f64]) -> Self {
        let n = errors.len().max(1) as f64;
        let mut sorted = errors.clone();
        sorted.sort_by(f64::total_cmp);
        let percentages = thresholds
            .iter()
            .map(|&t| 100.0 * sorted.partition_point(|&e| e <= t) as f64 / n)
            .collect();
        ErrorCurve {
            thresholds: thresholds.to_vec(),
            percentages,
            mean: errors.iter().sum::<f64>() / n,
            max: sorted.last().copied().unwrap_or(0.0),
            errors,
        }
    }

    /// Mean error in the ×100 convention used for reporting.
    pub fn mean_x100(&self) -> f64 {
        100.0 * self.mean
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "threshold,percentage")?;
        for (t, p) in self.thresholds.iter().zip(&self.percentages) {
            writeln!(out, "{t:.2},{p:.4}")?;
        }
        Ok(())
    }
}

/// Geodesic distance on the target between each mapped image and its
/// ground-truth image. Runs one truncated Dijkstra per distinct ground-truth
/// vertex.
pub fn raw_errors(map: &VertexMap, ground_truth: &VertexMap, graph: &GeodesicGraph) -> Result<Vec<f64>> {
    if ground_truth.len() < map.len() {
        return Err(Error::MissingGroundTruth(ground_truth.len()));
    }
    if map.len() < ground_truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "map covers {} vertices, ground truth {}",
            map.len(),
            ground_truth.len()
        )));
    }
    let n = graph.num_vertices();
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for v in 0..map.len() {
        let (m, g) = (map.get(v), ground_truth.get(v));
        if m >= n || g >= n {
            return Err(Error::DimensionMismatch(format!(
                "vertex {v} maps outside the target ({} vertices)",
                n
            )));
        }
        groups.entry(g).or_default().push(v);
    }
    let groups: Vec<(usize, Vec<usize>)> = groups.into_iter().collect();
    let parts: Vec<Vec<(usize, f64)>> = groups
        .par_iter()
        .map(|(g, vs)| {
            let targets: Vec<usize> = vs.iter().map(|&v| map.get(v)).collect();
            let d = graph.distances_until(*g, &targets);
            vs.iter().zip(&targets).map(|(&v, &t)| (v, d[t])).collect()
        })
        .collect();
    let mut errors = vec![0.0; map.len()];
    for (v, d) in parts.into_iter().flatten() {
        if !d.is_finite() {
            return Err(Error::Unreachable(v));
        }
        errors[v] = d;
    }
    Ok(errors)
}

/// Error curve with errors normalized by `diameter`.
pub fn geodesic_error_with(
    map: &VertexMap,
    ground_truth: &VertexMap,
    graph: &GeodesicGraph,
    diameter: f64,
    thresholds: &[f64],
) -> Result<ErrorCurve> {
    let errors = raw_errors(map, ground_truth, graph)?.into_iter().map(|e| e / diameter).collect();
    Ok(ErrorCurve::from_errors(errors, thresholds))
}

/// Error curve on the default thresholds, using the augmented edge graph of
/// the target and its estimated diameter.
pub fn geodesic_error(map: &VertexMap, ground_truth: &VertexMap, target: &TriangleMesh) -> Result<ErrorCurve> {
    let graph = GeodesicGraph::new(target, true);
    let diameter = geodesic_diameter(target, &graph, DIAMETER_SEEDS);
    geodesic_error_with(map, ground_truth, &graph, diameter, &default_thresholds())
}

/// `¼ Σ_edges w_uv d²(φ(u), φ(v))` with source cotangent weights and target
/// geodesic distances.
pub fn dirichlet_map_energy(map: &VertexMap, source: &TriangleMesh, target_graph: &GeodesicGraph) -> Result<f64> {
    if map.len() != source.num_vertices() {
        return Err(Error::DimensionMismatch(format!(
            "map covers {} vertices, source has {}",
            map.len(),
            source.num_vertices()
        )));
    }
    let weights = cotangent_weights(source)?;
    let negative = weights.iter().filter(|&&w| w < 0.0).count();
    if negative > 0 {
        log::warn!("{negative} source edges have negative cotangent weights; the energy may be negative");
    }
    let mut groups: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for (e, &[u, v]) in source.edges().iter().enumerate() {
        groups.entry(map.get(u)).or_default().push((e, map.get(v)));
    }
    let groups: Vec<(usize, Vec<(usize, usize)>)> = groups.into_iter().collect();
    let parts: Vec<Result<f64>> = groups
        .par_iter()
        .map(|(a, edges)| {
            let targets: Vec<usize> = edges.iter().map(|e| e.1).collect();
            let d = target_graph.distances_until(*a, &targets);
            let mut sum = 0.0;
            for &(e, b) in edges {
                if !d[b].is_finite() {
                    return Err(Error::Unreachable(b));
                }
                sum += weights[e] * d[b] * d[b];
            }
            Ok(sum)
        })
        .collect();
    let mut total = 0.0;
    for p in parts {
        total += p?;
    }
    Ok(0.25 * total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes;

    #[test]
    fn perfect_map() {
        let mesh = shapes::icosphere(4);
        let id = VertexMap::new((0..mesh.num_vertices()).collect());
        let c = geodesic_error(&id, &id, &mesh).unwrap();
        assert_eq!(c.mean, 0.0);
        assert_eq!(c.percentages[0], 100.0);
        assert_eq!(c.thresholds.len(), 26);
        assert!((c.thresholds[25] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn shifted_strip() {
        // Path along a strip with unit spacing: mapping every vertex of the
        // bottom row one step along gives error 1 each.
        let mesh = shapes::grid(10, 1, 10.0, 1.0);
        let graph = GeodesicGraph::new(&mesh, false);
        let diam = 10.0;
        let row: Vec<usize> = (0..10).collect();
        let gt = VertexMap::new(row.clone());
        let map = VertexMap::new(row.iter().map(|v| v + 1).collect());
        let c = geodesic_error_with(&map, &gt, &graph, diam, &default_thresholds()).unwrap();
        assert!((c.mean - 0.1).abs() < 1e-12);
        assert_eq!(c.percentages[9], 0.0);
        assert_eq!(c.percentages[10], 100.0);
    }

    #[test]
    fn curve_is_monotone_and_complete() {
        let errors = vec![0.3, 0.01, 0.0, 0.12, 0.05, 0.25];
        let t: Vec<f64> = (0..=30).map(|i| i as f64 / 100.0).collect();
        let c = ErrorCurve::from_errors(errors, &t);
        assert!(c.percentages.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(*c.percentages.last().unwrap(), 100.0);
        assert!((c.mean - 0.73 / 6.0).abs() < 1e-12);
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("threshold,percentage\n0.00,16.6667\n"));
    }

    #[test]
    fn ground_truth_must_cover_the_map() {
        let mesh = shapes::icosphere(2);
        let graph = GeodesicGraph::new(&mesh, false);
        let map = VertexMap::new(vec![0, 1, 2]);
        let gt = VertexMap::new(vec![0, 1]);
        assert!(matches!(
            geodesic_error_with(&map, &gt, &graph, 1.0, &default_thresholds()),
            Err(Error::MissingGroundTruth(2))
        ));
    }

    #[test]
    fn dirichlet_energy_examples() {
        let mesh = shapes::bumpy_sphere(5, 0.1);
        let graph = GeodesicGraph::new(&mesh, true);
        let n = mesh.num_vertices();
        let constant = VertexMap::new(vec![7; n]);
        assert_eq!(dirichlet_map_energy(&constant, &mesh, &graph).unwrap(), 0.0);
        let id = VertexMap::new((0..n).collect());
        let e_id = dirichlet_map_energy(&id, &mesh, &graph).unwrap();
        assert!(e_id > 0.0);
        // Collapsing one edge: brute-force sum with that edge skipped.
        let [u, v] = mesh.edges()[0];
        let mut collapsed: Vec<usize> = (0..n).collect();
        collapsed[v] = u;
        let w = cotangent_weights(&mesh).unwrap();
        let mut expected = 0.0;
        for (e, &[a, b]) in mesh.edges().iter().enumerate().skip(1) {
            let d = graph.distance(collapsed[a], collapsed[b]);
            expected += 0.25 * w[e] * d * d;
        }
        let e_c = dirichlet_map_energy(&VertexMap::new(collapsed), &mesh, &graph).unwrap();
        assert!((e_c - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn dirichlet_energy_is_relabeling_invariant() {
        let mesh = shapes::bumpy_sphere(4, 0.1);
        let n = mesh.num_vertices();
        let graph = GeodesicGraph::new(&mesh, true);
        // Relabel the target by a permutation and map through it.
        let perm: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
        let mut inv = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let relabeled = TriangleMesh::new(
            (0..n).map(|i| *mesh.vertex(inv[i])).collect(),
            mesh.faces().iter().map(|f| [perm[f[0]], perm[f[1]], perm[f[2]]]).collect(),
        )
        .unwrap();
        let graph_r = GeodesicGraph::new(&relabeled, true);
        let map: Vec<usize> = (0..n).map(|i| (i * 5) % n).collect();
        let e = dirichlet_map_energy(&VertexMap::new(map.clone()), &mesh, &graph).unwrap();
        let mapped: Vec<usize> = map.iter().map(|&t| perm[t]).collect();
        let e_r = dirichlet_map_energy(&VertexMap::new(mapped), &mesh, &graph_r).unwrap();
        assert!((e - e_r).abs() < 1e-9 * e.abs());
    }
}
