//! Landmark-preserving correspondence between two meshes.
//!
//! The source mesh is mapped onto the target: every source vertex receives a
//! target vertex, and source landmark `i` lands exactly on target landmark
//! `i`. The reverse map is produced alongside.

pub mod energy;
pub mod fmap;
pub mod init;
pub mod nn;
pub mod refine;

use std::io::{BufRead, Write};
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

pub use energy::{EnergyTerms, EnergyWeights};
pub use fmap::{BlockFunctionalMap, Direction};
pub use init::InitStrategy;
pub use refine::{IterationRecord, NnMode};

use crate::basis::{build_basis, max_cross_block, orthogonality_report, w_gram, BlockPairStat, SpectralBasis};
use crate::error::{Error, Result};
use crate::fem::{FemOperators, SteklovMass};
use crate::mesh::{normalize_area, TriangleMesh};
use crate::spectral::{SpectralOptions, SpectralSolver};
use crate::surgery::{circle_radius, cut_all, CutMesh, LandmarkSet};

/// Cross-block W-inner products above this trigger a warning.
pub const GRAM_WARNING: f64 = 0.2;

#[derive(Debug, Clone, Serialize)]
pub struct MatchOptions {
    /// Circle radius as a fraction of the shortest incident edge.
    pub r_f: f64,
    /// Wedges per incident triangle during surgery.
    pub wedges: usize,
    pub n_lb: usize,
    pub n_ds: usize,
    pub weights: EnergyWeights,
    pub k_step: usize,
    pub mode: NnMode,
    pub init: InitStrategy,
    pub steklov_mass: SteklovMass,
    #[serde(skip)]
    pub spectral: SpectralOptions,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions {
            r_f: 0.5,
            wedges: 3,
            n_lb: 120,
            n_ds: 10,
            weights: EnergyWeights::default(),
            k_step: 10,
            mode: NnMode::Fast,
            init: InitStrategy::NormalDerivatives,
            steklov_mass: SteklovMass::Lumped,
            spectral: SpectralOptions::default(),
        }
    }
}

impl MatchOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_f > 0.0 && self.r_f < 1.0) {
            return Err(Error::Config(format!("r_f must lie in (0, 1), got {}", self.r_f)));
        }
        if self.wedges == 0 {
            return Err(Error::Config("wedge count must be at least 1".into()));
        }
        if self.n_ds == 0 {
            return Err(Error::Config("n_ds must be at least 1".into()));
        }
        if self.k_step == 0 {
            return Err(Error::Config("k_step must be at least 1".into()));
        }
        self.weights.validate()
    }
}

/// Per-vertex correspondence: entry `v` is the image of source vertex `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexMap {
    targets: Vec<usize>,
    distances: Option<Vec<f64>>,
}

impl VertexMap {
    pub fn new(targets: Vec<usize>) -> Self {
        VertexMap { targets, distances: None }
    }

    pub fn with_distances(targets: Vec<usize>, distances: Vec<f64>) -> Self {
        assert_eq!(targets.len(), distances.len());
        VertexMap {
            targets,
            distances: Some(distances),
        }
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn distances(&self) -> Option<&[f64]> {
        self.distances.as_deref()
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn get(&self, v: usize) -> usize {
        self.targets[v]
    }

    /// Fraction of vertices mapped to the vertex with the same index.
    pub fn identity_fraction(&self) -> f64 {
        if self.targets.is_empty() {
            return 1.0;
        }
        self.targets.iter().enumerate().filter(|(i, &t)| *i == t).count() as f64 / self.targets.len() as f64
    }

    /// One line per source vertex: the target index, optionally followed by
    /// the embedding distance.
    pub fn write<W: Write>(&self, mut out: W, with_distances: bool) -> std::io::Result<()> {
        for (v, t) in self.targets.iter().enumerate() {
            match (&self.distances, with_distances) {
                (Some(d), true) => writeln!(out, "{t} {:e}", d[v])?,
                _ => writeln!(out, "{t}")?,
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>, with_distances: bool) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write(&mut w, with_distances)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn parse<R: BufRead>(input: R) -> Result<Self> {
        let mut targets = Vec::new();
        let mut distances = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::parse(i + 1, e.to_string()))?;
            let mut tok = line.split_whitespace();
            let Some(t) = tok.next() else { continue };
            targets.push(t.parse::<usize>().map_err(|e| Error::parse(i + 1, e.to_string()))?);
            if let Some(d) = tok.next() {
                distances.push(d.parse::<f64>().map_err(|e| Error::parse(i + 1, e.to_string()))?);
            }
        }
        let distances = (!distances.is_empty() && distances.len() == targets.len()).then_some(distances);
        Ok(VertexMap { targets, distances })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(std::io::BufReader::new(file))
    }
}

/// Completes a map on original vertices: every non-landmark entry must be
/// present; landmark `i` of the source is pinned to landmark `i` of the
/// target.
pub fn reinsert_landmarks(
    partial: &[Option<(usize, f64)>],
    source_landmarks: &[usize],
    target_landmarks: &[usize],
) -> Result<VertexMap> {
    if source_landmarks.len() != target_landmarks.len() {
        return Err(Error::Config("landmark lists differ in length".into()));
    }
    let mut entries = partial.to_vec();
    for (&s, &t) in source_landmarks.iter().zip(target_landmarks) {
        if s >= entries.len() {
            return Err(Error::InvalidLandmark(format!("source landmark {s} out of range")));
        }
        entries[s] = Some((t, 0.0));
    }
    let mut targets = Vec::with_capacity(entries.len());
    let mut distances = Vec::with_capacity(entries.len());
    for (v, e) in entries.into_iter().enumerate() {
        let (t, d) = e.ok_or_else(|| Error::DimensionMismatch(format!("source vertex {v} has no image")))?;
        targets.push(t);
        distances.push(d);
    }
    Ok(VertexMap::with_distances(targets, distances))
}

/// Everything computed for one shape before matching.
pub struct PreparedShape {
    /// Input mesh scaled to unit area.
    pub mesh: TriangleMesh,
    pub landmarks: Vec<usize>,
    pub cut: CutMesh,
    pub ops: FemOperators,
    pub basis: SpectralBasis,
    pub loops: Vec<init::LoopData>,
    pub gram_report: Vec<BlockPairStat>,
}

impl PreparedShape {
    pub fn max_cross_block(&self) -> f64 {
        max_cross_block(&self.gram_report)
    }
}

fn prepare_shape(mesh: TriangleMesh, landmarks: &LandmarkSet, radii: &[f64], opts: &MatchOptions) -> Result<PreparedShape> {
    let cut = cut_all(&mesh, landmarks, radii, opts.wedges)?;
    let ops = FemOperators::new(&cut, opts.steklov_mass)?;
    let solver = SpectralSolver::new(&ops, cut.mesh(), opts.spectral.clone())?;
    let basis = build_basis(&solver, &ops, opts.n_lb, opts.n_ds)?;
    let loops = init::loop_data(&cut, &ops, &solver, &basis)?;
    let gram_report = orthogonality_report(&basis, &w_gram(&basis, &ops));
    Ok(PreparedShape {
        mesh,
        landmarks: landmarks.indices().to_vec(),
        cut,
        ops,
        basis,
        loops,
        gram_report,
    })
}

/// Normalizes both meshes to unit area, cuts the landmark disks and builds
/// the bases.
pub fn prepare_pair(
    source: &TriangleMesh,
    source_landmarks: &[usize],
    target: &TriangleMesh,
    target_landmarks: &[usize],
    opts: &MatchOptions,
) -> Result<(PreparedShape, PreparedShape)> {
    opts.validate()?;
    if source_landmarks.len() != target_landmarks.len() {
        return Err(Error::Config(format!(
            "mismatched landmark counts: {} on the source, {} on the target",
            source_landmarks.len(),
            target_landmarks.len()
        )));
    }
    if source_landmarks.is_empty() {
        return Err(Error::Config("matching needs at least one landmark".into()));
    }
    let source = normalize_area(source)?;
    let target = normalize_area(target)?;
    let ls = LandmarkSet::new(&source, source_landmarks.to_vec())?;
    let lt = LandmarkSet::new(&target, target_landmarks.to_vec())?;
    let radii = source_landmarks
        .iter()
        .zip(target_landmarks)
        .map(|(&a, &b)| circle_radius(&source, a, &target, b, opts.r_f))
        .collect::<Result<Vec<_>>>()?;
    let (s, t) = rayon::join(
        || prepare_shape(source, &ls, &radii, opts),
        || prepare_shape(target, &lt, &radii, opts),
    );
    Ok((s?, t?))
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings {
    pub prepare_secs: f64,
    pub init_secs: f64,
    pub refine_secs: f64,
}

pub struct MatchResult {
    /// Source vertex -> target vertex, on the original meshes.
    pub map_st: VertexMap,
    pub map_ts: VertexMap,
    pub f_ts: BlockFunctionalMap,
    pub f_st: BlockFunctionalMap,
    /// Circle rotation chosen for each landmark.
    pub shifts: Vec<f64>,
    pub log: Vec<IterationRecord>,
    pub timings: Timings,
    pub source_max_cross_block: f64,
    pub target_max_cross_block: f64,
}

impl MatchResult {
    pub fn gram_warning(&self) -> bool {
        self.source_max_cross_block > GRAM_WARNING || self.target_max_cross_block > GRAM_WARNING
    }
}

fn to_original(
    from: &PreparedShape,
    to: &PreparedShape,
    rows: &[usize],
    matched: &[(usize, f64)],
) -> Vec<Option<(usize, f64)>> {
    let mut out = vec![None; from.cut.num_original_vertices()];
    for (&r, &(t, d)) in rows.iter().zip(matched) {
        let v = from.cut.original_of(r).expect("final rows are original vertices");
        let w = to.cut.original_of(t).expect("final rows are original vertices");
        out[v] = Some((w, d));
    }
    out
}

/// Matches two prepared shapes.
pub fn match_prepared(source: &PreparedShape, target: &PreparedShape, opts: &MatchOptions) -> Result<MatchResult> {
    opts.validate()?;
    for (name, s) in [("source", source), ("target", target)] {
        let m = s.max_cross_block();
        if m > GRAM_WARNING {
            log::warn!("{name} basis is far from W-orthonormal: max cross-block inner product {m:.3}");
        }
    }
    let start = Instant::now();
    let guess = init::initial_fmap(&source.loops, &target.loops, opts.init)?;
    let init_secs = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let rows_s = source.cut.original_vertices();
    let rows_t = target.cut.original_vertices();
    let refined = refine::refine(
        &refine::Side {
            basis: &source.basis,
            stiffness: &source.ops.stiffness,
            final_rows: &rows_s,
        },
        &refine::Side {
            basis: &target.basis,
            stiffness: &target.ops.stiffness,
            final_rows: &rows_t,
        },
        guess.f_ts,
        guess.f_st,
        &refine::RefineOptions {
            k_step: opts.k_step,
            target_g: opts.n_lb,
            mode: opts.mode,
            weights: opts.weights,
        },
    )?;
    let refine_secs = start.elapsed().as_secs_f64();

    let map_st = reinsert_landmarks(
        &to_original(source, target, &rows_s, &refined.final_st),
        &source.landmarks,
        &target.landmarks,
    )?;
    let map_ts = reinsert_landmarks(
        &to_original(target, source, &rows_t, &refined.final_ts),
        &target.landmarks,
        &source.landmarks,
    )?;
    Ok(MatchResult {
        map_st,
        map_ts,
        f_ts: refined.f_ts,
        f_st: refined.f_st,
        shifts: guess.shifts,
        log: refined.log,
        timings: Timings {
            prepare_secs: 0.0,
            init_secs,
            refine_secs,
        },
        source_max_cross_block: source.max_cross_block(),
        target_max_cross_block: target.max_cross_block(),
    })
}

/// Full pipeline on two meshes with corresponding landmark lists.
pub fn match_meshes(
    source: &TriangleMesh,
    source_landmarks: &[usize],
    target: &TriangleMesh,
    target_landmarks: &[usize],
    opts: &MatchOptions,
) -> Result<MatchResult> {
    let start = Instant::now();
    let (s, t) = prepare_pair(source, source_landmarks, target, target_landmarks, opts)?;
    let prepare_secs = start.elapsed().as_secs_f64();
    let mut res = match_prepared(&s, &t, opts)?;
    res.timings.prepare_secs = prepare_secs;
    Ok(res)
}
