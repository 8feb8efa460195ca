//! Command-line front end: `match`, `eigs` and `eval`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 input error (I/O, bad
//! mesh, bad landmarks), 4 solver failure.

mod config;

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use config::{ConfigFile, RunConfig};

use crate::basis::{build_basis, orthogonality_report, w_gram, write_matrix_csv, write_report_csv};
use crate::error::Error;
use crate::evaluation::{dirichlet_map_energy, geodesic_error};
use crate::fem::{FemOperators, SteklovMass};
use crate::matching::{match_meshes, IterationRecord, VertexMap, GRAM_WARNING};
use crate::mesh::geodesic::GeodesicGraph;
use crate::mesh::io::{load_landmarks, load_mesh};
use crate::spectral::{SpectralOptions, SpectralSolver};
use crate::surgery::{circle_radius, cut_all, CutMesh, LandmarkSet};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "steklov-match", version, about = "Landmark-preserving shape correspondence")]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Match a source mesh onto a target mesh.
    Match(Box<MatchArgs>),
    /// Dump the spectra and basis of one mesh.
    Eigs(EigsArgs),
    /// Score a vertex map against a ground truth.
    Eval(EvalArgs),
}

#[derive(Debug, Args, Default)]
pub struct MatchArgs {
    /// key = value file; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub source: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<PathBuf>,
    #[arg(long)]
    pub source_landmarks: Option<PathBuf>,
    #[arg(long)]
    pub target_landmarks: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Circle radius as a fraction of the shortest incident edge.
    #[arg(long)]
    pub rf: Option<f64>,
    /// Wedges per incident triangle in the landmark surgery.
    #[arg(long)]
    pub wedges: Option<usize>,
    #[arg(long)]
    pub n_lb: Option<usize>,
    #[arg(long)]
    pub n_ds: Option<usize>,
    /// Conformal energy weight.
    #[arg(long)]
    pub a_c: Option<f64>,
    /// Properness energy weight.
    #[arg(long)]
    pub a_p: Option<f64>,
    /// Invertibility energy weight.
    #[arg(long)]
    pub a_i: Option<f64>,
    #[arg(long)]
    pub k_step: Option<usize>,
    /// fast | principled
    #[arg(long)]
    pub mode: Option<String>,
    /// normal-derivatives | trivial | conformal-energy
    #[arg(long)]
    pub init: Option<String>,
    /// lumped | fem
    #[arg(long)]
    pub steklov_mass: Option<String>,
    /// Add the embedding distance as a second column of the map files.
    #[arg(long)]
    pub distances: bool,
}

#[derive(Debug, Args)]
pub struct EigsArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    /// Landmarks to cut out; without them the mesh's own boundary loops are used.
    #[arg(long)]
    pub landmarks: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 120)]
    pub n_lb: usize,
    #[arg(long, default_value_t = 10)]
    pub n_ds: usize,
    #[arg(long, default_value_t = 0.5)]
    pub rf: f64,
    #[arg(long, default_value_t = 3)]
    pub wedges: usize,
    #[arg(long, default_value = "lumped")]
    pub steklov_mass: String,
    /// Skip writing the basis matrix.
    #[arg(long)]
    pub no_vectors: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub map: PathBuf,
    #[arg(long)]
    pub ground_truth: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    /// Also report the Dirichlet energy of the map (needs the source mesh).
    #[arg(long)]
    pub source: Option<PathBuf>,
    /// Error-curve CSV.
    #[arg(long)]
    pub out: PathBuf,
}

/// A library error tagged with the pipeline stage it came from.
#[derive(Debug)]
pub struct CliError {
    pub stage: &'static str,
    pub error: Error,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.stage, self.error)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        exit_code(&self.error)
    }
}

fn at(stage: &'static str) -> impl Fn(Error) -> CliError {
    move |error| CliError { stage, error }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::NotPositiveDefinite(_)
        | Error::NoConvergence(_)
        | Error::TooManyEigenpairs { .. }
        | Error::AllConstrained
        | Error::Unreachable(_) => EXIT_SOLVER,
        _ => EXIT_INPUT,
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn with_threads<T>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError>
where
    T: Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(at("config")(Error::Config("--threads must be at least 1".into())));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| at("config")(Error::Config(format!("cannot start thread pool: {e}"))))?;
    Ok(pool.install(f))
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Match(args) => {
            let cfg = RunConfig::resolve(&args, cli.threads).map_err(at("config"))?;
            with_threads(cfg.threads, || cmd_match(&cfg))?
        }
        Command::Eigs(args) => with_threads(cli.threads, || cmd_eigs(&args))?,
        Command::Eval(args) => with_threads(cli.threads, || cmd_eval(&args))?,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| at("output")(Error::io(path, e)))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let mut out = create(path)?;
    f(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| at("output")(Error::io(path, e)))
}

fn make_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| at("output")(Error::io(dir, e)))
}

pub fn write_energy_log<W: Write>(log: &[IterationRecord], mut out: W) -> std::io::Result<()> {
    writeln!(
        out,
        "iteration,g_size,ts_conformal,ts_properness,ts_invertibility,ts_total,\
         st_conformal,st_properness,st_invertibility,st_total,changed"
    )?;
    for r in log {
        let (a, b) = (&r.target_to_source, &r.source_to_target);
        writeln!(
            out,
            "{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
            r.iteration,
            r.g_size,
            a.conformal,
            a.properness,
            a.invertibility,
            a.total,
            b.conformal,
            b.properness,
            b.invertibility,
            b.total,
            r.changed
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Outputs {
    map_source_to_target: PathBuf,
    map_target_to_source: PathBuf,
    energy_log: PathBuf,
}

#[derive(Serialize)]
struct GramStatus {
    threshold: f64,
    source_max_cross_block: f64,
    target_max_cross_block: f64,
    warning: bool,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    outputs: Outputs,
    gram: GramStatus,
    circle_shifts: &'a [f64],
    iterations: usize,
    final_energy: Option<&'a IterationRecord>,
}

pub const MAP_ST_FILE: &str = "map_source_to_target.txt";
pub const MAP_TS_FILE: &str = "map_target_to_source.txt";
pub const ENERGY_FILE: &str = "energy.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

fn cmd_match(cfg: &RunConfig) -> Result<(), CliError> {
    let source = load_mesh(&cfg.source).map_err(at("load source"))?;
    let target = load_mesh(&cfg.target).map_err(at("load target"))?;
    let ls = load_landmarks(&cfg.source_landmarks).map_err(at("load source landmarks"))?;
    let lt = load_landmarks(&cfg.target_landmarks).map_err(at("load target landmarks"))?;
    log::info!(
        "source {} vertices, target {} vertices, {} landmarks",
        source.num_vertices(),
        target.num_vertices(),
        ls.len()
    );
    let res = match_meshes(&source, &ls, &target, &lt, &cfg.options).map_err(at("match"))?;
    log::info!(
        "prepare {:.2}s, init {:.2}s, refine {:.2}s",
        res.timings.prepare_secs,
        res.timings.init_secs,
        res.timings.refine_secs
    );

    make_dir(&cfg.out_dir)?;
    let outputs = Outputs {
        map_source_to_target: cfg.out_dir.join(MAP_ST_FILE),
        map_target_to_source: cfg.out_dir.join(MAP_TS_FILE),
        energy_log: cfg.out_dir.join(ENERGY_FILE),
    };
    write_with(&outputs.map_source_to_target, |o| res.map_st.write(o, cfg.distances))?;
    write_with(&outputs.map_target_to_source, |o| res.map_ts.write(o, cfg.distances))?;
    write_with(&outputs.energy_log, |o| write_energy_log(&res.log, o))?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        outputs,
        gram: GramStatus {
            threshold: GRAM_WARNING,
            source_max_cross_block: res.source_max_cross_block,
            target_max_cross_block: res.target_max_cross_block,
            warning: res.gram_warning(),
        },
        circle_shifts: &res.shifts,
        iterations: res.log.len(),
        final_energy: res.log.last(),
    };
    write_with(&cfg.out_dir.join(MANIFEST_FILE), |o| {
        serde_json::to_writer_pretty(&mut *o, &manifest)?;
        writeln!(o)
    })?;
    println!(
        "matched {} -> {} vertices; {} refinement rounds{}",
        res.map_st.len(),
        res.map_ts.len(),
        res.log.len(),
        if res.gram_warning() { "; basis orthogonality warning" } else { "" }
    );
    Ok(())
}

fn cmd_eigs(args: &EigsArgs) -> Result<(), CliError> {
    let variant: SteklovMass = args.steklov_mass.parse().map_err(at("config"))?;
    if !(args.rf > 0.0 && args.rf < 1.0) {
        return Err(at("config")(Error::Config(format!("r_f must lie in (0, 1), got {}", args.rf))));
    }
    if args.wedges == 0 {
        return Err(at("config")(Error::Config("wedge count must be at least 1".into())));
    }
    let mesh = load_mesh(&args.mesh).map_err(at("load mesh"))?;
    let cut = match &args.landmarks {
        Some(path) => {
            let lm = load_landmarks(path).map_err(at("load landmarks"))?;
            let set = LandmarkSet::new(&mesh, lm.clone()).map_err(at("landmarks"))?;
            let radii = lm
                .iter()
                .map(|&l| circle_radius(&mesh, l, &mesh, l, args.rf))
                .collect::<Result<Vec<_>, _>>()
                .map_err(at("surgery"))?;
            cut_all(&mesh, &set, &radii, args.wedges).map_err(at("surgery"))?
        }
        None => CutMesh::from_boundary(&mesh),
    };
    let ops = FemOperators::new(&cut, variant).map_err(at("assembly"))?;
    let solver = SpectralSolver::new(&ops, cut.mesh(), SpectralOptions::default()).map_err(at("factorization"))?;
    let basis = build_basis(&solver, &ops, args.n_lb, args.n_ds).map_err(at("eigensolve"))?;

    make_dir(&args.out_dir)?;
    write_with(&args.out_dir.join("laplacian.csv"), |o| {
        writeln!(o, "index,value")?;
        for (i, v) in basis.laplacian_values().iter().enumerate() {
            writeln!(o, "{i},{v:e}")?;
        }
        Ok(())
    })?;
    write_with(&args.out_dir.join("steklov.csv"), |o| {
        writeln!(o, "loop,index,value")?;
        for j in 0..basis.num_loops() {
            for (i, v) in basis.steklov_values(j).iter().enumerate() {
                writeln!(o, "{j},{i},{v:e}")?;
            }
        }
        Ok(())
    })?;
    let report = orthogonality_report(&basis, &w_gram(&basis, &ops));
    write_with(&args.out_dir.join("gram.csv"), |o| write_report_csv(&report, o))?;
    if !args.no_vectors {
        write_with(&args.out_dir.join("basis.csv"), |o| write_matrix_csv(basis.matrix(), o))?;
    }
    let head = |v: &[f64]| v.iter().take(5).map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(" ");
    println!(
        "{} vertices, {} loops; laplacian: {}",
        cut.mesh().num_vertices(),
        basis.num_loops(),
        head(basis.laplacian_values())
    );
    for j in 0..basis.num_loops() {
        println!("loop {j} steklov: {}", head(basis.steklov_values(j)));
    }
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    let map = VertexMap::load(&args.map).map_err(at("load map"))?;
    let gt = VertexMap::load(&args.ground_truth).map_err(at("load ground truth"))?;
    let target = load_mesh(&args.target).map_err(at("load target"))?;
    let curve = geodesic_error(&map, &gt, &target).map_err(at("evaluate"))?;
    write_with(&args.out, |o| curve.write_csv(o))?;
    let mut line = format!(
        "mean_error_x100={:.6} max_error={:.6} within_{:.2}={:.2}%",
        curve.mean_x100(),
        curve.max,
        curve.thresholds.last().copied().unwrap_or(0.0),
        curve.percentages.last().copied().unwrap_or(0.0)
    );
    if let Some(path) = &args.source {
        let source = load_mesh(path).map_err(at("load source"))?;
        let graph = GeodesicGraph::new(&target, true);
        let e = dirichlet_map_energy(&map, &source, &graph).map_err(at("evaluate"))?;
        line += &format!(" dirichlet_energy={e:.6e}");
    }
    println!("{line}");
    Ok(())
}
