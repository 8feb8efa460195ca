//! Run configuration for `match`: flags, then an optional key=value file,
//! then defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use super::MatchArgs;
use crate::error::{Error, Result};
use crate::matching::{EnergyWeights, MatchOptions};

const KEYS: &[&str] = &[
    "source",
    "target",
    "source_landmarks",
    "target_landmarks",
    "out_dir",
    "rf",
    "wedges",
    "n_lb",
    "n_ds",
    "a_c",
    "a_p",
    "a_i",
    "k_step",
    "mode",
    "init",
    "steklov_mass",
    "distances",
    "threads",
];

/// Parsed `key = value` lines. Blank lines and `#` comments are skipped;
/// dashes in keys are read as underscores.
#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("config line {}: expected key = value", i + 1)))?;
            let key = k.trim().replace('-', "_");
            if !KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!("config line {}: unknown key '{}'", i + 1, k.trim())));
            }
            if values.insert(key, v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("config line {}: duplicate key '{}'", i + 1, k.trim())));
            }
        }
        Ok(ConfigFile { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|e| Error::Config(format!("config key {key}: cannot parse '{v}': {e}")))
            })
            .transpose()
    }
}

/// Every tunable of a `match` run.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub source: PathBuf,
    pub target: PathBuf,
    pub source_landmarks: PathBuf,
    pub target_landmarks: PathBuf,
    pub out_dir: PathBuf,
    pub options: MatchOptions,
    pub threads: Option<usize>,
    pub distances: bool,
}

fn pick<T: FromStr>(flag: Option<T>, file: &ConfigFile, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => file.get(key),
    }
}

fn required(v: Option<PathBuf>, key: &str) -> Result<PathBuf> {
    v.ok_or_else(|| Error::Config(format!("missing required setting '{key}'")))
}

impl RunConfig {
    /// Merges flags over the config file over defaults, then validates.
    /// Nothing is read besides the config file itself.
    pub fn resolve(args: &MatchArgs, threads: Option<usize>) -> Result<Self> {
        let file = match &args.config {
            Some(p) => ConfigFile::load(p).map_err(|e| match e {
                Error::Io { path, source } => {
                    Error::Config(format!("cannot read config file {}: {source}", path.display()))
                }
                other => other,
            })?,
            None => ConfigFile::default(),
        };
        let d = MatchOptions::default();
        let enum_pick = |flag: &Option<String>, key: &str| -> Result<Option<String>> {
            pick(flag.clone(), &file, key)
        };
        let options = MatchOptions {
            r_f: pick(args.rf, &file, "rf")?.unwrap_or(d.r_f),
            wedges: pick(args.wedges, &file, "wedges")?.unwrap_or(d.wedges),
            n_lb: pick(args.n_lb, &file, "n_lb")?.unwrap_or(d.n_lb),
            n_ds: pick(args.n_ds, &file, "n_ds")?.unwrap_or(d.n_ds),
            weights: EnergyWeights {
                conformal: pick(args.a_c, &file, "a_c")?.unwrap_or(d.weights.conformal),
                properness: pick(args.a_p, &file, "a_p")?.unwrap_or(d.weights.properness),
                invertibility: pick(args.a_i, &file, "a_i")?.unwrap_or(d.weights.invertibility),
            },
            k_step: pick(args.k_step, &file, "k_step")?.unwrap_or(d.k_step),
            mode: enum_pick(&args.mode, "mode")?.map(|s| s.parse()).transpose()?.unwrap_or(d.mode),
            init: enum_pick(&args.init, "init")?.map(|s| s.parse()).transpose()?.unwrap_or(d.init),
            steklov_mass: enum_pick(&args.steklov_mass, "steklov_mass")?
                .map(|s| s.parse())
                .transpose()?
                .unwrap_or(d.steklov_mass),
            spectral: d.spectral,
        };
        options.validate()?;
        let distances = args.distances || file.get::<bool>("distances")?.unwrap_or(false);
        let threads = pick(threads, &file, "threads")?;
        if threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        Ok(RunConfig {
            source: required(pick(args.source.clone(), &file, "source")?, "source")?,
            target: required(pick(args.target.clone(), &file, "target")?, "target")?,
            source_landmarks: required(
                pick(args.source_landmarks.clone(), &file, "source_landmarks")?,
                "source_landmarks",
            )?,
            target_landmarks: required(
                pick(args.target_landmarks.clone(), &file, "target_landmarks")?,
                "target_landmarks",
            )?,
            out_dir: required(pick(args.out_dir.clone(), &file, "out_dir")?, "out_dir")?,
            options,
            threads,
            distances,
        })
    }
}
