//! Shared command plumbing: output directory handling, config-file loading,
//! run metadata, and the dataset sources used by train/sweep.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context as _};
use serde::de::DeserializeOwned;
use serde::Serialize;

use red_sure::data::{assemble, generate_synthetic, load_features, load_targets, Dataset, SyntheticSpec};
use red_sure::fsutil::atomic_write;

/// Global flags shared by every subcommand.
pub struct Context {
    pub config_path: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub quiet: bool,
}

impl Context {
    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn say(&self, msg: &str) {
        if !self.quiet {
            println!("{msg}");
        }
    }

    /// Parse the config file into the command's file-config type.
    /// Unknown keys are rejected.
    pub fn load_config<T: DeserializeOwned + Default>(&self) -> anyhow::Result<T> {
        match &self.config_path {
            None => Ok(T::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config file {}", path.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing config file {}", path.display()))
            }
        }
    }
}

/// Writer for one command's output directory, with atomic writes and the
/// timestamp quarantine (`run_meta.json` is the only file with wall time).
pub struct OutputDir {
    dir: PathBuf,
    command: &'static str,
    started_ms: u128,
}

impl OutputDir {
    pub fn create(dir: PathBuf, command: &'static str) -> anyhow::Result<Self> {
        std::fs::create_dir_all(&dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(OutputDir {
            dir,
            command,
            started_ms: now_ms(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_text(&self, name: &str, contents: &str) -> anyhow::Result<()> {
        atomic_write(&self.path(name), contents.as_bytes())
            .with_context(|| format!("writing {}", self.path(name).display()))?;
        Ok(())
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    /// Echo the resolved configuration so a run is reproducible from its
    /// output directory alone.
    pub fn write_effective_config<T: Serialize>(&self, config: &T) -> anyhow::Result<()> {
        self.write_json("effective_config.json", config)
    }

    pub fn finish(&self) -> anyhow::Result<()> {
        #[derive(Serialize)]
        struct RunMeta<'a> {
            command: &'a str,
            started_unix_ms: u128,
            finished_unix_ms: u128,
        }
        self.write_json(
            "run_meta.json",
            &RunMeta {
                command: self.command,
                started_unix_ms: self.started_ms,
                finished_unix_ms: now_ms(),
            },
        )
    }
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

/// Where train/sweep get their samples: CSV files or a synthetic spec.
pub enum DataSource {
    Files { features: PathBuf, targets: PathBuf },
    Synthetic(SyntheticSpec),
}

impl DataSource {
    pub fn resolve(
        features: Option<PathBuf>,
        targets: Option<PathBuf>,
        synthetic: Option<SyntheticSpec>,
    ) -> anyhow::Result<Self> {
        match (features, targets, synthetic) {
            (Some(f), Some(t), None) => Ok(DataSource::Files {
                features: f,
                targets: t,
            }),
            (None, None, Some(spec)) => Ok(DataSource::Synthetic(spec)),
            (None, None, None) => {
                bail!("no data: pass --features/--targets or --synthetic <spec.json>")
            }
            (Some(_), None, _) | (None, Some(_), _) => {
                bail!("--features and --targets must be passed together")
            }
            _ => bail!("pass either --features/--targets or --synthetic, not both"),
        }
    }

    pub fn load(&self) -> anyhow::Result<Dataset> {
        match self {
            DataSource::Files { features, targets } => {
                let f = load_features(features)
                    .with_context(|| format!("loading features {}", features.display()))?;
                let t = load_targets(targets)
                    .with_context(|| format!("loading targets {}", targets.display()))?;
                Ok(assemble(f, t)?)
            }
            DataSource::Synthetic(spec) => Ok(generate_synthetic(spec)?.dataset),
        }
    }

    /// Noise level implied by the source, used as the default sigma.
    pub fn implied_sigma(&self) -> Option<f64> {
        match self {
            DataSource::Synthetic(spec) => Some(spec.sigma),
            DataSource::Files { .. } => None,
        }
    }
}

/// Load a synthetic spec JSON if a path was given.
pub fn load_synthetic_spec(path: &Option<PathBuf>) -> anyhow::Result<Option<SyntheticSpec>> {
    match path {
        None => Ok(None),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading synthetic spec {}", p.display()))?;
            let spec: SyntheticSpec = serde_json::from_str(&text)
                .with_context(|| format!("parsing synthetic spec {}", p.display()))?;
            Ok(Some(spec))
        }
    }
}

/// Parse a `a,b,c` float triple (split fractions).
pub fn parse_fractions(s: &str) -> anyhow::Result<(f64, f64, f64)> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        bail!("split `{s}` must be three comma-separated fractions, e.g. 0.8,0.1,0.1");
    }
    let mut vals = [0.0; 3];
    for (v, p) in vals.iter_mut().zip(&parts) {
        *v = p
            .trim()
            .parse()
            .with_context(|| format!("split fraction `{p}` is not a number"))?;
    }
    Ok((vals[0], vals[1], vals[2]))
}

/// Worker-pool size: flag, else `RED_SURE_THREADS`, else all logical cores.
pub fn resolve_threads(flag: Option<usize>) -> usize {
    flag.or_else(|| {
        std::env::var("RED_SURE_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .filter(|&n| n > 0)
    .unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    })
}

/// CSV cell for an f64: shortest representation that parses back exactly.
pub fn csv_f64(v: f64) -> String {
    format!("{v}")
}
