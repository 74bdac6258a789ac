//! Training-option resolution shared by `train` and `sweep`:
//! flags override config-file values, which override defaults.

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use red_sure::data::SyntheticSpec;
use red_sure::red::TrainConfig;
use red_sure::sure::{ProbeVariance, SureConfig};

use crate::common::{load_synthetic_spec, parse_fractions, Context, DataSource};

/// Flags controlling data, splits and the optimizer; every subcommand that
/// trains models takes these.
#[derive(Debug, Clone, Args)]
pub struct TrainFlags {
    /// Feature CSV (use together with --targets)
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Target CSV
    #[arg(long)]
    pub targets: Option<PathBuf>,
    /// Synthetic spec JSON (alternative to --features/--targets)
    #[arg(long)]
    pub synthetic: Option<PathBuf>,
    /// Train/val/test fractions
    #[arg(long)]
    pub split: Option<String>,
    /// Seed of the split shuffle
    #[arg(long)]
    pub split_seed: Option<u64>,
    /// Weight of the denoising loss
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Encoder hidden width (defaults to the feature dimension)
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Early stopping: epochs without validation improvement
    #[arg(long)]
    pub patience: Option<usize>,
    /// Feature-noise standard deviation (defaults to the synthetic spec's
    /// sigma when training on synthetic data)
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Monte-Carlo perturbation scale (default: 1e-4 x feature std per batch)
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Probes per sample per step
    #[arg(long)]
    pub probes: Option<usize>,
    #[arg(long)]
    pub probe_seed: Option<u64>,
    /// `unit` or `sigma_squared`
    #[arg(long)]
    pub probe_variance: Option<String>,
}

/// Config-file counterpart of [`TrainFlags`]; unknown keys are rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainFileConfig {
    pub features: Option<PathBuf>,
    pub targets: Option<PathBuf>,
    pub synthetic: Option<SyntheticSpec>,
    pub split: Option<String>,
    pub split_seed: Option<u64>,
    pub lambda: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub hidden: Option<usize>,
    pub patience: Option<usize>,
    pub seed: Option<u64>,
    pub sigma: Option<f64>,
    pub epsilon: Option<f64>,
    pub probes: Option<usize>,
    pub probe_seed: Option<u64>,
    pub probe_variance: Option<ProbeVariance>,
    pub lambdas: Option<Vec<f64>>,
    pub seeds: Option<Vec<u64>>,
    pub threads: Option<usize>,
}

/// Fully resolved training setup, echoed into the output directory.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedTraining {
    pub data: ResolvedData,
    pub split: (f64, f64, f64),
    pub split_seed: u64,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolvedData {
    Files { features: PathBuf, targets: PathBuf },
    Synthetic(SyntheticSpec),
}

fn parse_probe_variance(s: &str) -> anyhow::Result<ProbeVariance> {
    match s {
        "unit" => Ok(ProbeVariance::Unit),
        "sigma_squared" => Ok(ProbeVariance::SigmaSquared),
        other => anyhow::bail!("unknown probe variance `{other}` (use unit or sigma_squared)"),
    }
}

pub fn resolve_training(
    ctx: &Context,
    flags: &TrainFlags,
    file: &TrainFileConfig,
) -> anyhow::Result<(ResolvedTraining, DataSource)> {
    let synth_from_flag = load_synthetic_spec(&flags.synthetic)?;
    let source = DataSource::resolve(
        flags.features.clone().or_else(|| file.features.clone()),
        flags.targets.clone().or_else(|| file.targets.clone()),
        synth_from_flag.or_else(|| file.synthetic.clone()),
    )?;

    let split_str = flags
        .split
        .clone()
        .or_else(|| file.split.clone())
        .unwrap_or_else(|| "0.8,0.1,0.1".to_string());
    let split = parse_fractions(&split_str)?;
    let split_seed = flags.split_seed.or(file.split_seed).unwrap_or(0);

    let sigma = flags
        .sigma
        .or(file.sigma)
        .or_else(|| source.implied_sigma())
        .ok_or_else(|| {
            anyhow::anyhow!("--sigma is required when training on real feature files")
        })?;

    let probe_variance = match &flags.probe_variance {
        Some(s) => parse_probe_variance(s)?,
        None => file.probe_variance.unwrap_or(ProbeVariance::Unit),
    };
    let sure = SureConfig {
        sigma,
        epsilon: flags.epsilon.or(file.epsilon),
        probes_per_sample: flags.probes.or(file.probes).unwrap_or(1),
        probe_seed: flags.probe_seed.or(file.probe_seed).unwrap_or(0),
        probe_variance,
    };

    let mut train = TrainConfig::new(sigma)?;
    train.lambda = flags.lambda.or(file.lambda).unwrap_or(1.0);
    train.epochs = flags.epochs.or(file.epochs).unwrap_or(1000);
    train.batch_size = flags.batch_size.or(file.batch_size).unwrap_or(32);
    train.learning_rate = flags.learning_rate.or(file.learning_rate).unwrap_or(1e-3);
    train.seed = ctx.seed.or(file.seed).unwrap_or(0);
    train.hidden = flags.hidden.or(file.hidden);
    train.patience = flags.patience.or(file.patience).unwrap_or(50);
    train.sure = sure;
    train.validate()?;

    let data = match &source {
        DataSource::Files { features, targets } => ResolvedData::Files {
            features: features.clone(),
            targets: targets.clone(),
        },
        DataSource::Synthetic(spec) => ResolvedData::Synthetic(spec.clone()),
    };
    Ok((
        ResolvedTraining {
            data,
            split,
            split_seed,
            train,
        },
        source,
    ))
}
