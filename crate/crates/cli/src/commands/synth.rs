//! `synth`: generate a synthetic dataset and dump it as CSV files plus the
//! JSON sidecar with the generating spec, teacher weights and latent lift.

use clap::Args;
use serde::Deserialize;

use red_sure::data::{generate_synthetic, write_features, write_targets, SyntheticSpec, TargetRecord};

use crate::common::{Context, OutputDir};

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n_samples: Option<usize>,
    #[arg(long)]
    pub latent_dim: Option<usize>,
    #[arg(long)]
    pub feature_dim: Option<usize>,
    #[arg(long)]
    pub target_dim: Option<usize>,
    /// Feature-noise standard deviation
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Target-noise standard deviation
    #[arg(long)]
    pub target_noise: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthFileConfig {
    pub n_samples: Option<usize>,
    pub latent_dim: Option<usize>,
    pub feature_dim: Option<usize>,
    pub target_dim: Option<usize>,
    pub sigma: Option<f64>,
    pub target_noise: Option<f64>,
    pub seed: Option<u64>,
}

pub fn run(ctx: &Context, args: SynthArgs) -> anyhow::Result<()> {
    let file: SynthFileConfig = ctx.load_config()?;
    let spec = SyntheticSpec {
        n_samples: args.n_samples.or(file.n_samples).unwrap_or(1000),
        latent_dim: args.latent_dim.or(file.latent_dim).unwrap_or(8),
        feature_dim: args.feature_dim.or(file.feature_dim).unwrap_or(64),
        target_dim: args.target_dim.or(file.target_dim).unwrap_or(8),
        sigma: args.sigma.or(file.sigma).unwrap_or(1.0),
        target_noise: args.target_noise.or(file.target_noise).unwrap_or(0.1),
        seed: ctx.seed.or(file.seed).unwrap_or(0),
    };
    let synth = generate_synthetic(&spec)?;
    let out = OutputDir::create(ctx.out_dir(), "synth")?;
    out.write_effective_config(&spec)?;

    let features: Vec<_> = synth.dataset.samples().iter().map(|s| s.feature.clone()).collect();
    write_features(&out.path("features.csv"), &features)?;
    let clean: Vec<_> = synth
        .dataset
        .samples()
        .iter()
        .filter_map(|s| s.clean_feature.clone())
        .collect();
    write_features(&out.path("clean_features.csv"), &clean)?;
    let targets: Vec<TargetRecord> = synth
        .dataset
        .samples()
        .iter()
        .map(|s| TargetRecord {
            target: s.target.clone(),
            tags: s.tags.clone(),
        })
        .collect();
    write_targets(&out.path("targets.csv"), &targets)?;
    out.write_json("meta.json", &synth.meta)?;
    out.finish()?;
    ctx.say(&format!(
        "wrote {} samples (K={}, M={}, sigma={}) under {}",
        spec.n_samples,
        spec.feature_dim,
        spec.target_dim,
        spec.sigma,
        out.path("").display()
    ));
    Ok(())
}
