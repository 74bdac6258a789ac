//! `denoise`: run features through a trained encoder and dump the result in
//! the feature CSV format.

use std::path::PathBuf;

use anyhow::Context as _;
use clap::Args;

use red_sure::checkpoint::Checkpoint;
use red_sure::data::{load_features, write_features, FeatureVector};

use crate::common::{Context, OutputDir};

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    /// Trained model checkpoint (must contain an encoder)
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Feature CSV to denoise
    #[arg(long)]
    pub features: PathBuf,
    /// Output CSV name inside the output directory
    #[arg(long, default_value = "denoised_features.csv")]
    pub out_file: String,
}

pub fn run(ctx: &Context, args: DenoiseArgs) -> anyhow::Result<()> {
    let model = Checkpoint::load(&args.checkpoint)?.to_red_model()?;
    let features = load_features(&args.features)
        .with_context(|| format!("loading features {}", args.features.display()))?;
    let denoised: Vec<FeatureVector> = features
        .iter()
        .map(|f| {
            Ok(FeatureVector {
                id: f.id.clone(),
                values: model.denoise(&f.values)?,
            })
        })
        .collect::<red_sure::Result<_>>()?;
    let out = OutputDir::create(ctx.out_dir(), "denoise")?;
    write_features(&out.path(&args.out_file), &denoised)?;
    out.finish()?;
    ctx.say(&format!(
        "denoised {} feature vectors -> {}",
        denoised.len(),
        out.path(&args.out_file).display()
    ));
    Ok(())
}
