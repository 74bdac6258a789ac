//! `train`: fit the pipeline, write checkpoint, per-epoch log and final
//! train/val metrics.

use clap::Args;

use red_sure::checkpoint::Checkpoint;
use red_sure::data::split;
use red_sure::metrics;
use red_sure::red::{predict_rows, red_train};

use crate::common::{Context, OutputDir};
use crate::config::{resolve_training, TrainFileConfig, TrainFlags};

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub flags: TrainFlags,
}

pub fn run(ctx: &Context, args: TrainArgs) -> anyhow::Result<()> {
    let file: TrainFileConfig = ctx.load_config()?;
    let (resolved, source) = resolve_training(ctx, &args.flags, &file)?;
    let dataset = source.load()?;
    let (train, val, test) = split(&dataset, resolved.split, resolved.split_seed)?;
    ctx.say(&format!(
        "training on {} samples (val {}, test {} held out), K={}, M={}, lambda={}",
        train.len(),
        val.len(),
        test.len(),
        train.feature_dim(),
        train.target_dim(),
        resolved.train.lambda
    ));

    let out = OutputDir::create(ctx.out_dir(), "train")?;
    out.write_effective_config(&resolved)?;

    let (model, log) = red_train(&train, &val, &resolved.train)?;
    out.write_text("training_log.csv", &log.to_csv_string())?;
    Checkpoint::from_red_model(&model, resolved.train.lambda, resolved.train.seed, None)
        .save(&out.path("checkpoint.json"))?;

    let (train_preds, train_truth) = predict_rows(Some(&model.encoder), &model.head, &train)?;
    out.write_json("metrics_train.json", &metrics::report(&train_preds, &train_truth)?)?;
    let (val_preds, val_truth) = predict_rows(Some(&model.encoder), &model.head, &val)?;
    let val_report = metrics::report(&val_preds, &val_truth)?;
    out.write_json("metrics_val.json", &val_report)?;
    out.finish()?;

    ctx.say(&format!(
        "best epoch {}: val rmse {:.6}, mae {:.6}, pcc {:.4} -> {}",
        log.best_epoch,
        val_report.rmse,
        val_report.mae,
        val_report.pcc,
        out.path("checkpoint.json").display()
    ));
    Ok(())
}
