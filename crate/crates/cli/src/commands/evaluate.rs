//! `evaluate`: metrics for a model on feature/target files, through an
//! optional denoiser (`none`, `mean:k`, `median:k`, `red:checkpoint`), with
//! per-subgroup reports.

use std::path::PathBuf;

use anyhow::{bail, Context as _};
use clap::Args;
use serde::Serialize;

use red_sure::baselines::{kernel_denoise, KernelSpec};
use red_sure::checkpoint::Checkpoint;
use red_sure::data::{assemble, load_features, load_targets, Dataset, SyntheticMeta};
use red_sure::metrics::{self, MetricsReport};
use red_sure::nnkit::{DenseLayer, Mlp};

use crate::common::{csv_f64, Context, OutputDir};

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Feature CSV to evaluate on
    #[arg(long)]
    pub features: PathBuf,
    /// Target CSV to evaluate against
    #[arg(long)]
    pub targets: PathBuf,
    /// Model checkpoint providing the regression head (red or regression kind)
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Build the head from a synthetic dataset's sidecar metadata (teacher
    /// weights, zero bias) instead of a checkpoint
    #[arg(long)]
    pub head_from_teacher: Option<PathBuf>,
    /// Feature preprocessing: none | mean:k | median:k | red:<checkpoint>
    #[arg(long, default_value = "none")]
    pub denoiser: String,
    /// Restrict additional reports to samples carrying this tag (repeatable)
    #[arg(long)]
    pub subgroup: Vec<String>,
    /// Label for the split column of the CSV output
    #[arg(long, default_value = "eval")]
    pub split_label: String,
    /// pooled | per_sample
    #[arg(long, default_value = "pooled")]
    pub pcc_mode: String,
}

enum Denoiser {
    None,
    Kernel(KernelSpec),
    Red(Box<Mlp>),
}

impl Denoiser {
    fn label(&self) -> String {
        match self {
            Denoiser::None => "none".into(),
            Denoiser::Kernel(spec) => spec.to_string(),
            Denoiser::Red(_) => "red".into(),
        }
    }

    fn apply(&self, z: &[f64]) -> anyhow::Result<Vec<f64>> {
        Ok(match self {
            Denoiser::None => z.to_vec(),
            Denoiser::Kernel(spec) => kernel_denoise(z, *spec),
            Denoiser::Red(encoder) => encoder.output(z)?,
        })
    }
}

#[derive(Serialize)]
struct EvaluationReport {
    split: String,
    denoiser: String,
    pcc_mode: String,
    reports: Vec<MetricsReport>,
}

fn head_from_teacher(path: &PathBuf) -> anyhow::Result<DenseLayer> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading teacher metadata {}", path.display()))?;
    let meta: SyntheticMeta = serde_json::from_str(&text)
        .with_context(|| format!("parsing teacher metadata {}", path.display()))?;
    let k = meta.spec.feature_dim;
    let m = meta.spec.target_dim;
    let flat: Vec<f64> = meta.teacher_weight.iter().flatten().copied().collect();
    Ok(DenseLayer::from_parts(k, m, flat, vec![0.0; m])?)
}

fn resolve_model(args: &EvaluateArgs) -> anyhow::Result<(Denoiser, DenseLayer)> {
    if let Some(rest) = args.denoiser.strip_prefix("red:") {
        if args.checkpoint.is_some() || args.head_from_teacher.is_some() {
            bail!("--denoiser red:<path> is self-contained; do not pass --checkpoint or --head-from-teacher");
        }
        let ckpt = Checkpoint::load(&PathBuf::from(rest))?;
        let model = ckpt.to_red_model()?;
        return Ok((Denoiser::Red(Box::new(model.encoder)), model.head));
    }
    let denoiser = match args.denoiser.as_str() {
        "none" => Denoiser::None,
        spec @ ("mean" | "median") => {
            bail!("denoiser `{spec}` needs a window, e.g. `{spec}:3`")
        }
        other => Denoiser::Kernel(
            KernelSpec::parse(other)
                .map_err(|e| anyhow::anyhow!("unknown denoiser `{other}`: {e}"))?,
        ),
    };
    let head = match (&args.checkpoint, &args.head_from_teacher) {
        (Some(_), Some(_)) => bail!("pass either --checkpoint or --head-from-teacher, not both"),
        (Some(path), None) => Checkpoint::load(path)?.head,
        (None, Some(meta)) => head_from_teacher(meta)?,
        (None, None) => bail!(
            "a regression head is required: pass --checkpoint <model.json> or --head-from-teacher <meta.json>"
        ),
    };
    Ok((denoiser, head))
}

fn predictions(
    ds: &Dataset,
    denoiser: &Denoiser,
    head: &DenseLayer,
) -> anyhow::Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let mut preds = Vec::with_capacity(ds.len());
    let mut truths = Vec::with_capacity(ds.len());
    for s in ds.samples() {
        let denoised = denoiser.apply(&s.feature.values)?;
        preds.push(head.apply(&denoised)?);
        truths.push(s.target.values.clone());
    }
    Ok((preds, truths))
}

pub fn run(ctx: &Context, args: EvaluateArgs) -> anyhow::Result<()> {
    let (denoiser, head) = resolve_model(&args)?;
    let features = load_features(&args.features)
        .with_context(|| format!("loading features {}", args.features.display()))?;
    let targets = load_targets(&args.targets)
        .with_context(|| format!("loading targets {}", args.targets.display()))?;
    let dataset = assemble(features, targets)?;
    if dataset.feature_dim() != head.in_dim() {
        bail!(
            "feature dimension {} does not match the head's input dimension {}",
            dataset.feature_dim(),
            head.in_dim()
        );
    }

    let (preds, truths) = predictions(&dataset, &denoiser, &head)?;
    let mut global = metrics::report(&preds, &truths)?;
    if args.pcc_mode == "per_sample" {
        global.pcc = metrics::pcc_per_sample(&preds, &truths)?;
    } else if args.pcc_mode != "pooled" {
        bail!("unknown --pcc-mode `{}` (use pooled or per_sample)", args.pcc_mode);
    }
    let mut reports = vec![global];
    let tags: Vec<_> = dataset.samples().iter().map(|s| s.tags.clone()).collect();
    for tag in &args.subgroup {
        reports.push(metrics::subgroup_report(&preds, &truths, &tags, tag)?);
    }

    let out = OutputDir::create(ctx.out_dir(), "evaluate")?;
    let mut csv = String::from("split,subgroup,n,rmse,mae,pcc\n");
    for r in &reports {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            args.split_label,
            r.subgroup.as_deref().unwrap_or(""),
            r.n_samples,
            csv_f64(r.rmse),
            csv_f64(r.mae),
            csv_f64(r.pcc)
        ));
    }
    out.write_text("metrics.csv", &csv)?;
    out.write_json(
        "metrics.json",
        &EvaluationReport {
            split: args.split_label.clone(),
            denoiser: denoiser.label(),
            pcc_mode: args.pcc_mode.clone(),
            reports,
        },
    )?;
    out.finish()?;
    ctx.say(&format!("wrote {}", out.path("metrics.json").display()));
    print!("{csv}");
    Ok(())
}
