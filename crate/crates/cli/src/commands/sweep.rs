//! `sweep`: train one model per (lambda, seed) cell in a worker pool and
//! merge the results into a plot-ready CSV sorted by (lambda, seed).

use anyhow::Context as _;
use clap::Args;
use rayon::prelude::*;

use red_sure::analysis::{feature_entropy, weight_norm};
use red_sure::data::{split, Dataset};
use red_sure::metrics;
use red_sure::red::{denoise_rows, predict_rows, red_train, TrainConfig};

use crate::common::{csv_f64, resolve_threads, Context, OutputDir};
use crate::config::{resolve_training, ResolvedTraining, TrainFileConfig, TrainFlags};

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub flags: TrainFlags,
    /// Comma-separated lambda values
    #[arg(long)]
    pub lambdas: Option<String>,
    /// Comma-separated training seeds
    #[arg(long)]
    pub seeds: Option<String>,
    /// Worker pool size (default: RED_SURE_THREADS or all logical cores)
    #[arg(long)]
    pub threads: Option<usize>,
}

pub const SWEEP_CSV_HEADER: &str = "lambda,seed,val_rmse,val_mae,val_pcc,test_rmse,test_mae,test_pcc,head_weight_l2,feature_entropy";

struct SweepRow {
    lambda: f64,
    seed: u64,
    cells: [f64; 8],
}

fn run_cell(
    base: &ResolvedTraining,
    train: &Dataset,
    val: &Dataset,
    test: &Dataset,
    lambda: f64,
    seed: u64,
) -> anyhow::Result<SweepRow> {
    let cfg = TrainConfig {
        lambda,
        seed,
        ..base.train.clone()
    };
    let (model, _) = red_train(train, val, &cfg)?;
    let (vp, vt) = predict_rows(Some(&model.encoder), &model.head, val)?;
    let (tp, tt) = predict_rows(Some(&model.encoder), &model.head, test)?;
    let entropy = feature_entropy(&denoise_rows(&model.encoder, test)?)?;
    Ok(SweepRow {
        lambda,
        seed,
        cells: [
            metrics::rmse(&vp, &vt)?,
            metrics::mae(&vp, &vt)?,
            metrics::pcc(&vp, &vt)?,
            metrics::rmse(&tp, &tt)?,
            metrics::mae(&tp, &tt)?,
            metrics::pcc(&tp, &tt)?,
            weight_norm(&model.head),
            entropy,
        ],
    })
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> anyhow::Result<Vec<T>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<T>()
                .map_err(|_| anyhow::anyhow!("invalid {what} value `{p}`"))
        })
        .collect()
}

pub fn run(ctx: &Context, args: SweepArgs) -> anyhow::Result<()> {
    let file: TrainFileConfig = ctx.load_config()?;
    let (resolved, source) = resolve_training(ctx, &args.flags, &file)?;
    let lambdas: Vec<f64> = match &args.lambdas {
        Some(s) => parse_list(s, "lambda")?,
        None => file
            .lambdas
            .clone()
            .unwrap_or_else(|| vec![0.0, 0.1, 0.5, 1.0, 2.0, 5.0]),
    };
    let seeds: Vec<u64> = match &args.seeds {
        Some(s) => parse_list(s, "seed")?,
        None => file.seeds.clone().unwrap_or_else(|| vec![0, 1, 2]),
    };
    let threads = resolve_threads(args.threads.or(file.threads));

    let dataset = source.load()?;
    let (train, val, test) = split(&dataset, resolved.split, resolved.split_seed)?;
    ctx.say(&format!(
        "sweeping {} lambdas x {} seeds on {} workers ({} train / {} val / {} test)",
        lambdas.len(),
        seeds.len(),
        threads,
        train.len(),
        val.len(),
        test.len()
    ));

    let out = OutputDir::create(ctx.out_dir(), "sweep")?;
    #[derive(serde::Serialize)]
    struct SweepConfig<'a> {
        #[serde(flatten)]
        base: &'a ResolvedTraining,
        lambdas: &'a [f64],
        seeds: &'a [u64],
    }
    out.write_effective_config(&SweepConfig {
        base: &resolved,
        lambdas: &lambdas,
        seeds: &seeds,
    })?;

    let cells: Vec<(f64, u64)> = lambdas
        .iter()
        .flat_map(|&l| seeds.iter().map(move |&s| (l, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building worker pool")?;
    let mut rows: Vec<SweepRow> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(lambda, seed)| run_cell(&resolved, &train, &val, &test, lambda, seed))
            .collect::<anyhow::Result<Vec<_>>>()
    })?;
    // merged output is ordered by (lambda, seed), independent of completion
    rows.sort_by(|a, b| {
        a.lambda
            .partial_cmp(&b.lambda)
            .expect("finite lambdas")
            .then(a.seed.cmp(&b.seed))
    });

    let mut csv = String::from(SWEEP_CSV_HEADER);
    csv.push('\n');
    for r in &rows {
        csv.push_str(&csv_f64(r.lambda));
        csv.push_str(&format!(",{}", r.seed));
        for v in r.cells {
            csv.push(',');
            csv.push_str(&csv_f64(v));
        }
        csv.push('\n');
    }
    out.write_text("sweep.csv", &csv)?;
    out.finish()?;
    ctx.say(&format!(
        "{} cells -> {}",
        rows.len(),
        out.path("sweep.csv").display()
    ));
    Ok(())
}
