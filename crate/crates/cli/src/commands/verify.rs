//! `verify`: run the verification suites and write a JSON report. Exit code
//! is nonzero when any check fails; the report is written either way.

use clap::Args;

use red_sure::sure::ProbeVariance;
use red_sure::verify::{run_verification, VerifyOptions};

use crate::common::{Context, OutputDir};

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Noise draws per unbiasedness check
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    /// Probes per divergence estimate
    #[arg(long, default_value_t = 100_000)]
    pub probes: usize,
    /// Noise level for the divergence checks
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// `unit` or `sigma_squared` (the latter reproduces the biased variant
    /// and is expected to fail when sigma != 1)
    #[arg(long, default_value = "unit")]
    pub probe_variance: String,
}

pub fn run(ctx: &Context, args: VerifyArgs) -> anyhow::Result<()> {
    let probe_variance = match args.probe_variance.as_str() {
        "unit" => ProbeVariance::Unit,
        "sigma_squared" => ProbeVariance::SigmaSquared,
        other => anyhow::bail!("unknown probe variance `{other}` (use unit or sigma_squared)"),
    };
    let opts = VerifyOptions {
        trials: args.trials,
        probes: args.probes,
        sigma: args.sigma,
        probe_variance,
        seed: ctx.seed.unwrap_or(0),
    };
    let report = run_verification(&opts)?;

    let out = OutputDir::create(ctx.out_dir(), "verify")?;
    out.write_json("verify_report.json", &report)?;
    out.finish()?;

    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for c in &report.checks {
        println!(
            "[{}] {}: {}",
            if c.pass() { "ok" } else { "FAIL" },
            c.name(),
            c.summary()
        );
    }
    let failed = report.checks.iter().filter(|c| !c.pass()).count();
    ctx.say(&format!(
        "{} of {} checks passed -> {}",
        report.checks.len() - failed,
        report.checks.len(),
        out.path("verify_report.json").display()
    ));
    if !report.pass {
        anyhow::bail!("verification failed: {failed} check(s) did not pass");
    }
    Ok(())
}
