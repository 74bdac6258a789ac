//! The executable verification suite behind the `verify` CLI command:
//! risk-estimate unbiasedness, Monte-Carlo divergence accuracy against the
//! Jacobian-trace oracle, gradient checks, weight-decay checks, entropy
//! oracles and metric references. Every check is deterministic given the
//! options and emits a JSON-ready outcome.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::analysis::{feature_entropy, noise_decay_check, residual_decay_term, DecayCheckReport};
use crate::data::{generate_synthetic, split, SyntheticSpec};
use crate::error::Result;
use crate::nnkit::{finite_diff_gradient, max_rel_err, Activation, DenseLayer, Mlp, MlpLayer, FD_STEP};
use crate::red::{red_loss_and_grads, red_train, RedModel, TrainConfig};
use crate::sure::{
    coordinate_std, exact_divergence, mc_divergence_with_std, unbiasedness_check, ProbeVariance,
    RiskEstimator, SureConfig,
};

#[derive(Debug, Clone, Serialize)]
pub struct VerifyOptions {
    /// Noise draws per unbiasedness check.
    pub trials: usize,
    /// Probes per Monte-Carlo divergence estimate.
    pub probes: usize,
    /// Noise level for the divergence accuracy checks.
    pub sigma: f64,
    pub probe_variance: ProbeVariance,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            trials: 10_000,
            probes: 100_000,
            sigma: 1.0,
            probe_variance: ProbeVariance::Unit,
            seed: 0,
        }
    }
}

/// One verification check with its numbers.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CheckOutcome {
    SureUnbiasedness {
        name: String,
        sigma: f64,
        #[serde(flatten)]
        report: crate::sure::UnbiasednessReport,
    },
    DivergenceAccuracy {
        name: String,
        exact: f64,
        estimate: f64,
        bias_factor: f64,
        rel_err: f64,
        tolerance: f64,
        pass: bool,
        note: Option<String>,
    },
    GradientCheck {
        name: String,
        max_rel_err: f64,
        tolerance: f64,
        pass: bool,
    },
    DecayCheck {
        name: String,
        #[serde(flatten)]
        report: DecayCheckReport,
        note: String,
    },
    ExactIdentity {
        name: String,
        max_abs_err: f64,
        tolerance: f64,
        pass: bool,
    },
    EntropyOracle {
        name: String,
        estimate: f64,
        expected: f64,
        tolerance: f64,
        pass: bool,
    },
}

impl CheckOutcome {
    pub fn name(&self) -> &str {
        match self {
            CheckOutcome::SureUnbiasedness { name, .. }
            | CheckOutcome::DivergenceAccuracy { name, .. }
            | CheckOutcome::GradientCheck { name, .. }
            | CheckOutcome::DecayCheck { name, .. }
            | CheckOutcome::ExactIdentity { name, .. }
            | CheckOutcome::EntropyOracle { name, .. } => name,
        }
    }

    pub fn pass(&self) -> bool {
        match self {
            CheckOutcome::SureUnbiasedness { report, .. } => report.pass,
            CheckOutcome::DivergenceAccuracy { pass, .. }
            | CheckOutcome::GradientCheck { pass, .. }
            | CheckOutcome::ExactIdentity { pass, .. }
            | CheckOutcome::EntropyOracle { pass, .. } => *pass,
            CheckOutcome::DecayCheck { report, .. } => report.pass,
        }
    }

    pub fn summary(&self) -> String {
        match self {
            CheckOutcome::SureUnbiasedness { sigma, report, .. } => format!(
                "sigma {sigma}: mean_mse {:.6} vs mean_sure {:.6} (se {:.2e}, n {})",
                report.mean_mse, report.mean_sure, report.std_err, report.n_trials
            ),
            CheckOutcome::DivergenceAccuracy {
                exact,
                estimate,
                bias_factor,
                rel_err,
                tolerance,
                ..
            } => format!(
                "exact {exact:.4} vs estimate {estimate:.4} (bias factor {bias_factor:.3}, rel err {rel_err:.4}, tol {tolerance})"
            ),
            CheckOutcome::GradientCheck {
                max_rel_err,
                tolerance,
                ..
            } => format!("max rel err {max_rel_err:.2e} (tol {tolerance})"),
            CheckOutcome::DecayCheck { report, .. } => format!(
                "empirical {:.6} vs analytic {:.6} (se {:.2e}, n {})",
                report.empirical_lhs, report.analytic_rhs, report.std_err, report.n_trials
            ),
            CheckOutcome::ExactIdentity {
                max_abs_err,
                tolerance,
                ..
            } => format!("max abs err {max_abs_err:.2e} (tol {tolerance})"),
            CheckOutcome::EntropyOracle {
                estimate,
                expected,
                tolerance,
                ..
            } => format!("estimate {estimate:.4} vs expected {expected:.4} (tol {tolerance})"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub options: VerifyOptions,
    pub checks: Vec<CheckOutcome>,
    pub warnings: Vec<String>,
    pub pass: bool,
}

// Random near-identity linear map, the shape of a linear denoiser. The
// identity part keeps the Jacobian trace at O(K), so relative-error checks
// are well conditioned.
fn linear_map(k: usize, rng: &mut ChaCha8Rng) -> Mlp {
    let mut weight: Vec<f64> = (0..k * k)
        .map(|_| rng.sample::<f64, _>(StandardNormal) / (k as f64).sqrt())
        .collect();
    for i in 0..k {
        weight[i * k + i] += 1.0;
    }
    Mlp::new(vec![MlpLayer {
        dense: DenseLayer::from_parts(k, k, weight, vec![0.0; k]).unwrap(),
        activation: Activation::Identity,
    }])
    .unwrap()
}

fn relu_mlp(k: usize, rng: &mut ChaCha8Rng) -> Mlp {
    Mlp::with_dims(&[k, k, k], &[Activation::Relu, Activation::Identity], rng).unwrap()
}

fn identity_mlp(k: usize) -> Mlp {
    Mlp::new(vec![MlpLayer {
        dense: DenseLayer::identity(k),
        activation: Activation::Identity,
    }])
    .unwrap()
}

fn zero_mlp(k: usize) -> Mlp {
    Mlp::new(vec![MlpLayer {
        dense: DenseLayer::zeros(k, k),
        activation: Activation::Identity,
    }])
    .unwrap()
}

/// A small trained encoder for divergence checks: quick run on synthetic
/// data so the Jacobian is that of a real denoiser, not a random net.
pub fn train_toy_encoder(k: usize, seed: u64) -> Result<RedModel> {
    let spec = SyntheticSpec {
        n_samples: 240,
        latent_dim: (k / 4).max(1),
        feature_dim: k,
        target_dim: 2,
        sigma: 1.0,
        target_noise: 0.1,
        seed,
    };
    let synth = generate_synthetic(&spec)?;
    let (train, val, _) = split(&synth.dataset, (0.7, 0.15, 0.15), seed)?;
    let cfg = TrainConfig {
        lambda: 1.0,
        epochs: 120,
        batch_size: 32,
        learning_rate: 3e-3,
        seed,
        hidden: Some(k / 2),
        patience: 120,
        sure: SureConfig::new(1.0)?,
    };
    Ok(red_train(&train, &val, &cfg)?.0)
}

fn sure_section(opts: &VerifyOptions, rng: &mut ChaCha8Rng) -> Result<Vec<CheckOutcome>> {
    let k = 32;
    let mut checks = Vec::new();
    let denoisers: Vec<(String, Mlp)> = vec![
        ("identity".into(), identity_mlp(k)),
        ("zero".into(), zero_mlp(k)),
        ("linear_0".into(), linear_map(k, rng)),
        ("linear_1".into(), linear_map(k, rng)),
        ("relu_0".into(), relu_mlp(k, rng)),
        ("relu_1".into(), relu_mlp(k, rng)),
    ];
    let z_star: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
    for (name, h) in &denoisers {
        for sigma in [0.5, 1.0, 2.0] {
            let report = unbiasedness_check(
                h,
                &z_star,
                sigma,
                opts.trials,
                RiskEstimator::Exact,
                1e-4,
                4.0,
                rng,
            )?;
            checks.push(CheckOutcome::SureUnbiasedness {
                name: format!("sure_exact_unbiased_{name}_sigma{sigma}"),
                sigma,
                report,
            });
        }
    }
    // Monte-Carlo estimator, value-level, at one representative setting
    let epsilon = 1e-3;
    let report = unbiasedness_check(
        &denoisers[4].1,
        &z_star,
        1.0,
        opts.trials,
        RiskEstimator::MonteCarlo,
        epsilon,
        4.0,
        rng,
    )?;
    checks.push(CheckOutcome::SureUnbiasedness {
        name: "mc_sure_unbiased_relu_0_sigma1".into(),
        sigma: 1.0,
        report,
    });
    Ok(checks)
}

fn divergence_section(opts: &VerifyOptions, rng: &mut ChaCha8Rng) -> Result<Vec<CheckOutcome>> {
    let mut checks = Vec::new();
    let tolerance = 0.05;
    let probe_std = opts.probe_variance.std(opts.sigma);
    let biased_note = match opts.probe_variance {
        ProbeVariance::Unit => None,
        ProbeVariance::SigmaSquared => Some(format!(
            "probes drawn with variance sigma^2 = {:.3}; the trace estimate scales by that factor, so this check is expected to fail when sigma != 1",
            opts.sigma * opts.sigma
        )),
    };

    // random linear maps, K = 64
    for i in 0..3 {
        let k = 64;
        let h = linear_map(k, rng);
        let z: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let exact = exact_divergence(&h, &z)?;
        let estimate = mc_divergence_with_std(&h, &z, 1e-3, opts.probes, probe_std, rng)?;
        let rel_err = (estimate - exact).abs() / exact.abs().max(1e-9);
        checks.push(CheckOutcome::DivergenceAccuracy {
            name: format!("mc_divergence_linear_{i}"),
            exact,
            estimate,
            bias_factor: estimate / exact,
            rel_err,
            tolerance,
            pass: rel_err <= tolerance,
            note: biased_note.clone(),
        });
    }

    // trained encoder at epsilon = 1e-4 * std(z)
    let model = train_toy_encoder(16, opts.seed)?;
    let z: Vec<f64> = (0..16).map(|_| rng.sample(StandardNormal)).collect();
    let epsilon = (1e-4 * coordinate_std(std::iter::once(z.as_slice()))).max(1e-6);
    let exact = exact_divergence(&model.encoder, &z)?;
    let estimate = mc_divergence_with_std(&model.encoder, &z, epsilon, opts.probes, probe_std, rng)?;
    let rel_err = (estimate - exact).abs() / exact.abs().max(1e-9);
    checks.push(CheckOutcome::DivergenceAccuracy {
        name: "mc_divergence_trained_encoder".into(),
        exact,
        estimate,
        bias_factor: estimate / exact,
        rel_err,
        tolerance,
        pass: rel_err <= tolerance,
        note: biased_note,
    });
    Ok(checks)
}

fn gradient_section(rng: &mut ChaCha8Rng) -> Result<Vec<CheckOutcome>> {
    let tolerance = 1e-4;
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let mut model = RedModel::init(8, 8, 3, SureConfig::new(1.0)?, rng)?;
        let z: Vec<f64> = (0..8).map(|_| rng.sample(StandardNormal)).collect();
        let y: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
        let probe: Vec<f64> = (0..8).map(|_| rng.sample(StandardNormal)).collect();
        let (_, _, _, enc_g, head_g) =
            red_loss_and_grads(&model.encoder, &model.head, &z, &y, 1.0, 1.0, 0.05, &probe)?;
        let mut analytic = enc_g.to_flat();
        analytic.extend_from_slice(&head_g.to_flat());
        let at = model.params_vec();
        let numeric = finite_diff_gradient(
            |p| {
                model.set_params_vec(p).expect("fixed layout");
                red_loss_and_grads(&model.encoder, &model.head, &z, &y, 1.0, 1.0, 0.05, &probe)
                    .expect("loss evaluates")
                    .0
            },
            &at,
            FD_STEP,
        );
        worst = worst.max(max_rel_err(&analytic, &numeric));
    }
    Ok(vec![CheckOutcome::GradientCheck {
        name: "full_objective_gradients_vs_finite_differences".into(),
        max_rel_err: worst,
        tolerance,
        pass: worst <= tolerance,
    }])
}

fn decay_section(opts: &VerifyOptions, rng: &mut ChaCha8Rng) -> Result<Vec<CheckOutcome>> {
    let mut checks = Vec::new();
    let note = "analytic penalty is sigma^2 * ||w||^2, the expectation-level form; \
                cross terms vanish in expectation"
        .to_string();
    let trials = opts.trials.max(1);
    let mut failures = 0usize;
    let mut last: Option<DecayCheckReport> = None;
    for _ in 0..20 {
        let k = rng.random_range(2..12usize);
        let w: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let z: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let y: f64 = rng.sample(StandardNormal);
        let sigma = rng.random_range(0.1..2.0);
        let report = noise_decay_check(&w, &z, y, sigma, trials, rng)?;
        if !report.pass {
            failures += 1;
        }
        last = Some(report);
    }
    let mut agg = last.expect("at least one run");
    agg.pass = failures == 0;
    checks.push(CheckOutcome::DecayCheck {
        name: format!("noise_decay_20_random_configs_{failures}_failures"),
        report: agg,
        note,
    });

    let mut max_abs_err: f64 = 0.0;
    for _ in 0..1000 {
        let k = rng.random_range(1..8usize);
        let w: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let e: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let direct = residual_decay_term(&w, &e)?;
        let wn: f64 = w.iter().map(|v| v * v).sum();
        let en: f64 = e.iter().map(|v| v * v).sum();
        let via_cos = if wn == 0.0 || en == 0.0 {
            0.0
        } else {
            let dot: f64 = w.iter().zip(&e).map(|(a, b)| a * b).sum();
            dot * dot / (wn * en) * en * wn
        };
        max_abs_err = max_abs_err.max((direct - via_cos).abs() / direct.abs().max(1.0));
    }
    checks.push(CheckOutcome::ExactIdentity {
        name: "residual_decay_cosine_identity_1000_pairs".into(),
        max_abs_err,
        tolerance: 1e-12,
        pass: max_abs_err <= 1e-12,
    });
    Ok(checks)
}

fn entropy_section(rng: &mut ChaCha8Rng) -> Result<Vec<CheckOutcome>> {
    let mut checks = Vec::new();
    let gaussian: Vec<Vec<f64>> = (0..10_000)
        .map(|_| vec![rng.sample::<f64, _>(StandardNormal)])
        .collect();
    let h_gauss = feature_entropy(&gaussian)?;
    let expected_gauss = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
    checks.push(CheckOutcome::EntropyOracle {
        name: "entropy_standard_gaussian_1d".into(),
        estimate: h_gauss,
        expected: expected_gauss,
        tolerance: 0.05,
        pass: (h_gauss - expected_gauss).abs() <= 0.05,
    });
    let uniform: Vec<Vec<f64>> = (0..10_000).map(|_| vec![rng.random::<f64>()]).collect();
    let h_uni = feature_entropy(&uniform)?;
    checks.push(CheckOutcome::EntropyOracle {
        name: "entropy_uniform_unit_interval".into(),
        estimate: h_uni,
        expected: 0.0,
        tolerance: 0.05,
        pass: h_uni.abs() <= 0.05,
    });
    Ok(checks)
}

/// Run the full verification suite.
pub fn run_verification(opts: &VerifyOptions) -> Result<VerifyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(7);
    let mut checks = Vec::new();
    checks.extend(sure_section(opts, &mut rng)?);
    checks.extend(divergence_section(opts, &mut rng)?);
    checks.extend(gradient_section(&mut rng)?);
    checks.extend(decay_section(opts, &mut rng)?);
    checks.extend(entropy_section(&mut rng)?);

    let mut warnings = Vec::new();
    if opts.trials < 1000 {
        warnings.push(format!(
            "underpowered: {} trials per unbiasedness check (< 1000); standard errors are wide",
            opts.trials
        ));
    }
    if opts.probes < 10_000 {
        warnings.push(format!(
            "underpowered: {} probes per divergence estimate (< 10000)",
            opts.probes
        ));
    }
    let pass = checks.iter().all(CheckOutcome::pass);
    Ok(VerifyReport {
        options: opts.clone(),
        checks,
        warnings,
        pass,
    })
}
