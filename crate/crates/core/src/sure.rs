//! Unbiased risk estimation for a denoiser under additive Gaussian noise:
//! the clean-signal MSE oracle, the exact risk estimate built from the
//! Jacobian trace, its Monte-Carlo approximation with random probes, and the
//! trainable Monte-Carlo loss with gradients through both forward passes.
//!
//! Conventions, applied everywhere:
//! - divergence means the *un-normalized* Jacobian trace; callers divide by K
//! - probes default to unit variance. Drawing probes with variance sigma^2
//!   instead scales the trace estimate by sigma^2; the option exists
//!   ([`ProbeVariance::SigmaSquared`]) precisely so that bias can be measured.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nnkit::{Mlp, MlpGrads};

/// Variance convention for Monte-Carlo probe vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeVariance {
    /// Unit-variance probes; the trace estimate is unbiased.
    Unit,
    /// Probes with variance sigma^2; the trace estimate scales by sigma^2.
    SigmaSquared,
}

impl ProbeVariance {
    pub fn std(self, sigma: f64) -> f64 {
        match self {
            ProbeVariance::Unit => 1.0,
            ProbeVariance::SigmaSquared => sigma,
        }
    }
}

/// Scale factor for the data-driven perturbation size.
pub const EPSILON_SCALE: f64 = 1e-4;
/// Floor for the data-driven perturbation size.
pub const EPSILON_FLOOR: f64 = 1e-6;

/// Settings for the Monte-Carlo risk estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SureConfig {
    /// Noise standard deviation assumed for the features.
    pub sigma: f64,
    /// Perturbation scale; `None` selects 1e-4 times the standard deviation
    /// of the feature coordinates at hand, floored at 1e-6.
    pub epsilon: Option<f64>,
    /// Probes averaged per sample per evaluation (1 during training).
    pub probes_per_sample: usize,
    /// Seed of the probe stream, independent of the run seed.
    pub probe_seed: u64,
    pub probe_variance: ProbeVariance,
}

impl SureConfig {
    pub fn new(sigma: f64) -> Result<Self> {
        let cfg = SureConfig {
            sigma,
            epsilon: None,
            probes_per_sample: 1,
            probe_seed: 0,
            probe_variance: ProbeVariance::Unit,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return Err(Error::Config(format!(
                "sure sigma must be finite and >= 0, got {}",
                self.sigma
            )));
        }
        if let Some(e) = self.epsilon {
            if !e.is_finite() || e <= 0.0 {
                return Err(Error::Config(format!("sure epsilon must be > 0, got {e}")));
            }
        }
        if self.probes_per_sample == 0 {
            return Err(Error::Config("probes_per_sample must be >= 1".into()));
        }
        Ok(())
    }

    /// Resolve the perturbation scale against the data scale at hand.
    pub fn epsilon_for(&self, coord_std: f64) -> f64 {
        self.epsilon
            .unwrap_or_else(|| (EPSILON_SCALE * coord_std).max(EPSILON_FLOOR))
    }
}

/// Population standard deviation of all coordinates pooled.
pub fn coordinate_std<'a, I>(vectors: I) -> f64
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut n = 0usize;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for v in vectors {
        for &x in v {
            n += 1;
            sum += x;
            sum_sq += x * x;
        }
    }
    if n == 0 {
        return 0.0;
    }
    let mean = sum / n as f64;
    (sum_sq / n as f64 - mean * mean).max(0.0).sqrt()
}

/// Mean squared error against the clean signal: `||z* - z_hat||^2 / K`.
pub fn mse_oracle(z_hat: &[f64], z_star: &[f64]) -> Result<f64> {
    if z_hat.len() != z_star.len() {
        return Err(Error::shape("mse_oracle dims", z_star.len(), z_hat.len()));
    }
    let k = z_star.len() as f64;
    Ok(z_hat
        .iter()
        .zip(z_star)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / k)
}

fn require_square(h: &Mlp, z: &[f64]) -> Result<()> {
    let in_dim = h.input_dim().unwrap_or(z.len());
    let out_dim = h.output_dim().unwrap_or(z.len());
    if in_dim != out_dim {
        return Err(Error::shape("denoiser output dim", in_dim, out_dim));
    }
    if z.len() != in_dim {
        return Err(Error::shape("denoiser input", in_dim, z.len()));
    }
    Ok(())
}

/// Exact Jacobian trace of `h` at `z` via one reverse-mode pass per output
/// coordinate. This is the oracle the Monte-Carlo estimate is checked against.
pub fn exact_divergence(h: &Mlp, z: &[f64]) -> Result<f64> {
    require_square(h, z)?;
    let cache = h.forward(z)?;
    let k = z.len();
    let mut basis = vec![0.0; k];
    let mut trace = 0.0;
    for i in 0..k {
        basis[i] = 1.0;
        let row = h.input_gradient(&cache, &basis)?;
        trace += row[i];
        basis[i] = 0.0;
    }
    Ok(trace)
}

/// Exact risk estimate from noisy data alone:
/// `||z - h(z)||^2 / K - sigma^2 + (2 sigma^2 / K) * divergence`,
/// where `divergence` is the Jacobian trace of `h` at `z`.
pub fn sure_exact(h: &Mlp, z: &[f64], sigma: f64, divergence: f64) -> Result<f64> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::Config(format!("sigma must be >= 0, got {sigma}")));
    }
    require_square(h, z)?;
    let out = h.output(z)?;
    let k = z.len() as f64;
    let residual: f64 = z.iter().zip(&out).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(residual / k - sigma * sigma + 2.0 * sigma * sigma / k * divergence)
}

/// Monte-Carlo estimate of the Jacobian trace with unit-variance probes:
/// the average over probes of `b^T (h(z + eps*b) - h(z)) / eps`.
pub fn mc_divergence<R: Rng + ?Sized>(
    h: &Mlp,
    z: &[f64],
    epsilon: f64,
    n_probes: usize,
    rng: &mut R,
) -> Result<f64> {
    mc_divergence_with_std(h, z, epsilon, n_probes, 1.0, rng)
}

/// Monte-Carlo trace estimate with probes of the given standard deviation.
/// With `probe_std != 1` the expectation scales by `probe_std^2`.
pub fn mc_divergence_with_std<R: Rng + ?Sized>(
    h: &Mlp,
    z: &[f64],
    epsilon: f64,
    n_probes: usize,
    probe_std: f64,
    rng: &mut R,
) -> Result<f64> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::Config(format!("epsilon must be > 0, got {epsilon}")));
    }
    if n_probes == 0 {
        return Err(Error::Config("n_probes must be >= 1".into()));
    }
    require_square(h, z)?;
    let k = z.len();
    let base = h.output(z)?;
    let mut acc = 0.0;
    let mut perturbed = vec![0.0; k];
    for _ in 0..n_probes {
        let probe: Vec<f64> = (0..k)
            .map(|_| probe_std * rng.sample::<f64, _>(StandardNormal))
            .collect();
        for i in 0..k {
            perturbed[i] = z[i] + epsilon * probe[i];
        }
        let shifted = h.output(&perturbed)?;
        let dot: f64 = probe
            .iter()
            .zip(shifted.iter().zip(&base))
            .map(|(b, (s, o))| b * (s - o))
            .sum();
        acc += dot / epsilon;
    }
    Ok(acc / n_probes as f64)
}

/// Monte-Carlo risk value for one probe:
/// `||z - h(z)||^2 / K - sigma^2 + (2 sigma^2 / (eps K)) * b^T (h(z+eps b) - h(z))`.
pub fn mc_sure_value(h: &Mlp, z: &[f64], sigma: f64, epsilon: f64, probe: &[f64]) -> Result<f64> {
    let (loss, _) = mc_sure_loss_with_probe(h, z, sigma, epsilon, probe)?;
    Ok(loss)
}

/// Monte-Carlo risk and its gradient with respect to the denoiser parameters
/// for a fixed probe. The gradient flows through both `h(z)` and `h(z+eps b)`.
pub fn mc_sure_loss_with_probe(
    h: &Mlp,
    z: &[f64],
    sigma: f64,
    epsilon: f64,
    probe: &[f64],
) -> Result<(f64, MlpGrads)> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::Config(format!("sigma must be >= 0, got {sigma}")));
    }
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::Config(format!("epsilon must be > 0, got {epsilon}")));
    }
    require_square(h, z)?;
    let k = z.len();
    if probe.len() != k {
        return Err(Error::shape("probe dim", k, probe.len()));
    }
    let kf = k as f64;

    let cache_base = h.forward(z)?;
    let perturbed: Vec<f64> = z.iter().zip(probe).map(|(v, b)| v + epsilon * b).collect();
    let cache_shift = h.forward(&perturbed)?;

    let residual: f64 = z
        .iter()
        .zip(&cache_base.output)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let dot: f64 = probe
        .iter()
        .zip(cache_shift.output.iter().zip(&cache_base.output))
        .map(|(b, (s, o))| b * (s - o))
        .sum();
    let coeff = 2.0 * sigma * sigma / (epsilon * kf);
    let loss = residual / kf - sigma * sigma + coeff * dot;

    // d/d h(z): reconstruction term plus -coeff * b; d/d h(z+eps b): coeff * b.
    let grad_base: Vec<f64> = cache_base
        .output
        .iter()
        .zip(z)
        .zip(probe)
        .map(|((hz, v), b)| 2.0 / kf * (hz - v) - coeff * b)
        .collect();
    let grad_shift: Vec<f64> = probe.iter().map(|b| coeff * b).collect();

    let (mut grads, _) = h.backward(&cache_base, &grad_base)?;
    let (grads_shift, _) = h.backward(&cache_shift, &grad_shift)?;
    grads.add_scaled(&grads_shift, 1.0);
    Ok((loss, grads))
}

/// Monte-Carlo risk and gradient with fresh probes from `rng`, averaged over
/// `cfg.probes_per_sample`.
pub fn mc_sure_loss<R: Rng + ?Sized>(
    h: &Mlp,
    z: &[f64],
    cfg: &SureConfig,
    epsilon: f64,
    rng: &mut R,
) -> Result<(f64, MlpGrads)> {
    cfg.validate()?;
    let std = cfg.probe_variance.std(cfg.sigma);
    let k = z.len();
    let mut total_loss = 0.0;
    let mut total_grads = MlpGrads::zeros_like(h);
    for _ in 0..cfg.probes_per_sample {
        let probe: Vec<f64> = (0..k)
            .map(|_| std * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let (loss, grads) = mc_sure_loss_with_probe(h, z, cfg.sigma, epsilon, &probe)?;
        total_loss += loss;
        total_grads.add_scaled(&grads, 1.0);
    }
    let inv = 1.0 / cfg.probes_per_sample as f64;
    total_grads.scale(inv);
    Ok((total_loss * inv, total_grads))
}

/// Which risk estimator an unbiasedness check exercised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskEstimator {
    Exact,
    MonteCarlo,
}

/// Outcome of comparing a risk estimator against the clean-signal oracle
/// over repeated noise draws.
#[derive(Debug, Clone, Serialize)]
pub struct UnbiasednessReport {
    pub estimator: RiskEstimator,
    pub n_trials: usize,
    pub mean_mse: f64,
    pub mean_sure: f64,
    /// Standard error of the per-draw difference (paired).
    pub std_err: f64,
    pub pass: bool,
}

/// Draw `z = z* + sigma n` repeatedly for a fixed denoiser and compare the
/// mean risk estimate against the mean oracle MSE; passes when the paired
/// difference is within `se_threshold` standard errors.
pub fn unbiasedness_check<R: Rng + ?Sized>(
    h: &Mlp,
    z_star: &[f64],
    sigma: f64,
    n_trials: usize,
    estimator: RiskEstimator,
    epsilon: f64,
    se_threshold: f64,
    rng: &mut R,
) -> Result<UnbiasednessReport> {
    if n_trials == 0 {
        return Err(Error::Config("n_trials must be >= 1".into()));
    }
    let k = z_star.len();
    let mut sum_mse = 0.0;
    let mut sum_sure = 0.0;
    let mut sum_diff = 0.0;
    let mut sum_diff_sq = 0.0;
    let mut z = vec![0.0; k];
    for _ in 0..n_trials {
        for (zi, s) in z.iter_mut().zip(z_star) {
            let n: f64 = rng.sample(StandardNormal);
            *zi = s + sigma * n;
        }
        let denoised = h.output(&z)?;
        let mse = mse_oracle(&denoised, z_star)?;
        let sure = match estimator {
            RiskEstimator::Exact => {
                let div = exact_divergence(h, &z)?;
                sure_exact(h, &z, sigma, div)?
            }
            RiskEstimator::MonteCarlo => {
                let probe: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                mc_sure_value(h, &z, sigma, epsilon, &probe)?
            }
        };
        let diff = sure - mse;
        sum_mse += mse;
        sum_sure += sure;
        sum_diff += diff;
        sum_diff_sq += diff * diff;
    }
    let n = n_trials as f64;
    let mean_diff = sum_diff / n;
    let var_diff = (sum_diff_sq / n - mean_diff * mean_diff).max(0.0);
    let std_err = (var_diff / n).sqrt();
    let pass = mean_diff.abs() <= se_threshold * std_err;
    Ok(UnbiasednessReport {
        estimator,
        n_trials,
        mean_mse: sum_mse / n,
        mean_sure: sum_sure / n,
        std_err,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnkit::{Activation, DenseLayer, MlpLayer, finite_diff_gradient, max_rel_err, FD_STEP};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn linear(dim_in: usize, dim_out: usize, weight: &[f64]) -> Mlp {
        Mlp::new(vec![MlpLayer {
            dense: DenseLayer::from_parts(dim_in, dim_out, weight.to_vec(), vec![0.0; dim_out])
                .unwrap(),
            activation: Activation::Identity,
        }])
        .unwrap()
    }

    fn identity(dim: usize) -> Mlp {
        Mlp::new(vec![MlpLayer {
            dense: DenseLayer::identity(dim),
            activation: Activation::Identity,
        }])
        .unwrap()
    }

    fn scaled_identity(dim: usize, factor: f64) -> Mlp {
        let mut weight = vec![0.0; dim * dim];
        for i in 0..dim {
            weight[i * dim + i] = factor;
        }
        linear(dim, dim, &weight)
    }

    fn random_relu(k: usize, hidden: usize, seed: u64) -> Mlp {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mlp::with_dims(&[k, hidden, k], &[Activation::Relu, Activation::Identity], &mut rng)
            .unwrap()
    }

    #[test]
    fn mse_oracle_hand_values() {
        assert_eq!(mse_oracle(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse_oracle(&[3.0, 4.0], &[0.0, 0.0]).unwrap(), 12.5);
        assert_eq!(mse_oracle(&[-1.0], &[1.0]).unwrap(), 4.0);
        assert!(mse_oracle(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn exact_divergence_of_linear_maps() {
        let z7 = vec![0.3; 7];
        assert!((exact_divergence(&identity(7), &z7).unwrap() - 7.0).abs() < 1e-12);
        let z2 = [1.0, -2.0];
        assert!((exact_divergence(&scaled_identity(2, 0.5), &z2).unwrap() - 1.0).abs() < 1e-12);
        let a = linear(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert!((exact_divergence(&a, &z2).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn exact_divergence_rejects_non_square() {
        let rect = linear(2, 3, &[1.0; 6]);
        assert!(exact_divergence(&rect, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn sure_exact_hand_values() {
        // identity denoiser: residual 0, divergence K -> sigma^2 exactly
        let h = identity(4);
        let z = [0.1, -0.2, 5.0, 2.5];
        let div = exact_divergence(&h, &z).unwrap();
        assert!((sure_exact(&h, &z, 1.0, div).unwrap() - 1.0).abs() < 1e-12);

        // zero map on z = (3,4): 12.5 - 1 + 0
        let zero = linear(2, 2, &[0.0; 4]);
        let v = sure_exact(&zero, &[3.0, 4.0], 1.0, 0.0).unwrap();
        assert!((v - 11.5).abs() < 1e-12);

        // h(z) = 0.5 z at z = (2,-2), sigma = 0.5: 1 - 0.25 + 0.25
        let half = scaled_identity(2, 0.5);
        let div = exact_divergence(&half, &[2.0, -2.0]).unwrap();
        let v = sure_exact(&half, &[2.0, -2.0], 0.5, div).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sure_exact_identity_equals_sigma_squared_for_any_z() {
        let h = identity(6);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let z: Vec<f64> = (0..6)
                .map(|_| rng.sample::<f64, _>(StandardNormal) * 10.0)
                .collect();
            let div = exact_divergence(&h, &z).unwrap();
            for sigma in [0.0, 0.5, 2.0] {
                let v = sure_exact(&h, &z, sigma, div).unwrap();
                assert!((v - sigma * sigma).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mc_divergence_identity_concentrates_at_k() {
        let h = identity(16);
        let z = vec![0.25; 16];
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let est = mc_divergence(&h, &z, 1e-3, 100_000, &mut rng).unwrap();
        assert!((est - 16.0).abs() < 0.5, "est {est}");
    }

    #[test]
    fn mc_divergence_constant_map_is_exactly_zero() {
        // affine-constant map: zero weight, nonzero bias
        let h = Mlp::new(vec![MlpLayer {
            dense: DenseLayer::from_parts(3, 3, vec![0.0; 9], vec![1.0, -2.0, 0.5]).unwrap(),
            activation: Activation::Identity,
        }])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let est = mc_divergence(&h, &[0.1, 0.2, 0.3], 1e-3, 1, &mut rng).unwrap();
        assert_eq!(est, 0.0);
    }

    #[test]
    fn mc_divergence_matches_exact_for_linear() {
        let h = linear(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let z = [0.4, -1.0];
        let exact = exact_divergence(&h, &z).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let est = mc_divergence(&h, &z, 0.01, 100_000, &mut rng).unwrap();
        assert!((est - exact).abs() < 0.25, "est {est} vs {exact}");
    }

    #[test]
    fn mc_divergence_rejects_bad_epsilon() {
        let h = identity(2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(mc_divergence(&h, &[0.0, 0.0], 0.0, 10, &mut rng).is_err());
        assert!(mc_divergence(&h, &[0.0, 0.0], -1.0, 10, &mut rng).is_err());
    }

    #[test]
    fn sigma_squared_probes_scale_the_estimate() {
        let h = identity(8);
        let z = vec![0.0; 8];
        let sigma = 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let est =
            mc_divergence_with_std(&h, &z, 1e-3, 100_000, sigma, &mut rng).unwrap();
        let ratio = est / 8.0;
        assert!((3.6..=4.4).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn mc_sure_value_identity_matches_exact_in_expectation() {
        let h = identity(16);
        let z = vec![0.5; 16];
        let sigma = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let probe: Vec<f64> = (0..16).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            acc += mc_sure_value(&h, &z, sigma, 1e-4, &probe).unwrap();
        }
        let mean = acc / n as f64;
        assert!((mean - sigma * sigma).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn sigma_zero_reduces_to_self_reconstruction() {
        let h = random_relu(8, 8, 77);
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let z: Vec<f64> = (0..8).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let probe: Vec<f64> = (0..8).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let (loss, _) = mc_sure_loss_with_probe(&h, &z, 0.0, 1e-4, &probe).unwrap();
        let out = h.output(&z).unwrap();
        let recon: f64 =
            z.iter().zip(&out).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / 8.0;
        assert_eq!(loss, recon);
    }

    #[test]
    fn mc_sure_gradient_matches_finite_differences() {
        let mut h = random_relu(8, 8, 21);
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let z: Vec<f64> = (0..8).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let probe: Vec<f64> = (0..8).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let sigma = 1.0;
        let epsilon = 0.05;

        let (_, grads) = mc_sure_loss_with_probe(&h, &z, sigma, epsilon, &probe).unwrap();
        let analytic = grads.to_flat();
        let params = h.params_vec();
        let numeric = finite_diff_gradient(
            |p| {
                h.set_params_vec(p).unwrap();
                mc_sure_value(&h, &z, sigma, epsilon, &probe).unwrap()
            },
            &params,
            FD_STEP,
        );
        let err = max_rel_err(&analytic, &numeric);
        assert!(err < 1e-4, "err {err}");
    }

    #[test]
    fn unbiased_for_fixed_denoisers() {
        // Theorem-style check at unit scale: mean(sure) == mean(mse) within
        // 3 standard errors for a fixed denoiser over noise draws.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let z_star: Vec<f64> = (0..16).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        for h in [identity(16), scaled_identity(16, 0.3), random_relu(16, 16, 5)] {
            let report = unbiasedness_check(
                &h,
                &z_star,
                1.0,
                10_000,
                RiskEstimator::Exact,
                1e-4,
                3.0,
                &mut rng,
            )
            .unwrap();
            assert!(
                report.pass,
                "mse {} vs sure {} (se {})",
                report.mean_mse, report.mean_sure, report.std_err
            );
        }
    }

    #[test]
    fn monte_carlo_estimator_is_unbiased_in_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let z_star: Vec<f64> = (0..16).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let h = random_relu(16, 16, 6);
        let report = unbiasedness_check(
            &h,
            &z_star,
            1.0,
            10_000,
            RiskEstimator::MonteCarlo,
            1e-3,
            4.0,
            &mut rng,
        )
        .unwrap();
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn probe_reseeding_shifts_value_within_tolerance() {
        let h = random_relu(8, 8, 7);
        let z = vec![0.3; 8];
        let cfg = SureConfig {
            probes_per_sample: 2000,
            ..SureConfig::new(1.0).unwrap()
        };
        let (a, _) =
            mc_sure_loss(&h, &z, &cfg, 1e-3, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let (b, _) =
            mc_sure_loss(&h, &z, &cfg, 1e-3, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        // Monte-Carlo std of the divergence term at 2000 probes
        assert!((a - b).abs() < 0.3, "a {a} b {b}");
    }

    #[test]
    fn coordinate_std_pools_all_coords() {
        let rows: Vec<Vec<f64>> = vec![vec![1.0, 1.0], vec![-1.0, -1.0]];
        let std = coordinate_std(rows.iter().map(|r| r.as_slice()));
        assert!((std - 1.0).abs() < 1e-12);
        assert_eq!(coordinate_std(std::iter::empty::<&[f64]>()), 0.0);
    }

    #[test]
    fn epsilon_resolution_scales_and_floors() {
        let cfg = SureConfig::new(1.0).unwrap();
        assert!((cfg.epsilon_for(2.0) - 2e-4).abs() < 1e-18);
        assert_eq!(cfg.epsilon_for(0.0), EPSILON_FLOOR);
        let fixed = SureConfig {
            epsilon: Some(0.05),
            ..cfg
        };
        assert_eq!(fixed.epsilon_for(123.0), 0.05);
    }
}
