//! Executable verification that feature noise acts as weight decay on a
//! linear predictor, plus the feature-space diagnostics (head weight norm,
//! k-nearest-neighbor differential entropy).
//!
//! The noise check verifies the expectation-level identity
//! `E[(w^T(z*+n) - y)^2] = (w^T z* - y)^2 + sigma^2 ||w||^2`
//! (the cross term vanishes in expectation). The residual-error penalty uses
//! the exact identity `cos^2(e,w) ||e||^2 ||w||^2 = (w^T e)^2`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};
use crate::nnkit::DenseLayer;

/// Outcome of one empirical-vs-analytic weight-decay comparison.
#[derive(Debug, Clone, Serialize)]
pub struct DecayCheckReport {
    pub empirical_lhs: f64,
    pub analytic_rhs: f64,
    pub n_trials: usize,
    pub std_err: f64,
    pub pass: bool,
}

/// Monte-Carlo check that corrupting the features of a linear predictor adds
/// the constant penalty `sigma^2 ||w||^2` to its squared error in expectation.
pub fn noise_decay_check<R: Rng + ?Sized>(
    w: &[f64],
    z_star: &[f64],
    y: f64,
    sigma: f64,
    n_trials: usize,
    rng: &mut R,
) -> Result<DecayCheckReport> {
    if w.len() != z_star.len() {
        return Err(Error::shape("noise_decay_check dims", z_star.len(), w.len()));
    }
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::Config(format!("sigma must be >= 0, got {sigma}")));
    }
    if n_trials == 0 {
        return Err(Error::Config("n_trials must be >= 1".into()));
    }
    let clean_err: f64 = w.iter().zip(z_star).map(|(a, b)| a * b).sum::<f64>() - y;
    let w_norm_sq: f64 = w.iter().map(|v| v * v).sum();
    let analytic_rhs = clean_err * clean_err + sigma * sigma * w_norm_sq;

    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n_trials {
        let noisy_err: f64 = w
            .iter()
            .zip(z_star)
            .map(|(wi, zi)| {
                let n: f64 = rng.sample(StandardNormal);
                wi * (zi + sigma * n)
            })
            .sum::<f64>()
            - y;
        let sq = noisy_err * noisy_err;
        sum += sq;
        sum_sq += sq * sq;
    }
    let n = n_trials as f64;
    let empirical_lhs = sum / n;
    let var = (sum_sq / n - empirical_lhs * empirical_lhs).max(0.0);
    let std_err = (var / n).sqrt();
    let pass = (empirical_lhs - analytic_rhs).abs() <= 4.0 * std_err;
    Ok(DecayCheckReport {
        empirical_lhs,
        analytic_rhs,
        n_trials,
        std_err,
        pass,
    })
}

/// The adaptive weight-decay penalty induced by a residual error `e`:
/// `cos^2(e, w) ||e||^2 ||w||^2`, computed through the exact identity
/// `(w^T e)^2` (which also fixes the value 0 for zero vectors).
pub fn residual_decay_term(w: &[f64], e: &[f64]) -> Result<f64> {
    if w.len() != e.len() {
        return Err(Error::shape("residual_decay_term dims", e.len(), w.len()));
    }
    let dot: f64 = w.iter().zip(e).map(|(a, b)| a * b).sum();
    Ok(dot * dot)
}

/// Differential entropy of a sample cloud via the k-nearest-neighbor
/// (Kozachenko-Leonenko) estimator, k = 3, Euclidean metric, nats.
///
/// Duplicate points would give zero distances; those are floored at 1e-12
/// with a warning.
pub fn feature_entropy(features: &[Vec<f64>]) -> Result<f64> {
    const K_NEIGHBORS: usize = 3;
    const DIST_FLOOR: f64 = 1e-12;

    let n = features.len();
    if n < 2 {
        return Err(Error::Config(format!(
            "entropy estimate needs at least 2 samples, got {n}"
        )));
    }
    let dim = features[0].len();
    if dim == 0 {
        return Err(Error::Config("entropy estimate needs at least 1 dimension".into()));
    }
    for f in features {
        if f.len() != dim {
            return Err(Error::shape("feature_entropy dims", dim, f.len()));
        }
        if !f.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("feature_entropy input".into()));
        }
    }
    let k = K_NEIGHBORS.min(n - 1);

    let mut log_dists = Vec::with_capacity(n);
    let mut floored = 0usize;
    let mut nearest = vec![f64::INFINITY; k];
    for (i, a) in features.iter().enumerate() {
        nearest.fill(f64::INFINITY);
        for (j, b) in features.iter().enumerate() {
            if i == j {
                continue;
            }
            let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            // keep the k smallest squared distances
            if d2 < nearest[k - 1] {
                let mut pos = k - 1;
                while pos > 0 && d2 < nearest[pos - 1] {
                    nearest[pos] = nearest[pos - 1];
                    pos -= 1;
                }
                nearest[pos] = d2;
            }
        }
        let mut dist = nearest[k - 1].sqrt();
        if dist < DIST_FLOOR {
            dist = DIST_FLOOR;
            floored += 1;
        }
        log_dists.push(dist.ln());
    }
    // summation in sorted order, so the estimate is exactly invariant to
    // sample permutations
    log_dists.sort_by(|a, b| a.partial_cmp(b).expect("finite logs"));
    let sum_log_dist: f64 = log_dists.iter().sum();
    if floored > 0 {
        log::warn!(
            "feature_entropy: {floored} of {n} neighbor distances below {DIST_FLOOR:e} (duplicate points?), floored"
        );
    }

    let d = dim as f64;
    // volume of the d-dimensional unit ball
    let log_unit_ball = d / 2.0 * std::f64::consts::PI.ln() - ln_gamma(d / 2.0 + 1.0);
    Ok(digamma(n as f64) - digamma(k as f64) + log_unit_ball + d * sum_log_dist / n as f64)
}

/// L2 norm of the regression layer's weights, bias excluded.
pub fn weight_norm(layer: &DenseLayer) -> f64 {
    layer.weight.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn noise_decay_sigma_zero_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        let report =
            noise_decay_check(&[1.5, -2.0], &[0.5, 1.0], 3.0, 0.0, 100, &mut rng).unwrap();
        assert_eq!(report.empirical_lhs, report.analytic_rhs);
        assert!(report.pass);
        assert_eq!(report.std_err, 0.0);
    }

    #[test]
    fn noise_decay_chi_square_one_dof() {
        // w = (1,0), z* = 0, y = 0, sigma = 1: lhs is the mean of n1^2 -> 1.
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let report =
            noise_decay_check(&[1.0, 0.0], &[0.0, 0.0], 0.0, 1.0, 100_000, &mut rng).unwrap();
        assert!((report.analytic_rhs - 1.0).abs() < 1e-12);
        assert!((report.empirical_lhs - 1.0).abs() < 0.02, "{report:?}");
        assert!(report.pass);
    }

    #[test]
    fn doubling_w_quadruples_the_penalty() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        let w = [0.7, -1.1, 0.4];
        let w2: Vec<f64> = w.iter().map(|v| 2.0 * v).collect();
        let z = [0.0, 0.0, 0.0];
        let a = noise_decay_check(&w, &z, 0.0, 1.5, 10, &mut rng).unwrap();
        let b = noise_decay_check(&w2, &z, 0.0, 1.5, 10, &mut rng).unwrap();
        assert!((b.analytic_rhs - 4.0 * a.analytic_rhs).abs() < 1e-12);
    }

    #[test]
    fn noise_decay_check_passes_broadly() {
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        for _ in 0..20 {
            let k = rng.random_range(1..6usize);
            let w: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
            let z: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
            let y: f64 = rng.sample(StandardNormal);
            let sigma = rng.random_range(0.1..2.0);
            let report = noise_decay_check(&w, &z, y, sigma, 100_000, &mut rng).unwrap();
            assert!(report.pass, "{report:?}");
        }
    }

    #[test]
    fn residual_decay_hand_values() {
        assert_eq!(residual_decay_term(&[1.0, 0.0], &[0.0, 2.0]).unwrap(), 0.0);
        assert_eq!(residual_decay_term(&[1.0, 1.0], &[1.0, 1.0]).unwrap(), 4.0);
        assert_eq!(residual_decay_term(&[1.0, 1.0], &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn residual_decay_matches_cosine_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        for _ in 0..1000 {
            let k = rng.random_range(1..8usize);
            let w: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
            let e: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
            let direct = residual_decay_term(&w, &e).unwrap();
            let wn: f64 = w.iter().map(|v| v * v).sum();
            let en: f64 = e.iter().map(|v| v * v).sum();
            if wn == 0.0 || en == 0.0 {
                assert_eq!(direct, 0.0);
                continue;
            }
            let dot: f64 = w.iter().zip(&e).map(|(a, b)| a * b).sum();
            let cos_sq = dot * dot / (wn * en);
            let via_cosine = cos_sq * en * wn;
            assert!((direct - via_cosine).abs() <= 1e-12 * direct.max(1.0));
        }
    }

    #[test]
    fn expanded_squared_error_is_an_identity() {
        // (w^T(z*+e) - y)^2 == (w^T z*-y)^2 + 2(w^T z*-y)(w^T e) + (w^T e)^2
        let mut rng = ChaCha8Rng::seed_from_u64(65);
        for _ in 0..200 {
            let k = rng.random_range(1..6usize);
            let w: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
            let z: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
            let e: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
            let y: f64 = rng.sample(StandardNormal);
            let wz: f64 = w.iter().zip(&z).map(|(a, b)| a * b).sum();
            let we: f64 = w.iter().zip(&e).map(|(a, b)| a * b).sum();
            let lhs = (wz + we - y) * (wz + we - y);
            let rhs = (wz - y) * (wz - y) + 2.0 * (wz - y) * we + we * we;
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn entropy_matches_gaussian_reference() {
        // 1-D standard Gaussian: H = 0.5 ln(2 pi e) = 1.4189...
        let mut rng = ChaCha8Rng::seed_from_u64(66);
        let samples: Vec<Vec<f64>> = (0..10_000)
            .map(|_| vec![rng.sample::<f64, _>(StandardNormal)])
            .collect();
        let h = feature_entropy(&samples).unwrap();
        let expected = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
        assert!((h - expected).abs() < 0.05, "h {h} vs {expected}");
    }

    #[test]
    fn entropy_matches_uniform_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        let samples: Vec<Vec<f64>> = (0..10_000).map(|_| vec![rng.random::<f64>()]).collect();
        let h = feature_entropy(&samples).unwrap();
        assert!(h.abs() < 0.05, "h {h}");
    }

    #[test]
    fn entropy_scaling_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(68);
        let dim = 2;
        let samples: Vec<Vec<f64>> = (0..4000)
            .map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let c = 3.0f64;
        let scaled: Vec<Vec<f64>> = samples
            .iter()
            .map(|r| r.iter().map(|v| c * v).collect())
            .collect();
        let h0 = feature_entropy(&samples).unwrap();
        let h1 = feature_entropy(&scaled).unwrap();
        let shift = dim as f64 * c.ln();
        assert!((h1 - h0 - shift).abs() < 0.05 * dim as f64, "{h0} {h1}");
    }

    #[test]
    fn entropy_is_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(69);
        let samples: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..3).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let mut reversed = samples.clone();
        reversed.reverse();
        assert_eq!(
            feature_entropy(&samples).unwrap(),
            feature_entropy(&reversed).unwrap()
        );
    }

    #[test]
    fn entropy_survives_duplicates() {
        let samples = vec![vec![1.0], vec![1.0], vec![1.0], vec![2.0]];
        let h = feature_entropy(&samples).unwrap();
        assert!(h.is_finite());
    }

    #[test]
    fn entropy_needs_two_samples() {
        assert!(feature_entropy(&[vec![1.0]]).is_err());
    }

    #[test]
    fn weight_norm_hand_values() {
        assert_eq!(weight_norm(&DenseLayer::zeros(3, 2)), 0.0);
        let eye = DenseLayer::identity(2);
        assert!((weight_norm(&eye) - 2f64.sqrt()).abs() < 1e-15);
        let col = DenseLayer::from_parts(1, 2, vec![3.0, 4.0], vec![9.0, 9.0]).unwrap();
        assert_eq!(weight_norm(&col), 5.0); // bias excluded
    }
}
