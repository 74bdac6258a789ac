//! Evaluation metrics (RMSE, MAE, Pearson correlation) and tag-based
//! subgroup reports.
//!
//! All metrics pool the N x M prediction/truth points. The correlation is
//! pooled by default; a per-sample-averaged variant exists for comparison.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};

/// Metrics over one evaluation split (optionally restricted to a subgroup).
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub rmse: f64,
    pub mae: f64,
    pub pcc: f64,
    pub n_samples: usize,
    pub subgroup: Option<String>,
}

fn check_shapes(pred: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<usize> {
    if pred.len() != truth.len() {
        return Err(Error::shape("metrics rows", truth.len(), pred.len()));
    }
    if pred.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let m = truth[0].len();
    if m == 0 {
        return Err(Error::Config("metrics need at least one column".into()));
    }
    for (p, t) in pred.iter().zip(truth) {
        if p.len() != m || t.len() != m {
            return Err(Error::shape("metrics columns", m, p.len().min(t.len())));
        }
    }
    Ok(m)
}

/// Root mean squared error over all pooled points.
pub fn rmse(pred: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<f64> {
    let m = check_shapes(pred, truth)?;
    let n_points = (pred.len() * m) as f64;
    let sse: f64 = pred
        .iter()
        .zip(truth)
        .flat_map(|(p, t)| p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)))
        .sum();
    Ok((sse / n_points).sqrt())
}

/// Mean absolute error over all pooled points.
pub fn mae(pred: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<f64> {
    let m = check_shapes(pred, truth)?;
    let n_points = (pred.len() * m) as f64;
    let sae: f64 = pred
        .iter()
        .zip(truth)
        .flat_map(|(p, t)| p.iter().zip(t).map(|(a, b)| (a - b).abs()))
        .sum();
    Ok(sae / n_points)
}

fn pearson(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Result<f64> {
    let mut n = 0usize;
    let mut sx = 0.0;
    let mut sy = 0.0;
    for (x, y) in xs.clone().zip(ys.clone()) {
        n += 1;
        sx += x;
        sy += y;
    }
    let nf = n as f64;
    let mx = sx / nf;
    let my = sy / nf;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in xs.zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx == 0.0 {
        return Err(Error::ZeroVariance("predictions"));
    }
    if vy == 0.0 {
        return Err(Error::ZeroVariance("truth"));
    }
    Ok((cov / (vx.sqrt() * vy.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson correlation over all pooled (sample, point) pairs.
pub fn pcc(pred: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<f64> {
    check_shapes(pred, truth)?;
    pearson(
        pred.iter().flat_map(|r| r.iter().copied()),
        truth.iter().flat_map(|r| r.iter().copied()),
    )
}

/// Mean over samples of the per-sample Pearson correlation.
pub fn pcc_per_sample(pred: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<f64> {
    check_shapes(pred, truth)?;
    let mut acc = 0.0;
    for (p, t) in pred.iter().zip(truth) {
        acc += pearson(p.iter().copied(), t.iter().copied())?;
    }
    Ok(acc / pred.len() as f64)
}

/// RMSE, MAE and pooled PCC in one report.
pub fn report(pred: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<MetricsReport> {
    Ok(MetricsReport {
        rmse: rmse(pred, truth)?,
        mae: mae(pred, truth)?,
        pcc: pcc(pred, truth)?,
        n_samples: pred.len(),
        subgroup: None,
    })
}

/// Metrics restricted to samples carrying `tag`.
pub fn subgroup_report(
    pred: &[Vec<f64>],
    truth: &[Vec<f64>],
    tags: &[BTreeSet<String>],
    tag: &str,
) -> Result<MetricsReport> {
    check_shapes(pred, truth)?;
    if tags.len() != pred.len() {
        return Err(Error::shape("subgroup tags", pred.len(), tags.len()));
    }
    let keep: Vec<usize> = tags
        .iter()
        .enumerate()
        .filter(|(_, t)| t.contains(tag))
        .map(|(i, _)| i)
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptySubgroup(tag.to_string()));
    }
    let sub_pred: Vec<Vec<f64>> = keep.iter().map(|&i| pred[i].clone()).collect();
    let sub_truth: Vec<Vec<f64>> = keep.iter().map(|&i| truth[i].clone()).collect();
    let mut rep = report(&sub_pred, &sub_truth)?;
    rep.subgroup = Some(tag.to_string());
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn rows(data: &[&[f64]]) -> Vec<Vec<f64>> {
        data.iter().map(|r| r.to_vec()).collect()
    }

    #[test]
    fn rmse_hand_values() {
        let t = rows(&[&[1.0, 2.0, 2.0]]);
        let p = rows(&[&[0.0, 0.0, 0.0]]);
        assert!((rmse(&p, &t).unwrap() - 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(rmse(&t, &t).unwrap(), 0.0);
    }

    #[test]
    fn rmse_is_homogeneous() {
        let t = rows(&[&[1.0, -2.0], &[0.5, 3.0]]);
        let p = rows(&[&[0.0, 1.0], &[2.0, -1.0]]);
        let c = -2.5f64;
        let scale = |rs: &[Vec<f64>]| -> Vec<Vec<f64>> {
            rs.iter().map(|r| r.iter().map(|v| c * v).collect()).collect()
        };
        let a = rmse(&scale(&p), &scale(&t)).unwrap();
        let b = c.abs() * rmse(&p, &t).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn mae_hand_values() {
        let p = rows(&[&[0.0, 0.0]]);
        let t = rows(&[&[3.0, -1.0]]);
        assert_eq!(mae(&p, &t).unwrap(), 2.0);
        assert_eq!(mae(&t, &t).unwrap(), 0.0);
    }

    #[test]
    fn mae_never_exceeds_rmse() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        for _ in 0..1000 {
            let p: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..4).map(|_| rng.sample(StandardNormal)).collect())
                .collect();
            let t: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..4).map(|_| rng.sample(StandardNormal)).collect())
                .collect();
            assert!(mae(&p, &t).unwrap() <= rmse(&p, &t).unwrap() + 1e-15);
        }
    }

    #[test]
    fn pcc_hand_values() {
        let p = rows(&[&[1.0, 2.0, 3.0]]);
        let up = rows(&[&[5.0, 7.0, 9.0]]); // 2*pred + 3
        assert!((pcc(&p, &up).unwrap() - 1.0).abs() < 1e-12);
        let neg = rows(&[&[-1.0, -2.0, -3.0]]);
        assert!((pcc(&p, &neg).unwrap() + 1.0).abs() < 1e-12);
        let t = rows(&[&[1.0, 3.0, 2.0]]);
        assert!((pcc(&p, &t).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pcc_errors_on_zero_variance() {
        let flat = rows(&[&[1.0, 1.0, 1.0]]);
        let t = rows(&[&[1.0, 2.0, 3.0]]);
        assert!(matches!(pcc(&flat, &t), Err(Error::ZeroVariance("predictions"))));
        assert!(matches!(pcc(&t, &flat), Err(Error::ZeroVariance("truth"))));
    }

    #[test]
    fn pcc_invariant_under_positive_affine_transforms() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let p: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..3).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let t: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..3).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let base = pcc(&p, &t).unwrap();
        let transformed: Vec<Vec<f64>> = p
            .iter()
            .map(|r| r.iter().map(|v| 3.7 * v + 11.0).collect())
            .collect();
        assert!((pcc(&transformed, &t).unwrap() - base).abs() <= 1e-12);
    }

    #[test]
    fn sse_recovers_from_rmse() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let p: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..5).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let t: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..5).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let sse: f64 = p
            .iter()
            .zip(&t)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)))
            .sum();
        let r = rmse(&p, &t).unwrap();
        assert!((r * r * 20.0 - sse).abs() < 1e-12 * sse.max(1.0));
    }

    #[test]
    fn metrics_match_brute_force_references() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..1000 {
            let n = rng.random_range(1..5usize);
            let m = rng.random_range(1..6usize);
            let p: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..m).map(|_| rng.sample(StandardNormal)).collect())
                .collect();
            let t: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..m).map(|_| rng.sample(StandardNormal)).collect())
                .collect();

            // single-loop reference implementations
            let mut sse = 0.0;
            let mut sae = 0.0;
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for i in 0..n {
                for j in 0..m {
                    sse += (p[i][j] - t[i][j]).powi(2);
                    sae += (p[i][j] - t[i][j]).abs();
                    xs.push(p[i][j]);
                    ys.push(t[i][j]);
                }
            }
            let cnt = (n * m) as f64;
            let ref_rmse = (sse / cnt).sqrt();
            let ref_mae = sae / cnt;
            assert!((rmse(&p, &t).unwrap() - ref_rmse).abs() <= 1e-12);
            assert!((mae(&p, &t).unwrap() - ref_mae).abs() <= 1e-12);

            let mx = xs.iter().sum::<f64>() / cnt;
            let my = ys.iter().sum::<f64>() / cnt;
            let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
            let vx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
            let vy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
            if vx > 0.0 && vy > 0.0 {
                let ref_pcc = cov / (vx.sqrt() * vy.sqrt());
                assert!((pcc(&p, &t).unwrap() - ref_pcc).abs() <= 1e-12);
            }
        }
    }

    fn tagset(tags: &[&str]) -> BTreeSet<String> {
        tags.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn subgroup_on_all_samples_equals_global() {
        let p = rows(&[&[1.0, 2.0], &[3.0, 1.0]]);
        let t = rows(&[&[1.5, 2.5], &[2.0, 0.0]]);
        let tags = vec![tagset(&["all"]), tagset(&["all", "extra"])];
        let sub = subgroup_report(&p, &t, &tags, "all").unwrap();
        let global = report(&p, &t).unwrap();
        assert_eq!(sub.rmse, global.rmse);
        assert_eq!(sub.mae, global.mae);
        assert_eq!(sub.pcc, global.pcc);
        assert_eq!(sub.subgroup.as_deref(), Some("all"));
    }

    #[test]
    fn missing_subgroup_errors_with_tag_name() {
        let p = rows(&[&[1.0]]);
        let t = rows(&[&[2.0]]);
        let tags = vec![tagset(&[])];
        let err = subgroup_report(&p, &t, &tags, "abnormal").unwrap_err();
        assert!(err.to_string().contains("abnormal"));
    }

    #[test]
    fn disjoint_subgroups_recombine_to_global_rmse() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let n = 10;
        let m = 3;
        let p: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..m).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let t: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..m).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let tags: Vec<BTreeSet<String>> = (0..n)
            .map(|i| tagset(if i < 4 { &["a"] } else { &["b"] }))
            .collect();
        let ra = subgroup_report(&p, &t, &tags, "a").unwrap();
        let rb = subgroup_report(&p, &t, &tags, "b").unwrap();
        let global = rmse(&p, &t).unwrap();
        let pooled = ((ra.rmse.powi(2) * (4 * m) as f64 + rb.rmse.powi(2) * (6 * m) as f64)
            / (n * m) as f64)
            .sqrt();
        assert!((pooled - global).abs() <= 1e-12);
    }

    #[test]
    fn per_sample_pcc_differs_from_pooled() {
        // two samples, each perfectly correlated per-sample but with offsets
        // that weaken the pooled correlation
        let p = rows(&[&[0.0, 1.0], &[10.0, 11.0]]);
        let t = rows(&[&[10.0, 11.0], &[0.0, 1.0]]);
        assert!((pcc_per_sample(&p, &t).unwrap() - 1.0).abs() < 1e-12);
        assert!(pcc(&p, &t).unwrap() < 0.0);
    }
}
