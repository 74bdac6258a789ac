//! Fixed denoising kernels (mean/median sliding windows over the feature
//! coordinates) and plain linear regression on raw features.
//!
//! Kernels treat a feature vector as a 1-D signal over its K coordinates and
//! use replicate padding at the edges. An even mean window of length k spans
//! `[i - k/2, i + k/2 - 1]` (left-biased); median windows must be odd.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nnkit::DenseLayer;
use crate::red::{train_engine, TrainConfig, TrainingLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Mean,
    Median,
}

/// A sliding-window denoising kernel over feature coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub k: usize,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("kernel window must be >= 1".into()));
        }
        if kind == KernelKind::Median && k % 2 == 0 {
            return Err(Error::Config(format!(
                "median kernel window must be odd, got {k}"
            )));
        }
        Ok(KernelSpec { kind, k })
    }

    /// Parse `mean:3` / `median:5`.
    pub fn parse(s: &str) -> Result<Self> {
        let (kind, k) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("kernel spec `{s}` must look like `mean:3`")))?;
        let kind = match kind {
            "mean" => KernelKind::Mean,
            "median" => KernelKind::Median,
            other => return Err(Error::Config(format!("unknown kernel kind `{other}`"))),
        };
        let k: usize = k
            .parse()
            .map_err(|_| Error::Config(format!("kernel window `{k}` is not an integer")))?;
        KernelSpec::new(kind, k)
    }
}

impl std::fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.kind {
            KernelKind::Mean => "mean",
            KernelKind::Median => "median",
        };
        write!(f, "{kind}:{}", self.k)
    }
}

/// Apply the kernel to one feature vector with replicate padding.
pub fn kernel_denoise(z: &[f64], spec: KernelSpec) -> Vec<f64> {
    let n = z.len();
    if n == 0 {
        return Vec::new();
    }
    let half = (spec.k / 2) as isize;
    let mut out = Vec::with_capacity(n);
    let mut window = Vec::with_capacity(spec.k);
    for i in 0..n as isize {
        window.clear();
        for j in (i - half)..(i - half + spec.k as isize) {
            let idx = j.clamp(0, n as isize - 1) as usize;
            window.push(z[idx]);
        }
        let v = match spec.kind {
            KernelKind::Mean => window.iter().sum::<f64>() / spec.k as f64,
            KernelKind::Median => {
                window.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
                window[spec.k / 2]
            }
        };
        out.push(v);
    }
    out
}

/// Train a linear head on raw features with the shared optimizer/schedule
/// (the denoising loss plays no part: no encoder, lambda pinned to 0).
pub fn regression_train(
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig,
) -> Result<(DenseLayer, TrainingLog)> {
    let (_, head, _, log) = train_engine(train, val, cfg, false)?;
    Ok((head, log))
}
