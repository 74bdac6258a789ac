//! Feature/target ingestion, synthetic data with known clean signal, the
//! additive-Gaussian corruption model, and deterministic splits.
//!
//! File formats (plain CSV, UTF-8, `.` decimal separator, no quoting):
//!
//! - features: header `id,f0,f1,...,f{K-1}`, one row per sample
//! - targets:  header `id,v0,...,v{M-1}[,tags]`, tags `;`-separated, optional
//!
//! Synthetic datasets additionally carry a JSON sidecar ([`SyntheticMeta`])
//! recording the generating spec, the teacher weights and the latent lift so
//! runs can be reproduced and checked against the ground truth.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::atomic_write;

/// A K-dimensional feature vector with its sample id.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub id: String,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(id: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let fv = FeatureVector {
            id: id.into(),
            values,
        };
        fv.validate()?;
        Ok(fv)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Config(format!(
                "feature vector `{}` has zero dimensions",
                self.id
            )));
        }
        if !self.values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!("feature vector `{}`", self.id)));
        }
        Ok(())
    }
}

/// An M-dimensional vectorized visual field (dB sensitivities).
#[derive(Debug, Clone, PartialEq)]
pub struct VfTarget {
    pub id: String,
    pub values: Vec<f64>,
}

impl VfTarget {
    pub fn new(id: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        let t = VfTarget {
            id: id.into(),
            values,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Config(format!(
                "target `{}` has zero dimensions",
                self.id
            )));
        }
        if !self.values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!("target `{}`", self.id)));
        }
        Ok(())
    }
}

/// Per-coordinate standard deviation of the additive white Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: f64,
}

impl NoiseModel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::Config(format!(
                "noise sigma must be finite and >= 0, got {sigma}"
            )));
        }
        Ok(NoiseModel { sigma })
    }
}

/// One (feature, target) pair, optionally with the clean signal it was
/// corrupted from, plus free-form subgroup tags.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub feature: FeatureVector,
    pub target: VfTarget,
    pub clean_feature: Option<FeatureVector>,
    pub tags: BTreeSet<String>,
}

/// An immutable collection of samples with consistent dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        if let Some(first) = samples.first() {
            let k = first.feature.dim();
            let m = first.target.dim();
            for s in &samples {
                s.feature.validate()?;
                s.target.validate()?;
                if s.feature.id != s.target.id {
                    return Err(Error::Config(format!(
                        "feature id `{}` does not match target id `{}`",
                        s.feature.id, s.target.id
                    )));
                }
                if s.feature.dim() != k {
                    return Err(Error::shape("dataset feature dims", k, s.feature.dim()));
                }
                if s.target.dim() != m {
                    return Err(Error::shape("dataset target dims", m, s.target.dim()));
                }
                if let Some(clean) = &s.clean_feature {
                    clean.validate()?;
                    if clean.dim() != k {
                        return Err(Error::shape("clean feature dims", k, clean.dim()));
                    }
                }
            }
        }
        Ok(Dataset { samples })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// K, the feature dimension. Panics on an empty dataset.
    pub fn feature_dim(&self) -> usize {
        self.samples[0].feature.dim()
    }

    /// M, the target dimension. Panics on an empty dataset.
    pub fn target_dim(&self) -> usize {
        self.samples[0].target.dim()
    }

    pub fn features(&self) -> impl Iterator<Item = &FeatureVector> {
        self.samples.iter().map(|s| &s.feature)
    }
}

/// Recipe for a synthetic dataset: latent Gaussians lifted into feature space,
/// a linear teacher for the targets, and known corruption noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_samples: usize,
    pub latent_dim: usize,
    pub feature_dim: usize,
    pub target_dim: usize,
    pub sigma: f64,
    pub target_noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::Config("n_samples must be >= 1".into()));
        }
        if self.latent_dim == 0 || self.feature_dim == 0 || self.target_dim == 0 {
            return Err(Error::Config("all dimensions must be >= 1".into()));
        }
        if self.latent_dim > self.feature_dim {
            return Err(Error::Config(format!(
                "latent_dim ({}) must not exceed feature_dim ({})",
                self.latent_dim, self.feature_dim
            )));
        }
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return Err(Error::Config(format!(
                "sigma must be finite and >= 0, got {}",
                self.sigma
            )));
        }
        if !self.target_noise.is_finite() || self.target_noise < 0.0 {
            return Err(Error::Config(format!(
                "target_noise must be finite and >= 0, got {}",
                self.target_noise
            )));
        }
        Ok(())
    }
}

/// Sidecar metadata written next to a synthetic dataset dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticMeta {
    pub spec: SyntheticSpec,
    /// Teacher weights, target_dim rows of feature_dim entries.
    pub teacher_weight: Vec<Vec<f64>>,
    /// Latent lift, feature_dim rows of latent_dim entries (unit rows).
    pub lift: Vec<Vec<f64>>,
}

/// A generated dataset together with its ground-truth metadata.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub dataset: Dataset,
    pub meta: SyntheticMeta,
}

/// Add i.i.d. Gaussian noise of std `noise.sigma` to every coordinate.
pub fn corrupt<R: Rng + ?Sized>(
    z_star: &FeatureVector,
    noise: NoiseModel,
    rng: &mut R,
) -> Result<FeatureVector> {
    z_star.validate()?;
    let values = z_star
        .values
        .iter()
        .map(|&v| {
            let n: f64 = rng.sample(StandardNormal);
            v + noise.sigma * n
        })
        .collect();
    Ok(FeatureVector {
        id: z_star.id.clone(),
        values,
    })
}

// Distinct ChaCha streams so each random ingredient of the generator is an
// independent sequence of the one seed.
const STREAM_LIFT: u64 = 0;
const STREAM_TEACHER: u64 = 1;
const STREAM_LATENT: u64 = 2;
const STREAM_FEATURE_NOISE: u64 = 3;
const STREAM_TARGET_NOISE: u64 = 4;

fn seeded_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn unit_rows<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| {
            let mut row: Vec<f64> = (0..cols).map(|_| rng.sample(StandardNormal)).collect();
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for v in &mut row {
                    *v /= norm;
                }
            }
            row
        })
        .collect()
}

/// Generate samples with known clean features: latent `u ~ N(0, I)` lifted by
/// a fixed unit-row matrix, targets from a linear teacher plus optional
/// Gaussian target noise, and features corrupted per the noise model.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    spec.validate()?;
    let lift = unit_rows(spec.feature_dim, spec.latent_dim, &mut seeded_stream(spec.seed, STREAM_LIFT));
    let teacher = unit_rows(
        spec.target_dim,
        spec.feature_dim,
        &mut seeded_stream(spec.seed, STREAM_TEACHER),
    );
    let mut latent_rng = seeded_stream(spec.seed, STREAM_LATENT);
    let mut feature_rng = seeded_stream(spec.seed, STREAM_FEATURE_NOISE);
    let mut target_rng = seeded_stream(spec.seed, STREAM_TARGET_NOISE);
    let noise = NoiseModel::new(spec.sigma)?;

    let mut samples = Vec::with_capacity(spec.n_samples);
    for i in 0..spec.n_samples {
        let id = format!("s{i:06}");
        let u: Vec<f64> = (0..spec.latent_dim)
            .map(|_| latent_rng.sample(StandardNormal))
            .collect();
        let z_star_values: Vec<f64> = lift
            .iter()
            .map(|row| row.iter().zip(&u).map(|(a, b)| a * b).sum())
            .collect();
        let z_star = FeatureVector::new(id.clone(), z_star_values)?;
        let y: Vec<f64> = teacher
            .iter()
            .map(|row| {
                let clean: f64 = row.iter().zip(&z_star.values).map(|(a, b)| a * b).sum();
                let n: f64 = target_rng.sample(StandardNormal);
                clean + spec.target_noise * n
            })
            .collect();
        let feature = corrupt(&z_star, noise, &mut feature_rng)?;
        samples.push(Sample {
            feature,
            target: VfTarget::new(id, y)?,
            clean_feature: Some(z_star),
            tags: BTreeSet::new(),
        });
    }

    Ok(SyntheticDataset {
        dataset: Dataset::new(samples)?,
        meta: SyntheticMeta {
            spec: spec.clone(),
            teacher_weight: teacher,
            lift,
        },
    })
}

/// Deterministically shuffle and partition into train/val/test.
pub fn split(
    dataset: &Dataset,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset)> {
    let (ft, fv, fe) = fractions;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(ft > 0.0 && fv > 0.0 && fe > 0.0) {
        return Err(Error::Config(format!(
            "split fractions must be positive, got ({ft}, {fv}, {fe})"
        )));
    }
    if ((ft + fv + fe) - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split fractions must sum to 1, got {}",
            ft + fv + fe
        )));
    }
    let n = dataset.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let n_train = ((ft * n as f64).round() as usize).min(n);
    let n_val = ((fv * n as f64).round() as usize).min(n - n_train);
    let take = |idx: &[usize]| -> Result<Dataset> {
        Dataset::new(idx.iter().map(|&i| dataset.samples[i].clone()).collect())
    };
    Ok((
        take(&order[..n_train])?,
        take(&order[n_train..n_train + n_val])?,
        take(&order[n_train + n_val..])?,
    ))
}

/// A target row as stored on disk: the target plus its subgroup tags.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetRecord {
    pub target: VfTarget,
    pub tags: BTreeSet<String>,
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn parse_cell(path: &Path, line: usize, col: &str, cell: &str) -> Result<f64> {
    let v: f64 = cell
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("column `{col}`: `{cell}` is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(
            path,
            line,
            format!("column `{col}`: non-finite value `{cell}`"),
        ));
    }
    Ok(v)
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    Ok(text.lines().map(|l| l.to_string()).collect())
}

/// Load a feature CSV (`id,f0,...,f{K-1}`), preserving row order.
pub fn load_features(path: &Path) -> Result<Vec<FeatureVector>> {
    let lines = read_lines(path)?;
    let header = lines
        .first()
        .ok_or_else(|| parse_err(path, 1, "empty file, expected header `id,f0,...`"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 2 || cols[0] != "id" {
        return Err(parse_err(path, 1, "header must be `id,f0,f1,...`"));
    }
    for (i, c) in cols[1..].iter().enumerate() {
        if *c != format!("f{i}") {
            return Err(parse_err(
                path,
                1,
                format!("header column {} must be `f{i}`, got `{c}`", i + 1),
            ));
        }
    }
    let dim = cols.len() - 1;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, row) in lines[1..].iter().enumerate() {
        let line_no = i + 2;
        if row.is_empty() {
            continue;
        }
        let cells: Vec<&str> = row.split(',').collect();
        if cells.len() != dim + 1 {
            return Err(parse_err(
                path,
                line_no,
                format!("row has {} cells, expected {}", cells.len(), dim + 1),
            ));
        }
        let id = cells[0].trim().to_string();
        if id.is_empty() {
            return Err(parse_err(path, line_no, "empty id"));
        }
        if !seen.insert(id.clone()) {
            return Err(parse_err(path, line_no, format!("duplicate id `{id}`")));
        }
        let mut values = Vec::with_capacity(dim);
        for (j, cell) in cells[1..].iter().enumerate() {
            values.push(parse_cell(path, line_no, &format!("f{j}"), cell)?);
        }
        out.push(FeatureVector { id, values });
    }
    Ok(out)
}

/// Load a target CSV (`id,v0,...,v{M-1}[,tags]`), preserving row order.
pub fn load_targets(path: &Path) -> Result<Vec<TargetRecord>> {
    let lines = read_lines(path)?;
    let header = lines
        .first()
        .ok_or_else(|| parse_err(path, 1, "empty file, expected header `id,v0,...`"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 2 || cols[0] != "id" {
        return Err(parse_err(path, 1, "header must be `id,v0,v1,...[,tags]`"));
    }
    let has_tags = *cols.last().unwrap() == "tags";
    let value_cols = if has_tags {
        &cols[1..cols.len() - 1]
    } else {
        &cols[1..]
    };
    if value_cols.is_empty() {
        return Err(parse_err(path, 1, "at least one value column required"));
    }
    for (i, c) in value_cols.iter().enumerate() {
        if *c != format!("v{i}") {
            return Err(parse_err(
                path,
                1,
                format!("header column {} must be `v{i}`, got `{c}`", i + 1),
            ));
        }
    }
    let dim = value_cols.len();
    let expected_cells = dim + 1 + usize::from(has_tags);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, row) in lines[1..].iter().enumerate() {
        let line_no = i + 2;
        if row.is_empty() {
            continue;
        }
        let cells: Vec<&str> = row.split(',').collect();
        if cells.len() != expected_cells {
            return Err(parse_err(
                path,
                line_no,
                format!("row has {} cells, expected {expected_cells}", cells.len()),
            ));
        }
        let id = cells[0].trim().to_string();
        if id.is_empty() {
            return Err(parse_err(path, line_no, "empty id"));
        }
        if !seen.insert(id.clone()) {
            return Err(parse_err(path, line_no, format!("duplicate id `{id}`")));
        }
        let mut values = Vec::with_capacity(dim);
        for (j, cell) in cells[1..1 + dim].iter().enumerate() {
            values.push(parse_cell(path, line_no, &format!("v{j}"), cell)?);
        }
        let tags = if has_tags {
            cells[1 + dim]
                .split(';')
                .map(|t| t.trim().to_string())
                .filter(|t| !t.is_empty())
                .collect()
        } else {
            BTreeSet::new()
        };
        out.push(TargetRecord {
            target: VfTarget { id, values },
            tags,
        });
    }
    Ok(out)
}

/// Full-precision float formatting: `{}` is the shortest string that parses
/// back to the same f64, so write/load round-trips are exact.
fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Write a feature CSV in the format [`load_features`] reads.
pub fn write_features(path: &Path, features: &[FeatureVector]) -> Result<()> {
    let dim = features.first().map_or(0, FeatureVector::dim);
    let mut out = String::from("id");
    for i in 0..dim {
        out.push_str(&format!(",f{i}"));
    }
    out.push('\n');
    for f in features {
        f.validate()?;
        if f.dim() != dim {
            return Err(Error::shape("write_features dims", dim, f.dim()));
        }
        out.push_str(&f.id);
        for v in &f.values {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

/// Write a target CSV; the tags column is included only when some record
/// actually carries tags.
pub fn write_targets(path: &Path, records: &[TargetRecord]) -> Result<()> {
    let dim = records.first().map_or(0, |r| r.target.dim());
    let any_tags = records.iter().any(|r| !r.tags.is_empty());
    let mut out = String::from("id");
    for i in 0..dim {
        out.push_str(&format!(",v{i}"));
    }
    if any_tags {
        out.push_str(",tags");
    }
    out.push('\n');
    for r in records {
        r.target.validate()?;
        if r.target.dim() != dim {
            return Err(Error::shape("write_targets dims", dim, r.target.dim()));
        }
        out.push_str(&r.target.id);
        for v in &r.target.values {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        if any_tags {
            out.push(',');
            let tags: Vec<&str> = r.tags.iter().map(String::as_str).collect();
            out.push_str(&tags.join(";"));
        }
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

/// Pair features with targets by id (feature order wins) into a dataset.
pub fn assemble(features: Vec<FeatureVector>, targets: Vec<TargetRecord>) -> Result<Dataset> {
    if features.len() != targets.len() {
        return Err(Error::Config(format!(
            "{} features but {} targets",
            features.len(),
            targets.len()
        )));
    }
    let mut by_id: HashMap<String, TargetRecord> = targets
        .into_iter()
        .map(|r| (r.target.id.clone(), r))
        .collect();
    let mut samples = Vec::with_capacity(features.len());
    for f in features {
        let rec = by_id
            .remove(&f.id)
            .ok_or_else(|| Error::Config(format!("no target for feature id `{}`", f.id)))?;
        samples.push(Sample {
            feature: f,
            target: rec.target,
            clean_feature: None,
            tags: rec.tags,
        });
    }
    Dataset::new(samples)
}
