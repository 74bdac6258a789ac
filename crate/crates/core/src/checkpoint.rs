//! JSON model checkpoints: layer dims and row-major weights, optimizer
//! state, metadata (K, H, M, lambda, sigma, epsilon), the run seed, and a
//! format-version field.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::atomic_write;
use crate::nnkit::{Adam, DenseLayer, Mlp};
use crate::red::RedModel;
use crate::sure::{ProbeVariance, SureConfig};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Denoising encoder plus regression head.
    Red,
    /// Regression head alone.
    Regression,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub kind: ModelKind,
    pub feature_dim: usize,
    pub hidden_dim: Option<usize>,
    pub target_dim: usize,
    pub lambda: f64,
    pub sigma: f64,
    pub epsilon: Option<f64>,
    pub probes_per_sample: usize,
    pub probe_seed: u64,
    pub probe_variance: ProbeVariance,
    /// Run seed the model was trained with.
    pub seed: u64,
    pub encoder: Option<Mlp>,
    pub head: DenseLayer,
    pub optimizer: Option<Adam>,
}

impl Checkpoint {
    pub fn from_red_model(model: &RedModel, lambda: f64, seed: u64, optimizer: Option<Adam>) -> Self {
        Checkpoint {
            format_version: FORMAT_VERSION,
            kind: ModelKind::Red,
            feature_dim: model.feature_dim(),
            hidden_dim: model.hidden_dim(),
            target_dim: model.target_dim(),
            lambda,
            sigma: model.sure.sigma,
            epsilon: model.sure.epsilon,
            probes_per_sample: model.sure.probes_per_sample,
            probe_seed: model.sure.probe_seed,
            probe_variance: model.sure.probe_variance,
            seed,
            encoder: Some(model.encoder.clone()),
            head: model.head.clone(),
            optimizer,
        }
    }

    pub fn from_regression(head: &DenseLayer, sigma: f64, seed: u64, optimizer: Option<Adam>) -> Self {
        Checkpoint {
            format_version: FORMAT_VERSION,
            kind: ModelKind::Regression,
            feature_dim: head.in_dim(),
            hidden_dim: None,
            target_dim: head.out_dim(),
            lambda: 0.0,
            sigma,
            epsilon: None,
            probes_per_sample: 1,
            probe_seed: 0,
            probe_variance: ProbeVariance::Unit,
            seed,
            encoder: None,
            head: head.clone(),
            optimizer,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        match (&self.kind, &self.encoder) {
            (ModelKind::Red, None) => {
                return Err(Error::Checkpoint("red checkpoint missing its encoder".into()))
            }
            (ModelKind::Regression, Some(_)) => {
                return Err(Error::Checkpoint(
                    "regression checkpoint must not carry an encoder".into(),
                ))
            }
            _ => {}
        }
        if let Some(enc) = &self.encoder {
            if enc.input_dim() != Some(self.feature_dim)
                || enc.output_dim() != Some(self.feature_dim)
            {
                return Err(Error::Checkpoint(format!(
                    "encoder dims {:?} -> {:?} do not match feature_dim {}",
                    enc.input_dim(),
                    enc.output_dim(),
                    self.feature_dim
                )));
            }
        }
        if self.head.in_dim() != self.feature_dim || self.head.out_dim() != self.target_dim {
            return Err(Error::Checkpoint(format!(
                "head dims {}x{} do not match feature_dim {} / target_dim {}",
                self.head.out_dim(),
                self.head.in_dim(),
                self.feature_dim,
                self.target_dim
            )));
        }
        Ok(())
    }

    pub fn sure_config(&self) -> SureConfig {
        SureConfig {
            sigma: self.sigma,
            epsilon: self.epsilon,
            probes_per_sample: self.probes_per_sample,
            probe_seed: self.probe_seed,
            probe_variance: self.probe_variance,
        }
    }

    /// Rebuild the full model; errors on regression-only checkpoints.
    pub fn to_red_model(&self) -> Result<RedModel> {
        self.validate()?;
        let encoder = self
            .encoder
            .clone()
            .ok_or_else(|| Error::Checkpoint("checkpoint has no encoder".into()))?;
        RedModel::new(encoder, self.head.clone(), self.sure_config())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        atomic_write(path, json.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.display()),
            ))
        })?;
        let ckpt: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        ckpt.validate()?;
        Ok(ckpt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn red_checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(80);
        let model = RedModel::init(6, 4, 3, SureConfig::new(1.5).unwrap(), &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        Checkpoint::from_red_model(&model, 0.5, 42, None)
            .save(&path)
            .unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded.kind, ModelKind::Red);
        assert_eq!(loaded.lambda, 0.5);
        assert_eq!(loaded.seed, 42);
        assert_eq!(loaded.hidden_dim, Some(4));
        let restored = loaded.to_red_model().unwrap();
        assert_eq!(restored.encoder, model.encoder);
        assert_eq!(restored.head, model.head);
        let z = [0.1, -0.2, 0.3, 0.4, -0.5, 0.6];
        assert_eq!(model.predict(&z).unwrap(), restored.predict(&z).unwrap());
    }

    #[test]
    fn regression_checkpoint_round_trip() {
        let head = DenseLayer::glorot(5, 2, &mut ChaCha8Rng::seed_from_u64(81));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("head.json");
        Checkpoint::from_regression(&head, 1.0, 7, None).save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded.kind, ModelKind::Regression);
        assert_eq!(loaded.head, head);
        assert!(loaded.to_red_model().is_err());
    }

    #[test]
    fn version_and_dim_mismatches_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(82);
        let model = RedModel::init(4, 4, 2, SureConfig::new(1.0).unwrap(), &mut rng).unwrap();
        let mut ckpt = Checkpoint::from_red_model(&model, 1.0, 0, None);
        ckpt.format_version = 99;
        assert!(ckpt.validate().is_err());
        let mut ckpt = Checkpoint::from_red_model(&model, 1.0, 0, None);
        ckpt.feature_dim = 5;
        assert!(ckpt.validate().is_err());
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = r#"{"format_version":1,"unknown_field":true}"#;
        assert!(serde_json::from_str::<Checkpoint>(text).is_err());
    }
}
