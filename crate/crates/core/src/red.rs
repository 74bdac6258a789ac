//! Joint training of the denoising encoder and the regression head.
//!
//! The per-sample objective is the regression error `||f(h(z)) - y||^2 / M`
//! plus `lambda` times the Monte-Carlo risk estimate of the encoder on the
//! raw feature vector (see [`crate::sure`]). With `lambda = 0` the risk term
//! is skipped entirely: the step loss and gradients are exactly those of the
//! regression term, and the probe stream is never consumed.
//!
//! Determinism: a run is a pure function of its config. The run seed drives
//! init (stream 0) and epoch shuffling (stream 1); probes come from the
//! separate `probe_seed`. Gradients accumulate in shuffled-index order.

use rand::Rng;
use rand::SeedableRng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nnkit::{Activation, Adam, AdamConfig, DenseLayer, LayerGrads, Mlp, MlpGrads};
use crate::sure::{coordinate_std, mc_sure_loss, mc_sure_loss_with_probe, SureConfig};

const STREAM_INIT: u64 = 0;
const STREAM_SHUFFLE: u64 = 1;
const STREAM_PROBES: u64 = 2;

/// Denoising encoder (K -> H -> K, ReLU hidden) plus linear head (K -> M).
#[derive(Debug, Clone, PartialEq)]
pub struct RedModel {
    pub encoder: Mlp,
    pub head: DenseLayer,
    pub sure: SureConfig,
}

impl RedModel {
    pub fn new(encoder: Mlp, head: DenseLayer, sure: SureConfig) -> Result<Self> {
        sure.validate()?;
        if let (Some(i), Some(o)) = (encoder.input_dim(), encoder.output_dim()) {
            if i != o {
                return Err(Error::shape("encoder output dim", i, o));
            }
            if head.in_dim() != o {
                return Err(Error::shape("head input dim", o, head.in_dim()));
            }
        }
        Ok(RedModel {
            encoder,
            head,
            sure,
        })
    }

    /// Fresh model with a one-hidden-layer ReLU encoder of width `hidden`.
    pub fn init<R: Rng + ?Sized>(
        k: usize,
        hidden: usize,
        m: usize,
        sure: SureConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let encoder = Mlp::with_dims(
            &[k, hidden, k],
            &[Activation::Relu, Activation::Identity],
            rng,
        )?;
        let head = DenseLayer::glorot(k, m, rng);
        RedModel::new(encoder, head, sure)
    }

    pub fn feature_dim(&self) -> usize {
        self.encoder.input_dim().unwrap_or_else(|| self.head.in_dim())
    }

    pub fn hidden_dim(&self) -> Option<usize> {
        self.encoder.layers().first().map(|l| l.dense.out_dim())
    }

    pub fn target_dim(&self) -> usize {
        self.head.out_dim()
    }

    /// `h(z)` — the denoised features.
    pub fn denoise(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.encoder.output(z)
    }

    /// `f(h(z))` — predicted targets from raw features.
    pub fn predict(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.head.apply(&self.encoder.output(z)?)
    }

    /// Exact count of trainable scalars.
    pub fn count_params(&self) -> usize {
        self.encoder.num_params() + self.head.num_params()
    }

    /// Encoder parameters followed by head weight then head bias.
    pub fn params_vec(&self) -> Vec<f64> {
        let mut out = self.encoder.params_vec();
        out.extend_from_slice(&self.head.weight);
        out.extend_from_slice(&self.head.bias);
        out
    }

    pub fn set_params_vec(&mut self, params: &[f64]) -> Result<()> {
        let ne = self.encoder.num_params();
        if params.len() != self.count_params() {
            return Err(Error::shape("red params", self.count_params(), params.len()));
        }
        self.encoder.set_params_vec(&params[..ne])?;
        let nw = self.head.weight.len();
        self.head.weight.copy_from_slice(&params[ne..ne + nw]);
        self.head.bias.copy_from_slice(&params[ne + nw..]);
        Ok(())
    }
}

/// Settings for one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Trade-off weight of the denoising loss.
    pub lambda: f64,
    /// Maximum epochs.
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Encoder hidden width; `None` means equal to the feature dimension.
    pub hidden: Option<usize>,
    /// Early stopping: epochs without a validation-RMSE improvement.
    pub patience: usize,
    pub sure: SureConfig,
}

impl TrainConfig {
    pub fn new(sigma: f64) -> Result<Self> {
        Ok(TrainConfig {
            lambda: 1.0,
            epochs: 1000,
            batch_size: 32,
            learning_rate: 1e-3,
            seed: 0,
            hidden: None,
            patience: 50,
            sure: SureConfig::new(sigma)?,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::Config(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::Config(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be >= 1".into()));
        }
        if self.hidden == Some(0) {
            return Err(Error::Config("hidden width must be >= 1".into()));
        }
        self.sure.validate()
    }
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_mse: f64,
    pub train_mcsure: f64,
    pub val_rmse: f64,
    pub val_mae: f64,
    pub val_pcc: f64,
    pub head_weight_l2: f64,
    pub feature_entropy: f64,
}

/// Per-epoch records plus the epoch the returned model was taken from.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingLog {
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
}

impl TrainingLog {
    pub const CSV_HEADER: &'static str =
        "epoch,train_loss,train_mse,train_mcsure,val_rmse,val_mae,val_pcc,head_weight_l2,feature_entropy";

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.epoch,
                r.train_loss,
                r.train_mse,
                r.train_mcsure,
                r.val_rmse,
                r.val_mae,
                r.val_pcc,
                r.head_weight_l2,
                r.feature_entropy
            ));
        }
        out
    }
}

/// Loss and gradients of the full per-sample objective with a fixed probe,
/// for verification against finite differences. Returns
/// `(total loss, regression part, risk part, encoder grads, head grads)`.
pub fn red_loss_and_grads(
    encoder: &Mlp,
    head: &DenseLayer,
    z: &[f64],
    y: &[f64],
    lambda: f64,
    sigma: f64,
    epsilon: f64,
    probe: &[f64],
) -> Result<(f64, f64, f64, MlpGrads, LayerGrads)> {
    let (reg_loss, enc_grads_reg, head_grads) = regression_part(Some(encoder), head, z, y)?;
    let mut enc_grads = enc_grads_reg.expect("encoder present");
    if lambda > 0.0 {
        let (sure_loss, sure_grads) = mc_sure_loss_with_probe(encoder, z, sigma, epsilon, probe)?;
        enc_grads.add_scaled(&sure_grads, lambda);
        Ok((
            reg_loss + lambda * sure_loss,
            reg_loss,
            sure_loss,
            enc_grads,
            head_grads,
        ))
    } else {
        Ok((reg_loss, reg_loss, 0.0, enc_grads, head_grads))
    }
}

/// Regression term `||f(h(z)) - y||^2 / M` and its gradients.
fn regression_part(
    encoder: Option<&Mlp>,
    head: &DenseLayer,
    z: &[f64],
    y: &[f64],
) -> Result<(f64, Option<MlpGrads>, LayerGrads)> {
    if y.len() != head.out_dim() {
        return Err(Error::shape("target dim", head.out_dim(), y.len()));
    }
    let m = y.len() as f64;
    let (denoised, cache) = match encoder {
        Some(enc) => {
            let cache = enc.forward(z)?;
            (cache.output.clone(), Some(cache))
        }
        None => (z.to_vec(), None),
    };
    let pred = head.apply(&denoised)?;
    let residual: Vec<f64> = pred.iter().zip(y).map(|(p, t)| p - t).collect();
    let loss = residual.iter().map(|r| r * r).sum::<f64>() / m;
    let grad_pred: Vec<f64> = residual.iter().map(|r| 2.0 / m * r).collect();
    let (head_grads, grad_denoised) = head.backward(&denoised, &grad_pred)?;
    let enc_grads = match (encoder, cache) {
        (Some(enc), Some(cache)) => Some(enc.backward(&cache, &grad_denoised)?.0),
        _ => None,
    };
    Ok((loss, enc_grads, head_grads))
}

fn flatten_params(encoder: &Option<Mlp>, head: &DenseLayer) -> Vec<f64> {
    let mut out = encoder.as_ref().map(Mlp::params_vec).unwrap_or_default();
    out.extend_from_slice(&head.weight);
    out.extend_from_slice(&head.bias);
    out
}

fn unflatten_params(params: &[f64], encoder: &mut Option<Mlp>, head: &mut DenseLayer) -> Result<()> {
    let ne = encoder.as_ref().map_or(0, Mlp::num_params);
    if let Some(enc) = encoder {
        enc.set_params_vec(&params[..ne])?;
    }
    let nw = head.weight.len();
    head.weight.copy_from_slice(&params[ne..ne + nw]);
    head.bias.copy_from_slice(&params[ne + nw..]);
    Ok(())
}

/// Predictions and truths for a whole dataset (optionally through an encoder).
pub fn predict_rows(
    encoder: Option<&Mlp>,
    head: &DenseLayer,
    ds: &Dataset,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let mut preds = Vec::with_capacity(ds.len());
    let mut truths = Vec::with_capacity(ds.len());
    for s in ds.samples() {
        let denoised = match encoder {
            Some(enc) => enc.output(&s.feature.values)?,
            None => s.feature.values.clone(),
        };
        preds.push(head.apply(&denoised)?);
        truths.push(s.target.values.clone());
    }
    Ok((preds, truths))
}

/// Denoised features for a whole dataset.
pub fn denoise_rows(encoder: &Mlp, ds: &Dataset) -> Result<Vec<Vec<f64>>> {
    ds.samples()
        .iter()
        .map(|s| encoder.output(&s.feature.values))
        .collect()
}

/// Shared training loop behind [`red_train`] and the plain-regression
/// baseline. `with_encoder = false` trains the head alone and never touches
/// the denoising loss.
pub(crate) fn train_engine(
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig,
    with_encoder: bool,
) -> Result<(Option<Mlp>, DenseLayer, Adam, TrainingLog)> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let k = train.feature_dim();
    let m = train.target_dim();
    if val.feature_dim() != k {
        return Err(Error::shape("val feature dim", k, val.feature_dim()));
    }
    if val.target_dim() != m {
        return Err(Error::shape("val target dim", m, val.target_dim()));
    }

    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    init_rng.set_stream(STREAM_INIT);
    let mut encoder = if with_encoder {
        let hidden = cfg.hidden.unwrap_or(k);
        Some(Mlp::with_dims(
            &[k, hidden, k],
            &[Activation::Relu, Activation::Identity],
            &mut init_rng,
        )?)
    } else {
        None
    };
    let mut head = DenseLayer::glorot(k, m, &mut init_rng);

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(STREAM_SHUFFLE);
    let mut probe_rng = ChaCha8Rng::seed_from_u64(cfg.sure.probe_seed);
    probe_rng.set_stream(STREAM_PROBES);

    let use_sure = with_encoder && cfg.lambda > 0.0;
    let mut params = flatten_params(&encoder, &head);
    let mut adam = Adam::new(params.len(), AdamConfig::with_learning_rate(cfg.learning_rate))?;

    let n = train.len();
    let mut records: Vec<EpochRecord> = Vec::new();
    let mut best_rmse = f64::INFINITY;
    let mut best_params = params.clone();
    let mut best_epoch = 0usize;
    let mut stale = 0usize;

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut shuffle_rng);

        let mut sum_loss = 0.0;
        let mut sum_reg = 0.0;
        let mut sum_sure = 0.0;
        for (step, batch) in order.chunks(cfg.batch_size).enumerate() {
            unflatten_params(&params, &mut encoder, &mut head)?;
            let epsilon = if use_sure {
                let std = coordinate_std(
                    batch.iter().map(|&i| train.samples()[i].feature.values.as_slice()),
                );
                cfg.sure.epsilon_for(std)
            } else {
                0.0
            };

            let mut enc_grads = encoder.as_ref().map(MlpGrads::zeros_like);
            let mut head_grads = LayerGrads::zeros_like(&head);
            let mut batch_loss = 0.0;
            for &i in batch {
                let s = &train.samples()[i];
                let (reg_loss, enc_g, head_g) =
                    regression_part(encoder.as_ref(), &head, &s.feature.values, &s.target.values)?;
                head_grads.add_scaled(&head_g, 1.0);
                if let (Some(acc), Some(g)) = (enc_grads.as_mut(), enc_g.as_ref()) {
                    acc.add_scaled(g, 1.0);
                }
                let mut sample_loss = reg_loss;
                if use_sure {
                    let enc = encoder.as_ref().expect("use_sure implies encoder");
                    let (sure_loss, sure_g) =
                        mc_sure_loss(enc, &s.feature.values, &cfg.sure, epsilon, &mut probe_rng)?;
                    enc_grads
                        .as_mut()
                        .expect("use_sure implies encoder grads")
                        .add_scaled(&sure_g, cfg.lambda);
                    sample_loss += cfg.lambda * sure_loss;
                    sum_sure += sure_loss;
                }
                batch_loss += sample_loss;
                sum_loss += sample_loss;
                sum_reg += reg_loss;
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    step,
                    value: batch_loss,
                });
            }
            let inv = 1.0 / batch.len() as f64;
            let mut grads = enc_grads.as_ref().map(MlpGrads::to_flat).unwrap_or_default();
            grads.extend_from_slice(&head_grads.to_flat());
            for g in &mut grads {
                *g *= inv;
            }
            adam.step(&mut params, &grads)?;
        }

        unflatten_params(&params, &mut encoder, &mut head)?;
        let (preds, truths) = predict_rows(encoder.as_ref(), &head, val)?;
        let val_rmse = crate::metrics::rmse(&preds, &truths)?;
        let val_mae = crate::metrics::mae(&preds, &truths)?;
        // an undefined correlation is logged as NaN rather than aborting the run
        let val_pcc = match crate::metrics::pcc(&preds, &truths) {
            Ok(v) => v,
            Err(Error::ZeroVariance(_)) => f64::NAN,
            Err(e) => return Err(e),
        };
        let features_for_entropy = match encoder.as_ref() {
            Some(enc) => denoise_rows(enc, val)?,
            None => val.samples().iter().map(|s| s.feature.values.clone()).collect(),
        };
        let feature_entropy = if features_for_entropy.len() >= 2 {
            crate::analysis::feature_entropy(&features_for_entropy)?
        } else {
            f64::NAN
        };

        let nf = n as f64;
        records.push(EpochRecord {
            epoch,
            train_loss: sum_loss / nf,
            train_mse: sum_reg / nf,
            train_mcsure: sum_sure / nf,
            val_rmse,
            val_mae,
            val_pcc,
            head_weight_l2: crate::analysis::weight_norm(&head),
            feature_entropy,
        });

        if val_rmse < best_rmse {
            best_rmse = val_rmse;
            best_params.copy_from_slice(&params);
            best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }

    unflatten_params(&best_params, &mut encoder, &mut head)?;
    Ok((
        encoder,
        head,
        adam,
        TrainingLog {
            records,
            best_epoch,
        },
    ))
}

/// Train the full pipeline; returns the model at its best validation RMSE
/// plus the per-epoch log.
pub fn red_train(train: &Dataset, val: &Dataset, cfg: &TrainConfig) -> Result<(RedModel, TrainingLog)> {
    let (encoder, head, _, log) = train_engine(train, val, cfg, true)?;
    let model = RedModel::new(encoder.expect("trained with encoder"), head, cfg.sure.clone())?;
    Ok((model, log))
}
