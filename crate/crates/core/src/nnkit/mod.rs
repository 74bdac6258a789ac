//! Minimal feedforward kit: dense layers, ReLU, reverse-mode gradients, an
//! adaptive-moment optimizer and a finite-difference gradient checker.
//!
//! Everything is f64. The divergence term of the risk estimator is a small
//! difference of large numbers, so single precision is not an option here.
//!
//! Conventions:
//! - weights are row-major `[out_dim x in_dim]`
//! - ReLU's derivative at exactly 0 is 0, keeping gradients deterministic
//! - parameter vectors flatten as, per layer, weight rows then bias

mod gradcheck;
mod optim;

pub use gradcheck::{finite_diff_gradient, grad_check, max_rel_err, FD_STEP};
pub use optim::{Adam, AdamConfig};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Activation applied elementwise after a dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => {
                if v > 0.0 {
                    v
                } else {
                    0.0
                }
            }
            Activation::Identity => v,
        }
    }

    // Derivative as a function of the pre-activation; ReLU'(0) = 0.
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// A dense affine map `y = Wx + b` with row-major weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    /// Zero-initialized layer.
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        DenseLayer {
            in_dim,
            out_dim,
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    /// Uniform init in +/- sqrt(6 / (fan_in + fan_out)), zero bias.
    pub fn glorot<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weight = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        DenseLayer {
            in_dim,
            out_dim,
            weight,
            bias: vec![0.0; out_dim],
        }
    }

    pub fn from_parts(in_dim: usize, out_dim: usize, weight: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weight.len() != in_dim * out_dim {
            return Err(Error::shape("dense weight", in_dim * out_dim, weight.len()));
        }
        if bias.len() != out_dim {
            return Err(Error::shape("dense bias", out_dim, bias.len()));
        }
        if !weight.iter().chain(bias.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("dense layer parameters".into()));
        }
        Ok(DenseLayer {
            in_dim,
            out_dim,
            weight,
            bias,
        })
    }

    /// Identity map (requires square shape).
    pub fn identity(dim: usize) -> Self {
        let mut layer = DenseLayer::zeros(dim, dim);
        for i in 0..dim {
            layer.weight[i * dim + i] = 1.0;
        }
        layer
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn weight_row(&self, r: usize) -> &[f64] {
        &self.weight[r * self.in_dim..(r + 1) * self.in_dim]
    }

    pub fn num_params(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    /// `y = Wx + b`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim {
            return Err(Error::shape("dense input", self.in_dim, x.len()));
        }
        let mut out = self.bias.clone();
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.weight[r * self.in_dim..(r + 1) * self.in_dim];
            *o += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        Ok(out)
    }

    /// Gradients of a scalar loss through `y = Wx + b` given `dL/dy`.
    /// Returns the parameter gradients and `dL/dx`.
    pub fn backward(&self, x: &[f64], grad_out: &[f64]) -> Result<(LayerGrads, Vec<f64>)> {
        if x.len() != self.in_dim {
            return Err(Error::shape("dense backward input", self.in_dim, x.len()));
        }
        if grad_out.len() != self.out_dim {
            return Err(Error::shape("dense backward grad", self.out_dim, grad_out.len()));
        }
        let mut grads = LayerGrads::zeros(self.in_dim, self.out_dim);
        let mut grad_in = vec![0.0; self.in_dim];
        for (r, &g) in grad_out.iter().enumerate() {
            grads.bias[r] = g;
            let w_row = &self.weight[r * self.in_dim..(r + 1) * self.in_dim];
            let g_row = &mut grads.weight[r * self.in_dim..(r + 1) * self.in_dim];
            for c in 0..self.in_dim {
                g_row[c] = g * x[c];
                grad_in[c] += w_row[c] * g;
            }
        }
        Ok((grads, grad_in))
    }
}

/// Gradient buffer shaped like one [`DenseLayer`].
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerGrads {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        LayerGrads {
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    pub fn zeros_like(layer: &DenseLayer) -> Self {
        LayerGrads::zeros(layer.in_dim, layer.out_dim)
    }

    pub fn add_scaled(&mut self, other: &LayerGrads, factor: f64) {
        for (a, b) in self.weight.iter_mut().zip(&other.weight) {
            *a += factor * b;
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a += factor * b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.weight.iter_mut().chain(self.bias.iter_mut()) {
            *v *= factor;
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = self.weight.clone();
        out.extend_from_slice(&self.bias);
        out
    }
}

/// One MLP stage: a dense layer plus its activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpLayer {
    pub dense: DenseLayer,
    pub activation: Activation,
}

/// A feedforward stack of dense layers. An empty stack is the identity map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<MlpLayer>,
}

/// Intermediate values from [`Mlp::forward`], sufficient for `backward`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Vec<f64>>,
    preacts: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

/// Per-layer gradient buffers shaped like an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<LayerGrads>,
}

impl MlpGrads {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        MlpGrads {
            layers: mlp.layers.iter().map(|l| LayerGrads::zeros_like(&l.dense)).collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &MlpGrads, factor: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.add_scaled(b, factor);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.scale(factor);
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(&l.weight);
            out.extend_from_slice(&l.bias);
        }
        out
    }
}

impl Mlp {
    /// Build from explicit layers; adjacent dimensions must chain.
    pub fn new(layers: Vec<MlpLayer>) -> Result<Self> {
        for pair in layers.windows(2) {
            if pair[0].dense.out_dim != pair[1].dense.in_dim {
                return Err(Error::shape(
                    "mlp layer chain",
                    pair[0].dense.out_dim,
                    pair[1].dense.in_dim,
                ));
            }
        }
        Ok(Mlp { layers })
    }

    /// Glorot-initialized MLP with `dims.len() - 1` layers.
    pub fn with_dims<R: Rng + ?Sized>(
        dims: &[usize],
        activations: &[Activation],
        rng: &mut R,
    ) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Config("mlp needs at least two dims".into()));
        }
        if activations.len() != dims.len() - 1 {
            return Err(Error::shape("mlp activations", dims.len() - 1, activations.len()));
        }
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(pair, &activation)| MlpLayer {
                dense: DenseLayer::glorot(pair[0], pair[1], rng),
                activation,
            })
            .collect();
        Mlp::new(layers)
    }

    pub fn layers(&self) -> &[MlpLayer] {
        &self.layers
    }

    pub fn is_identity(&self) -> bool {
        self.layers.is_empty()
    }

    /// Input dimension; `None` for the empty (identity) stack.
    pub fn input_dim(&self) -> Option<usize> {
        self.layers.first().map(|l| l.dense.in_dim)
    }

    pub fn output_dim(&self) -> Option<usize> {
        self.layers.last().map(|l| l.dense.out_dim)
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.dense.num_params()).sum()
    }

    /// Forward pass returning the output and a cache for `backward`.
    pub fn forward(&self, x: &[f64]) -> Result<ForwardCache> {
        if let Some(d) = self.input_dim() {
            if x.len() != d {
                return Err(Error::shape("mlp input", d, x.len()));
            }
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut preacts = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_vec();
        for layer in &self.layers {
            let pre = layer.dense.apply(&cur)?;
            inputs.push(cur);
            cur = pre.iter().map(|&v| layer.activation.apply(v)).collect();
            preacts.push(pre);
        }
        Ok(ForwardCache {
            inputs,
            preacts,
            output: cur,
        })
    }

    /// Forward pass without keeping the cache.
    pub fn output(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.output)
    }

    fn check_cache(&self, cache: &ForwardCache) -> Result<()> {
        if cache.inputs.len() != self.layers.len() || cache.preacts.len() != self.layers.len() {
            return Err(Error::shape("forward cache layers", self.layers.len(), cache.inputs.len()));
        }
        for (layer, (inp, pre)) in self.layers.iter().zip(cache.inputs.iter().zip(&cache.preacts)) {
            if inp.len() != layer.dense.in_dim || pre.len() != layer.dense.out_dim {
                return Err(Error::shape("forward cache dims", layer.dense.in_dim, inp.len()));
            }
        }
        Ok(())
    }

    /// Exact reverse-mode gradients for a scalar loss, given `dL/doutput`.
    /// Returns parameter gradients and `dL/dinput`.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &[f64]) -> Result<(MlpGrads, Vec<f64>)> {
        self.check_cache(cache)?;
        let out_dim = self.output_dim().unwrap_or(grad_out.len());
        if grad_out.len() != out_dim {
            return Err(Error::shape("mlp backward grad", out_dim, grad_out.len()));
        }
        let mut grads = MlpGrads::zeros_like(self);
        let mut upstream = grad_out.to_vec();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let pre = &cache.preacts[idx];
            let grad_pre: Vec<f64> = upstream
                .iter()
                .zip(pre)
                .map(|(g, &p)| g * layer.activation.derivative(p))
                .collect();
            let (layer_grads, grad_in) = layer.dense.backward(&cache.inputs[idx], &grad_pre)?;
            grads.layers[idx] = layer_grads;
            upstream = grad_in;
        }
        Ok((grads, upstream))
    }

    /// Vector-Jacobian product only (`dL/dinput`), skipping parameter grads.
    pub fn input_gradient(&self, cache: &ForwardCache, grad_out: &[f64]) -> Result<Vec<f64>> {
        self.check_cache(cache)?;
        let out_dim = self.output_dim().unwrap_or(grad_out.len());
        if grad_out.len() != out_dim {
            return Err(Error::shape("mlp vjp grad", out_dim, grad_out.len()));
        }
        let mut upstream = grad_out.to_vec();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let pre = &cache.preacts[idx];
            let dense = &layer.dense;
            let mut grad_in = vec![0.0; dense.in_dim];
            for (r, (&g, &p)) in upstream.iter().zip(pre).enumerate() {
                let gp = g * layer.activation.derivative(p);
                if gp == 0.0 {
                    continue;
                }
                let row = dense.weight_row(r);
                for c in 0..dense.in_dim {
                    grad_in[c] += row[c] * gp;
                }
            }
            upstream = grad_in;
        }
        Ok(upstream)
    }

    /// Flatten parameters: per layer, weight rows then bias.
    pub fn params_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(&l.dense.weight);
            out.extend_from_slice(&l.dense.bias);
        }
        out
    }

    pub fn set_params_vec(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::shape("mlp params", self.num_params(), params.len()));
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let w = l.dense.weight.len();
            l.dense.weight.copy_from_slice(&params[offset..offset + w]);
            offset += w;
            let b = l.dense.bias.len();
            l.dense.bias.copy_from_slice(&params[offset..offset + b]);
            offset += b;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn layer(in_dim: usize, out_dim: usize, weight: &[f64], bias: &[f64]) -> DenseLayer {
        DenseLayer::from_parts(in_dim, out_dim, weight.to_vec(), bias.to_vec()).unwrap()
    }

    fn single(dense: DenseLayer, activation: Activation) -> Mlp {
        Mlp::new(vec![MlpLayer { dense, activation }]).unwrap()
    }

    #[test]
    fn identity_layer_passes_through() {
        let mlp = single(DenseLayer::identity(2), Activation::Identity);
        assert_eq!(mlp.output(&[1.0, -2.0]).unwrap(), vec![1.0, -2.0]);
    }

    #[test]
    fn relu_clamps_negatives() {
        let mlp = single(DenseLayer::identity(2), Activation::Relu);
        assert_eq!(mlp.output(&[1.0, -2.0]).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn hand_computed_affine() {
        let mlp = single(layer(2, 2, &[1.0, 1.0, 0.0, 2.0], &[0.5, 0.0]), Activation::Identity);
        assert_eq!(mlp.output(&[1.0, 2.0]).unwrap(), vec![3.5, 4.0]);
    }

    #[test]
    fn forward_rejects_wrong_dim() {
        let mlp = single(DenseLayer::identity(3), Activation::Identity);
        assert!(matches!(mlp.output(&[1.0]), Err(Error::Shape { .. })));
    }

    #[test]
    fn linear_backward_is_transpose() {
        let dense = layer(2, 2, &[1.0, 2.0, 3.0, 4.0], &[0.0, 0.0]);
        let mlp = single(dense, Activation::Identity);
        let cache = mlp.forward(&[0.3, -0.7]).unwrap();
        let (_, grad_in) = mlp.backward(&cache, &[1.0, -1.0]).unwrap();
        // W^T g with W = [[1,2],[3,4]], g = (1,-1) -> (1-3, 2-4) = (-2,-2)
        assert_eq!(grad_in, vec![-2.0, -2.0]);
    }

    #[test]
    fn zero_grad_out_gives_zero_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mlp = Mlp::with_dims(&[3, 4, 3], &[Activation::Relu, Activation::Identity], &mut rng)
            .unwrap();
        let cache = mlp.forward(&[0.1, 0.2, -0.3]).unwrap();
        let (grads, grad_in) = mlp.backward(&cache, &[0.0, 0.0, 0.0]).unwrap();
        assert!(grads.to_flat().iter().all(|&g| g == 0.0));
        assert!(grad_in.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn backward_rejects_mismatched_cache() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = Mlp::with_dims(&[3, 4, 3], &[Activation::Relu, Activation::Identity], &mut rng)
            .unwrap();
        let b = Mlp::with_dims(&[3, 3], &[Activation::Identity], &mut rng).unwrap();
        let cache = a.forward(&[0.1, 0.2, -0.3]).unwrap();
        assert!(b.backward(&cache, &[0.0; 3]).is_err());
    }

    #[test]
    fn input_gradient_matches_backward() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mlp = Mlp::with_dims(&[4, 6, 4], &[Activation::Relu, Activation::Identity], &mut rng)
            .unwrap();
        let x: Vec<f64> = (0..4).map(|_| rng.sample(StandardNormal)).collect();
        let g: Vec<f64> = (0..4).map(|_| rng.sample(StandardNormal)).collect();
        let cache = mlp.forward(&x).unwrap();
        let (_, grad_in) = mlp.backward(&cache, &g).unwrap();
        let vjp = mlp.input_gradient(&cache, &g).unwrap();
        for (a, b) in grad_in.iter().zip(&vjp) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn relu_output_is_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let mlp = Mlp::with_dims(&[5, 7], &[Activation::Relu], &mut rng).unwrap();
            let x: Vec<f64> = (0..5).map(|_| rng.sample::<f64, _>(StandardNormal) * 3.0).collect();
            assert!(mlp.output(&x).unwrap().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn forward_is_pure() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mlp = Mlp::with_dims(&[4, 4, 4], &[Activation::Relu, Activation::Identity], &mut rng)
            .unwrap();
        let x = [0.5, -1.0, 2.0, 0.0];
        assert_eq!(mlp.output(&x).unwrap(), mlp.output(&x).unwrap());
    }

    #[test]
    fn params_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut mlp = Mlp::with_dims(&[3, 5, 3], &[Activation::Relu, Activation::Identity], &mut rng)
            .unwrap();
        let params = mlp.params_vec();
        assert_eq!(params.len(), mlp.num_params());
        let mut shifted = params.clone();
        for v in &mut shifted {
            *v += 1.0;
        }
        mlp.set_params_vec(&shifted).unwrap();
        assert_eq!(mlp.params_vec(), shifted);
        mlp.set_params_vec(&params).unwrap();
        assert_eq!(mlp.params_vec(), params);
    }

    #[test]
    fn empty_mlp_is_identity_with_no_params() {
        let mlp = Mlp::new(vec![]).unwrap();
        assert_eq!(mlp.num_params(), 0);
        assert_eq!(mlp.output(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
    }
}
