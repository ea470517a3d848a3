//! Fully-connected ReLU networks in NTK parameterization.
//!
//! ```text
//! h¹     = σ_W·W⁰x/√d + σ_b·b⁰,        x¹ = relu(h¹)
//! hˡ⁺¹   = σ_W·Wˡxˡ/√m + σ_b·bˡ,       xˡ⁺¹ = relu(hˡ⁺¹),  l = 1..L-1
//! f(x;w) = σ_W·Wᴸxᴸ/√m + σ_b·bᴸ
//! ```
//!
//! Parameters live in one flat vector, layer-major: for each layer `l = 0..=L`
//! the weight matrix `Wˡ` (row-major, `fan_out × fan_in`) followed by the
//! bias `bˡ`. Batched evaluation works on `n × d` input matrices and keeps a
//! [`Trace`] of the forward pass so that exact vector-Jacobian products
//! (random-feature sums), Jacobian-vector products (linearized logits) and
//! per-layer gradient factors (empirical kernels) can all be computed
//! without finite differences.

mod checkpoint;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint};
pub use train::{
    checkpoint_schedule, train_linearized, train_teacher, Adam, Batch, BatchSource, LinearData,
    LinearFit, LinearLoss, Optimizer, TeacherRun, TrainConfig,
};

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::rng;

/// Architecture and NTK-parameterization hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetConfig {
    /// Input dimension `d`.
    pub input_dim: usize,
    /// Number of hidden layers `L`.
    pub hidden_layers: usize,
    /// Hidden width `m`.
    pub width: usize,
    #[serde(default = "one")]
    pub sigma_w: f64,
    #[serde(default = "one")]
    pub sigma_b: f64,
}

fn one() -> f64 {
    1.0
}

impl NetConfig {
    pub fn new(input_dim: usize, hidden_layers: usize, width: usize) -> Self {
        Self {
            input_dim,
            hidden_layers,
            width,
            sigma_w: 1.0,
            sigma_b: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name, v: usize| {
            if v >= 1 {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    value: v as f64,
                    reason: "must be at least 1",
                })
            }
        };
        positive("input_dim", self.input_dim)?;
        positive("hidden_layers", self.hidden_layers)?;
        positive("width", self.width)?;
        if !(self.sigma_w > 0.0 && self.sigma_w.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "sigma_w",
                value: self.sigma_w,
                reason: "must be positive",
            });
        }
        if !(self.sigma_b >= 0.0 && self.sigma_b.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "sigma_b",
                value: self.sigma_b,
                reason: "must be non-negative",
            });
        }
        Ok(())
    }

    /// Layer shapes and offsets into the flat parameter vector.
    pub fn layout(&self) -> ParamLayout {
        let mut layers = Vec::with_capacity(self.hidden_layers + 1);
        let mut offset = 0;
        for l in 0..=self.hidden_layers {
            let fan_in = if l == 0 { self.input_dim } else { self.width };
            let fan_out = if l == self.hidden_layers { 1 } else { self.width };
            let weight = offset;
            let bias = weight + fan_in * fan_out;
            offset = bias + fan_out;
            layers.push(LayerShape {
                fan_in,
                fan_out,
                weight,
                bias,
                input_scale: self.sigma_w / (fan_in as f64).sqrt(),
            });
        }
        ParamLayout { layers, len: offset }
    }

    pub fn param_count(&self) -> usize {
        self.layout().len
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerShape {
    pub fan_in: usize,
    pub fan_out: usize,
    /// Offset of `Wˡ` in the flat vector.
    pub weight: usize,
    /// Offset of `bˡ` in the flat vector.
    pub bias: usize,
    /// `σ_W / √fan_in`.
    pub input_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    pub layers: Vec<LayerShape>,
    pub len: usize,
}

/// Flat parameter vector `w` together with the architecture it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    config: NetConfig,
    values: Vec<f64>,
}

impl ParamVector {
    pub fn from_values(config: NetConfig, values: Vec<f64>) -> Result<Self> {
        config.validate()?;
        check_len("parameter vector", config.param_count(), values.len())?;
        Ok(Self { config, values })
    }

    pub fn zeros(config: NetConfig) -> Self {
        let p = config.param_count();
        Self {
            config,
            values: vec![0.0; p],
        }
    }

    /// Assembles a parameter vector from per-layer `(W, b)` pairs.
    pub fn from_layers(config: NetConfig, layers: &[(Array2<f64>, Array1<f64>)]) -> Result<Self> {
        let layout = config.layout();
        check_len("layer count", layout.layers.len(), layers.len())?;
        let mut values = Vec::with_capacity(layout.len);
        for (shape, (w, b)) in layout.layers.iter().zip(layers) {
            if w.dim() != (shape.fan_out, shape.fan_in) {
                return Err(Error::DimensionMismatch {
                    context: "layer weight",
                    expected: shape.fan_out * shape.fan_in,
                    got: w.len(),
                });
            }
            check_len("layer bias", shape.fan_out, b.len())?;
            values.extend(w.iter());
            values.extend(b.iter());
        }
        Self::from_values(config, values)
    }

    /// Per-layer `(W, b)` copies; inverse of [`ParamVector::from_layers`].
    pub fn layers(&self) -> Vec<(Array2<f64>, Array1<f64>)> {
        self.config
            .layout()
            .layers
            .iter()
            .map(|sh| {
                (
                    self.weight(sh).to_owned(),
                    Array1::from(self.values[sh.bias..sh.bias + sh.fan_out].to_vec()),
                )
            })
            .collect()
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn weight(&self, sh: &LayerShape) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape(
            (sh.fan_out, sh.fan_in),
            &self.values[sh.weight..sh.weight + sh.fan_in * sh.fan_out],
        )
        .expect("layout matches parameter length")
    }

    /// `w + Δw`.
    pub fn shifted(&self, delta: &WeightDelta) -> Result<Self> {
        check_len("shifted parameters", self.len(), delta.len())?;
        let values = self
            .values
            .iter()
            .zip(delta.values())
            .map(|(w, d)| w + d)
            .collect();
        Ok(Self {
            config: self.config,
            values,
        })
    }
}

/// Which weight change a [`WeightDelta`] represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaRole {
    /// Δŵ, the student trained on finitely many samples.
    Student,
    /// Δw_*, the oracle fitted to the effective logits with unlimited data.
    Oracle,
    /// Δw_z, the fit of the zero function.
    Zero,
    /// Δw_g, the fit of the ground-truth logits.
    GroundTruth,
    /// δŵ_h, the weight response to adding hard labels.
    HardCorrection,
}

/// Flat weight change `Δw = w − w₀` in [`ParamVector`] layout.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightDelta {
    role: DeltaRole,
    values: Vec<f64>,
}

impl WeightDelta {
    pub fn new(role: DeltaRole, values: Vec<f64>) -> Self {
        Self { role, values }
    }

    pub fn zeros(role: DeltaRole, len: usize) -> Self {
        Self::new(role, vec![0.0; len])
    }

    pub fn role(&self) -> DeltaRole {
        self.role
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::norm(&self.values)
    }

    /// `self − other`, keeping the role of `self`.
    pub fn minus(&self, other: &WeightDelta) -> Result<WeightDelta> {
        check_len("weight delta difference", self.len(), other.len())?;
        Ok(WeightDelta::new(
            self.role,
            self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        ))
    }
}

/// Draws every parameter i.i.d. from `N(0, 1)`.
pub fn init_params(config: &NetConfig, seed: u64) -> Result<ParamVector> {
    config.validate()?;
    let mut rng = rng::stream(seed, &[rng::label("init")]);
    let values = (0..config.param_count())
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    Ok(ParamVector {
        config: *config,
        values,
    })
}

/// Network output for a single input.
pub fn forward(params: &ParamVector, x: &[f64]) -> Result<f64> {
    let cfg = params.config();
    check_len("network input", cfg.input_dim, x.len())?;
    let layout = cfg.layout();
    let mut a = x.to_vec();
    for (l, sh) in layout.layers.iter().enumerate() {
        let w = params.weight(sh);
        let b = &params.values[sh.bias..sh.bias + sh.fan_out];
        let mut h: Vec<f64> = w
            .rows()
            .into_iter()
            .zip(b)
            .map(|(row, bi)| {
                sh.input_scale * row.iter().zip(&a).map(|(wi, ai)| wi * ai).sum::<f64>()
                    + cfg.sigma_b * bi
            })
            .collect();
        if l + 1 < layout.layers.len() {
            h.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        a = h;
    }
    Ok(a[0])
}

/// Inputs stacked as rows of an `n × d` matrix.
pub fn stack_inputs(inputs: &[Vec<f64>], dim: usize) -> Result<Array2<f64>> {
    let mut m = Array2::zeros((inputs.len(), dim));
    for (mut row, x) in m.rows_mut().into_iter().zip(inputs) {
        check_len("input row", dim, x.len())?;
        row.assign(&ndarray::ArrayView1::from(x.as_slice()));
    }
    Ok(m)
}

/// Stored forward pass over a batch.
#[derive(Debug, Clone)]
pub struct Trace {
    /// Scaled layer inputs `σ_W·xˡ/√fan_in`, one `n × fan_in` matrix per layer.
    scaled_inputs: Vec<Array2<f64>>,
    /// Pre-activations `hˡ⁺¹`, one `n × fan_out` matrix per layer.
    pre: Vec<Array2<f64>>,
}

impl Trace {
    pub fn batch_size(&self) -> usize {
        self.pre[0].nrows()
    }

    /// Network outputs `f(xᵢ; w)`.
    pub fn outputs(&self) -> Vec<f64> {
        self.pre.last().expect("at least one layer").column(0).to_vec()
    }
}

/// Batched forward pass keeping every intermediate needed for backprop.
pub fn forward_trace(params: &ParamVector, inputs: &Array2<f64>) -> Result<Trace> {
    let cfg = params.config();
    check_len("network input", cfg.input_dim, inputs.ncols())?;
    let layout = cfg.layout();
    let nl = layout.layers.len();
    let mut scaled_inputs = Vec::with_capacity(nl);
    let mut pre = Vec::with_capacity(nl);
    let mut a = inputs.to_owned();
    for (l, sh) in layout.layers.iter().enumerate() {
        a *= sh.input_scale;
        let b = Array1::from(params.values[sh.bias..sh.bias + sh.fan_out].to_vec()) * cfg.sigma_b;
        let h = a.dot(&params.weight(sh).t()) + &b;
        let next = if l + 1 < nl { h.mapv(|v| v.max(0.0)) } else { Array2::zeros((0, 0)) };
        scaled_inputs.push(std::mem::replace(&mut a, next));
        pre.push(h);
    }
    Ok(Trace { scaled_inputs, pre })
}

/// Batched outputs `f(xᵢ; w)`.
pub fn forward_batch(params: &ParamVector, inputs: &Array2<f64>) -> Result<Vec<f64>> {
    Ok(forward_trace(params, inputs)?.outputs())
}

fn relu_mask(h: &Array2<f64>) -> Array2<f64> {
    h.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 })
}

/// Vector-Jacobian product `Σᵢ gᵢ·φ(xᵢ)` where `φ(x) = ∂f(x;w)/∂w`.
pub fn vjp(params: &ParamVector, trace: &Trace, output_grad: &[f64]) -> Result<Vec<f64>> {
    let n = trace.batch_size();
    check_len("output gradient", n, output_grad.len())?;
    let cfg = params.config();
    let layout = cfg.layout();
    let mut grad = vec![0.0; layout.len];
    let mut delta = Array2::from_shape_vec((n, 1), output_grad.to_vec()).expect("shape");
    for l in (0..layout.layers.len()).rev() {
        let sh = &layout.layers[l];
        let gw = delta.t().dot(&trace.scaled_inputs[l]);
        grad[sh.weight..sh.weight + sh.fan_in * sh.fan_out]
            .iter_mut()
            .zip(gw.iter())
            .for_each(|(g, v)| *g = *v);
        let gb = delta.sum_axis(Axis(0));
        grad[sh.bias..sh.bias + sh.fan_out]
            .iter_mut()
            .zip(gb.iter())
            .for_each(|(g, v)| *g = cfg.sigma_b * v);
        if l > 0 {
            delta = delta.dot(&params.weight(sh)) * sh.input_scale * relu_mask(&trace.pre[l - 1]);
        }
    }
    Ok(grad)
}

/// Jacobian-vector products `φ(xᵢ)ᵀ·Δw` for every row of the batch.
pub fn jvp(params: &ParamVector, trace: &Trace, direction: &[f64]) -> Result<Vec<f64>> {
    let cfg = params.config();
    let layout = cfg.layout();
    check_len("jvp direction", layout.len, direction.len())?;
    let n = trace.batch_size();
    let mut tangent: Option<Array2<f64>> = None;
    let mut out = Array2::zeros((n, 1));
    for (l, sh) in layout.layers.iter().enumerate() {
        let dw = ArrayView2::from_shape(
            (sh.fan_out, sh.fan_in),
            &direction[sh.weight..sh.weight + sh.fan_in * sh.fan_out],
        )
        .expect("shape");
        let db = Array1::from(direction[sh.bias..sh.bias + sh.fan_out].to_vec()) * cfg.sigma_b;
        let mut dh = trace.scaled_inputs[l].dot(&dw.t()) + &db;
        if let Some(t) = &tangent {
            dh = dh + t.dot(&params.weight(sh).t()) * sh.input_scale;
        }
        if l + 1 < layout.layers.len() {
            tangent = Some(dh * relu_mask(&trace.pre[l]));
        } else {
            out = dh;
        }
    }
    Ok(out.column(0).to_vec())
}

/// Random features `φ(x) = ∂f(x; w₀)/∂w`, exact via reverse-mode accumulation.
pub fn feature(params: &ParamVector, x: &[f64]) -> Result<Vec<f64>> {
    let inputs = stack_inputs(&[x.to_vec()], params.config().input_dim)?;
    let trace = forward_trace(params, &inputs)?;
    vjp(params, &trace, &[1.0])
}

/// Linearized logit `f(x; w₀) + Δwᵀφ(x)`.
pub fn linear_logit(params0: &ParamVector, delta: &WeightDelta, x: &[f64]) -> Result<f64> {
    let inputs = stack_inputs(&[x.to_vec()], params0.config().input_dim)?;
    Ok(linear_logits(params0, delta, &inputs)?[0])
}

/// Batched linearized logits.
pub fn linear_logits(
    params0: &ParamVector,
    delta: &WeightDelta,
    inputs: &Array2<f64>,
) -> Result<Vec<f64>> {
    let trace = forward_trace(params0, inputs)?;
    let tangent = jvp(params0, &trace, delta.values())?;
    Ok(trace
        .outputs()
        .into_iter()
        .zip(tangent)
        .map(|(f, t)| f + t)
        .collect())
}

/// Per-layer factors of the random features of a batch.
///
/// The gradient of `f(xᵢ)` with respect to `Wˡ` is the outer product
/// `δˡᵢ ⊗ x̃ˡᵢ` and with respect to `bˡ` it is `σ_b·δˡᵢ`, so
/// `φ(xᵢ)ᵀφ(xⱼ) = Σₗ (δˡᵢ·δˡⱼ)(x̃ˡᵢ·x̃ˡⱼ + σ_b²)`.
#[derive(Debug, Clone)]
pub struct FeatureFactors {
    /// Backpropagated output sensitivities `δˡ`, `n × fan_out` per layer.
    pub deltas: Vec<Array2<f64>>,
    /// Scaled layer inputs `x̃ˡ`, `n × fan_in` per layer.
    pub scaled_inputs: Vec<Array2<f64>>,
    pub sigma_b: f64,
}

impl FeatureFactors {
    pub fn len(&self) -> usize {
        self.deltas[0].nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `φ(xᵢ)ᵀφ(yⱼ)` for every pair, as an `n × n'` matrix.
    pub fn cross_gram(&self, other: &FeatureFactors) -> Array2<f64> {
        let mut g = Array2::zeros((self.len(), other.len()));
        let b2 = self.sigma_b * self.sigma_b;
        for l in 0..self.deltas.len() {
            let dd = self.deltas[l].dot(&other.deltas[l].t());
            let aa = self.scaled_inputs[l].dot(&other.scaled_inputs[l].t()) + b2;
            g = g + dd * aa;
        }
        g
    }

    /// Squared feature norms `‖φ(xᵢ)‖²`.
    pub fn diag(&self) -> Vec<f64> {
        let b2 = self.sigma_b * self.sigma_b;
        (0..self.len())
            .map(|i| {
                (0..self.deltas.len())
                    .map(|l| {
                        let d = self.deltas[l].row(i);
                        let a = self.scaled_inputs[l].row(i);
                        d.dot(&d) * (a.dot(&a) + b2)
                    })
                    .sum()
            })
            .collect()
    }
}

/// Gradient factors for every row of `inputs`.
pub fn feature_factors(params: &ParamVector, inputs: &Array2<f64>) -> Result<FeatureFactors> {
    let trace = forward_trace(params, inputs)?;
    let cfg = params.config();
    let layout = cfg.layout();
    let nl = layout.layers.len();
    let mut deltas = vec![Array2::zeros((0, 0)); nl];
    let mut delta = Array2::ones((inputs.nrows(), 1));
    for l in (0..nl).rev() {
        let sh = &layout.layers[l];
        let next = if l > 0 {
            delta.dot(&params.weight(sh)) * sh.input_scale * relu_mask(&trace.pre[l - 1])
        } else {
            Array2::zeros((0, 0))
        };
        deltas[l] = std::mem::replace(&mut delta, next);
    }
    Ok(FeatureFactors {
        deltas,
        scaled_inputs: trace.scaled_inputs,
        sigma_b: cfg.sigma_b,
    })
}

/// Rows `lo..hi` of a batch, for chunked evaluation of large probe sets.
pub fn batch_rows(inputs: &Array2<f64>, lo: usize, hi: usize) -> Array2<f64> {
    inputs.slice(s![lo..hi, ..]).to_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Independent straight-line evaluator with explicit index loops.
    fn reference_forward(cfg: &NetConfig, w: &[f64], x: &[f64]) -> f64 {
        let (d, m, big_l) = (cfg.input_dim, cfg.width, cfg.hidden_layers);
        let mut off = 0;
        let mut act = x.to_vec();
        for l in 0..=big_l {
            let fan_in = if l == 0 { d } else { m };
            let fan_out = if l == big_l { 1 } else { m };
            let mut h = vec![0.0; fan_out];
            for i in 0..fan_out {
                let mut s = 0.0;
                for j in 0..fan_in {
                    s += w[off + i * fan_in + j] * act[j];
                }
                h[i] = cfg.sigma_w * s / (fan_in as f64).sqrt();
            }
            off += fan_in * fan_out;
            for i in 0..fan_out {
                h[i] += cfg.sigma_b * w[off + i];
            }
            off += fan_out;
            if l < big_l {
                for v in h.iter_mut() {
                    *v = v.max(0.0);
                }
            }
            act = h;
        }
        act[0]
    }

    fn random_input(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..d).map(|_| 5.0 * rng.sample::<f64, _>(StandardNormal)).collect()
    }

    #[test]
    fn parameter_count_by_hand() {
        // (2·8+8) + 2·(8·8+8) + (8+1)
        assert_eq!(NetConfig::new(2, 3, 8).param_count(), 177);
    }

    #[test]
    fn init_is_deterministic() {
        let cfg = NetConfig::new(3, 2, 16);
        assert_eq!(init_params(&cfg, 9).unwrap(), init_params(&cfg, 9).unwrap());
        assert_ne!(init_params(&cfg, 9).unwrap(), init_params(&cfg, 10).unwrap());
    }

    #[test]
    fn init_sample_mean_is_zero() {
        // 2·(1000·1000) + ... ≈ 10⁶ entries
        let cfg = NetConfig::new(1000, 1, 1000);
        let p = init_params(&cfg, 1).unwrap();
        assert!(p.len() >= 1_000_000);
        let mean = p.values().iter().sum::<f64>() / p.len() as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn zero_params_give_zero_output() {
        let cfg = NetConfig::new(2, 3, 8);
        let p = ParamVector::zeros(cfg);
        assert_eq!(forward(&p, &[1.0, -2.0]).unwrap(), 0.0);
    }

    #[test]
    fn zero_input_with_zero_biases_gives_zero() {
        let cfg = NetConfig::new(2, 3, 8);
        let mut p = init_params(&cfg, 4).unwrap();
        for sh in cfg.layout().layers {
            p.values_mut()[sh.bias..sh.bias + sh.fan_out].fill(0.0);
        }
        assert_eq!(forward(&p, &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn forward_matches_reference_evaluator() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for (d, big_l, m) in [(2, 1, 5), (3, 3, 17), (1, 2, 32)] {
            let mut cfg = NetConfig::new(d, big_l, m);
            cfg.sigma_w = 1.3;
            cfg.sigma_b = 0.4;
            let p = init_params(&cfg, rng.random()).unwrap();
            for _ in 0..5 {
                let x = random_input(d, &mut rng);
                let got = forward(&p, &x).unwrap();
                let want = reference_forward(&cfg, p.values(), &x);
                assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{got} vs {want}");
                let batch = forward_batch(&p, &stack_inputs(&[x.clone()], d).unwrap()).unwrap()[0];
                assert!((batch - want).abs() <= 1e-12 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let p = init_params(&NetConfig::new(2, 1, 4), 0).unwrap();
        assert!(matches!(forward(&p, &[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn output_bias_coordinate_is_sigma_b() {
        let mut cfg = NetConfig::new(2, 2, 6);
        cfg.sigma_b = 0.7;
        let p = init_params(&cfg, 3).unwrap();
        let phi = feature(&p, &[0.3, -1.2]).unwrap();
        assert_eq!(*phi.last().unwrap(), 0.7);
    }

    #[test]
    fn feature_matches_central_differences() {
        let cfg = NetConfig::new(2, 2, 12);
        let p = init_params(&cfg, 5).unwrap();
        let x = [1.7, -0.4];
        let phi = feature(&p, &x).unwrap();
        let eps = 1e-4;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut checked = 0;
        for _ in 0..150 {
            let i = rng.random_range(0..p.len());
            let mut plus = p.clone();
            plus.values_mut()[i] += eps;
            let mut minus = p.clone();
            minus.values_mut()[i] -= eps;
            let fd = (forward(&plus, &x).unwrap() - forward(&minus, &x).unwrap()) / (2.0 * eps);
            assert!((fd - phi[i]).abs() <= 1e-5 * phi[i].abs().max(1.0), "coord {i}: {fd} vs {}", phi[i]);
            checked += 1;
        }
        assert!(checked >= 100);
    }

    #[test]
    fn feature_factors_reproduce_explicit_gram() {
        let cfg = NetConfig::new(3, 3, 10);
        let p = init_params(&cfg, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<Vec<f64>> = (0..4).map(|_| random_input(3, &mut rng)).collect();
        let f = feature_factors(&p, &stack_inputs(&xs, 3).unwrap()).unwrap();
        let g = f.cross_gram(&f);
        let diag = f.diag();
        let phis: Vec<Vec<f64>> = xs.iter().map(|x| feature(&p, x).unwrap()).collect();
        for i in 0..4 {
            for j in 0..4 {
                let want = crate::linalg::dot(&phis[i], &phis[j]);
                assert!((g[[i, j]] - want).abs() <= 1e-10 * want.abs().max(1.0));
            }
            let want = crate::linalg::dot(&phis[i], &phis[i]);
            assert!((diag[i] - want).abs() <= 1e-10 * want);
        }
    }

    #[test]
    fn linear_logit_identities() {
        let cfg = NetConfig::new(2, 2, 8);
        let p = init_params(&cfg, 6).unwrap();
        let x = [0.5, 2.0];
        let f0 = forward(&p, &x).unwrap();
        let zero = WeightDelta::zeros(DeltaRole::Student, p.len());
        assert!((linear_logit(&p, &zero, &x).unwrap() - f0).abs() < 1e-12);
        let phi = feature(&p, &x).unwrap();
        let n2 = crate::linalg::dot(&phi, &phi);
        let c = 1.75;
        let delta = WeightDelta::new(DeltaRole::Student, phi.iter().map(|v| c * v / n2).collect());
        assert!((linear_logit(&p, &delta, &x).unwrap() - (f0 + c)).abs() < 1e-10);
    }

    #[test]
    fn vjp_is_sum_of_features() {
        let cfg = NetConfig::new(2, 2, 7);
        let p = init_params(&cfg, 12).unwrap();
        let xs = vec![vec![1.0, 2.0], vec![-3.0, 0.5], vec![0.2, -0.1]];
        let g = [0.5, -1.0, 2.0];
        let trace = forward_trace(&p, &stack_inputs(&xs, 2).unwrap()).unwrap();
        let total = vjp(&p, &trace, &g).unwrap();
        let mut want = vec![0.0; p.len()];
        for (x, gi) in xs.iter().zip(g) {
            for (w, f) in want.iter_mut().zip(feature(&p, x).unwrap()) {
                *w += gi * f;
            }
        }
        for (a, b) in total.iter().zip(&want) {
            assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
        }
    }

    #[test]
    fn layers_round_trip() {
        let cfg = NetConfig::new(3, 2, 5);
        let p = init_params(&cfg, 1).unwrap();
        let q = ParamVector::from_layers(cfg, &p.layers()).unwrap();
        assert_eq!(p, q);
    }
}
