//! Synthetic regression and classification tasks.
//!
//! Inputs are i.i.d. `N(0, 5²)` per coordinate. Targets are Gaussian
//! mixtures `z(x) = Σⱼ Aⱼ·exp(−‖x − xⱼ‖²/σⱼ)`, optionally with per-sample
//! sign flips, pure noise, the zero function, or the logits of a trained
//! teacher network. Every random quantity is a pure function of the task
//! seed and the sample index, so enlarging a sample set never changes the
//! targets of the points already drawn.

use std::path::PathBuf;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::distillation::sigmoid;
use crate::error::{check_len, Error, Result};
use crate::network::{forward_batch, load_checkpoint, stack_inputs, Batch, BatchSource, ParamVector};
use crate::rng;

pub const INPUT_STD: f64 = 5.0;

/// Relative half-width of the uniform jitter applied to amplitudes and widths.
pub const MODE_JITTER: f64 = 0.2;

pub fn sample_inputs(dim: usize, std: f64, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect())
        .collect()
}

/// Exponent convention of the Gaussian bumps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exponent {
    /// `exp(−‖x − xⱼ‖²/σⱼ)`.
    #[default]
    Linear,
    /// `exp(−‖x − xⱼ‖²/σⱼ²)`.
    Squared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    /// Number of modes `q`.
    pub q: usize,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    /// Standard deviation `σ_p` of the mode centers.
    #[serde(default = "default_center_std")]
    pub center_std: f64,
    /// Width scale; `15/q²` when absent.
    #[serde(default)]
    pub width: Option<f64>,
    /// Number of leading input coordinates the mixture varies along; all when absent.
    #[serde(default)]
    pub active_dims: Option<usize>,
    #[serde(default)]
    pub exponent: Exponent,
}

fn default_amplitude() -> f64 {
    1.0
}

fn default_center_std() -> f64 {
    INPUT_STD
}

impl MixtureSpec {
    pub fn new(q: usize) -> Self {
        Self {
            q,
            amplitude: default_amplitude(),
            center_std: default_center_std(),
            width: None,
            active_dims: None,
            exponent: Exponent::Linear,
        }
    }

    pub fn width_scale(&self) -> f64 {
        self.width.unwrap_or(15.0 / (self.q * self.q) as f64)
    }

    pub fn validate(&self, input_dim: usize) -> Result<()> {
        if self.q == 0 {
            return Err(Error::InvalidParameter {
                name: "q",
                value: 0.0,
                reason: "a mixture needs at least one mode",
            });
        }
        if !(self.width_scale() > 0.0) {
            return Err(Error::InvalidParameter {
                name: "width",
                value: self.width_scale(),
                reason: "must be positive",
            });
        }
        if !(self.center_std >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "center_std",
                value: self.center_std,
                reason: "must be non-negative",
            });
        }
        if let Some(a) = self.active_dims {
            if a == 0 || a > input_dim {
                return Err(Error::InvalidParameter {
                    name: "active_dims",
                    value: a as f64,
                    reason: "must lie in 1..=input_dim",
                });
            }
        }
        Ok(())
    }

    /// Draws `q` modes: `Aⱼ = ±A(1 + 0.2u)`, `σⱼ = σ(1 + 0.2u')`, `xⱼ ∼ N(0, σ_p²)`.
    pub fn realize(&self, input_dim: usize, seed: u64) -> Result<Mixture> {
        self.validate(input_dim)?;
        let dims = self.active_dims.unwrap_or(input_dim);
        let mut r = rng::stream(seed, &[rng::label("mixture")]);
        let sigma = self.width_scale();
        let modes = (0..self.q)
            .map(|_| {
                let sign = if r.random::<bool>() { 1.0 } else { -1.0 };
                let amplitude = sign * self.amplitude * (1.0 + MODE_JITTER * r.random_range(-1.0..=1.0));
                let width = sigma * (1.0 + MODE_JITTER * r.random_range(-1.0..=1.0));
                let center = (0..dims).map(|_| self.center_std * r.sample::<f64, _>(StandardNormal)).collect();
                Mode {
                    amplitude,
                    center,
                    width,
                }
            })
            .collect();
        Ok(Mixture {
            modes,
            exponent: self.exponent,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub amplitude: f64,
    pub center: Vec<f64>,
    pub width: f64,
}

/// A realized Gaussian mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mixture {
    pub modes: Vec<Mode>,
    pub exponent: Exponent,
}

impl Mixture {
    /// Number of leading coordinates the mixture reads.
    pub fn active_dims(&self) -> usize {
        self.modes.first().map_or(0, |m| m.center.len())
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let r2: f64 = m.center.iter().zip(x).map(|(c, v)| (v - c) * (v - c)).sum();
                let scale = match self.exponent {
                    Exponent::Linear => m.width,
                    Exponent::Squared => m.width * m.width,
                };
                m.amplitude * (-r2 / scale).exp()
            })
            .sum()
    }

    pub fn total_amplitude(&self) -> f64 {
        self.modes.iter().map(|m| m.amplitude.abs()).sum()
    }
}

fn unit_uniform(seed: u64, path: &[u64]) -> f64 {
    (rng::derive_seed(seed, path) >> 11) as f64 / (1u64 << 53) as f64
}

/// Sign `s ∈ {1, −1}` of sample `index`, equal to −1 with probability `p_flip`.
pub fn flip_sign(seed: u64, index: usize, p_flip: f64) -> f64 {
    if unit_uniform(seed, &[rng::label("flip"), index as u64]) < p_flip {
        -1.0
    } else {
        1.0
    }
}

/// Applies [`flip_sign`] to a sequence of base targets indexed from 0.
pub fn flip_labels(base: &[f64], p_flip: f64, seed: u64) -> Vec<f64> {
    base.iter()
        .enumerate()
        .map(|(i, z)| flip_sign(seed, i, p_flip) * z)
        .collect()
}

/// Standard-normal noise target of sample `index`.
pub fn random_label(seed: u64, index: usize) -> f64 {
    let mut r = rng::stream(seed, &[rng::label("random-label"), index as u64]);
    r.sample(StandardNormal)
}

/// Target kind of a [`TaskSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetKind {
    Mixture {
        mixture: MixtureSpec,
    },
    FlippedMixture {
        mixture: MixtureSpec,
        p_flip: f64,
    },
    TeacherNet {
        checkpoint: PathBuf,
        #[serde(rename = "T")]
        temperature: f64,
        #[serde(default = "default_reduction")]
        reduction: f64,
    },
    Zero,
    RandomLabels,
}

pub fn default_reduction() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub input_dim: usize,
    #[serde(default = "default_center_std")]
    pub input_std: f64,
    pub target: TargetKind,
}

impl TaskSpec {
    pub fn new(input_dim: usize, target: TargetKind) -> Self {
        Self {
            input_dim,
            input_std: INPUT_STD,
            target,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidParameter {
                name: "input_dim",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        if !(self.input_std > 0.0) {
            return Err(Error::InvalidParameter {
                name: "input_std",
                value: self.input_std,
                reason: "must be positive",
            });
        }
        match &self.target {
            TargetKind::Mixture { mixture } => mixture.validate(self.input_dim),
            TargetKind::FlippedMixture { mixture, p_flip } => {
                if !(0.0..=0.5).contains(p_flip) {
                    return Err(Error::InvalidParameter {
                        name: "p_flip",
                        value: *p_flip,
                        reason: "must lie in [0, 0.5]",
                    });
                }
                mixture.validate(self.input_dim)
            }
            TargetKind::TeacherNet {
                temperature, reduction, ..
            } => {
                if !(*reduction > 0.0) {
                    return Err(Error::InvalidParameter {
                        name: "reduction",
                        value: *reduction,
                        reason: "must be positive",
                    });
                }
                if !(*temperature > 0.0) {
                    return Err(Error::InvalidParameter {
                        name: "T",
                        value: *temperature,
                        reason: "must be positive",
                    });
                }
                Ok(())
            }
            TargetKind::Zero | TargetKind::RandomLabels => Ok(()),
        }
    }

    pub fn realize(&self, seed: u64) -> Result<Task> {
        self.validate()?;
        let target = match &self.target {
            TargetKind::Mixture { mixture } => Target::Mixture(mixture.realize(self.input_dim, seed)?),
            TargetKind::FlippedMixture { mixture, p_flip } => Target::Flipped {
                mixture: mixture.realize(self.input_dim, seed)?,
                p_flip: *p_flip,
            },
            TargetKind::TeacherNet {
                checkpoint,
                reduction,
                ..
            } => {
                let ckpt = load_checkpoint(checkpoint)?;
                check_len("teacher input dimension", self.input_dim, ckpt.params.config().input_dim)?;
                Target::Teacher {
                    params: ckpt.params,
                    reduction: *reduction,
                }
            }
            TargetKind::Zero => Target::Zero,
            TargetKind::RandomLabels => Target::RandomLabels,
        };
        Ok(Task {
            input_dim: self.input_dim,
            input_std: self.input_std,
            seed,
            target,
        })
    }
}

/// Realized target function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Target {
    Mixture(Mixture),
    Flipped { mixture: Mixture, p_flip: f64 },
    #[serde(skip)]
    Teacher { params: ParamVector, reduction: f64 },
    Zero,
    RandomLabels,
}

/// A task realized from a seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub input_dim: usize,
    pub input_std: f64,
    pub seed: u64,
    pub target: Target,
}

impl Task {
    pub fn sample_inputs(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        sample_inputs(self.input_dim, self.input_std, n, rng)
    }

    /// Target logits of `inputs`, the `i`-th row being sample index `i`.
    pub fn logits(&self, inputs: &[Vec<f64>]) -> Result<Vec<f64>> {
        for x in inputs {
            check_len("task input", self.input_dim, x.len())?;
        }
        Ok(match &self.target {
            Target::Mixture(m) => inputs.iter().map(|x| m.value(x)).collect(),
            Target::Flipped { mixture, p_flip } => inputs
                .iter()
                .enumerate()
                .map(|(i, x)| flip_sign(self.seed, i, *p_flip) * mixture.value(x))
                .collect(),
            Target::Teacher { params, reduction } => forward_batch(params, &stack_inputs(inputs, self.input_dim)?)?
                .into_iter()
                .map(|z| reduction * z)
                .collect(),
            Target::Zero => vec![0.0; inputs.len()],
            Target::RandomLabels => (0..inputs.len()).map(|i| random_label(self.seed, i)).collect(),
        })
    }

    /// Ground-truth classes `𝟙{z(x) > 0}`.
    pub fn hard_labels(&self, inputs: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(self
            .logits(inputs)?
            .into_iter()
            .map(|z| if z > 0.0 { 1.0 } else { 0.0 })
            .collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tasks serialize")
    }
}

/// Realizes `spec` with seeds derived from `seed` until the positive class
/// fraction on `probe` lies in `[lo, hi]`. Returns the task and the number of
/// rejected draws.
pub fn realize_balanced(
    spec: &TaskSpec,
    seed: u64,
    probe: &[Vec<f64>],
    lo: f64,
    hi: f64,
    max_tries: usize,
) -> Result<(Task, usize)> {
    for attempt in 0..max_tries {
        let s = if attempt == 0 {
            seed
        } else {
            rng::derive_seed(seed, &[rng::label("rebalance"), attempt as u64])
        };
        let task = spec.realize(s)?;
        let labels = task.hard_labels(probe)?;
        let frac = labels.iter().sum::<f64>() / labels.len().max(1) as f64;
        if (lo..=hi).contains(&frac) {
            return Ok((task, attempt));
        }
    }
    Err(Error::InvalidParameter {
        name: "max_tries",
        value: max_tries as f64,
        reason: "no class-balanced realization found",
    })
}

/// Ground-truth logit function for classification tasks.
#[derive(Debug, Clone, PartialEq)]
pub enum GroundTruth {
    Mixture(Mixture),
    Network(ParamVector),
}

impl GroundTruth {
    pub fn logits(&self, inputs: &Array2<f64>) -> Result<Vec<f64>> {
        match self {
            GroundTruth::Mixture(m) => Ok(inputs.rows().into_iter().map(|r| m.value(r.as_slice().expect("row-major"))).collect()),
            GroundTruth::Network(p) => forward_batch(p, inputs),
        }
    }

    pub fn hard_labels(&self, inputs: &Array2<f64>) -> Result<Vec<f64>> {
        Ok(self
            .logits(inputs)?
            .into_iter()
            .map(|z| if z > 0.0 { 1.0 } else { 0.0 })
            .collect())
    }
}

/// Label source built from a teacher network and a ground truth.
#[derive(Debug, Clone)]
pub struct TeacherLabels {
    pub teacher: ParamVector,
    pub temperature: f64,
    /// Reduction factor `r` applied to teacher logits.
    pub reduction: f64,
    pub ground_truth: GroundTruth,
}

impl TeacherLabels {
    pub fn new(teacher: ParamVector, temperature: f64, reduction: f64, ground_truth: GroundTruth) -> Result<Self> {
        if !(reduction > 0.0) {
            return Err(Error::InvalidParameter {
                name: "reduction",
                value: reduction,
                reason: "must be positive",
            });
        }
        if !(temperature > 0.0) {
            return Err(Error::InvalidParameter {
                name: "T",
                value: temperature,
                reason: "must be positive",
            });
        }
        Ok(Self {
            teacher,
            temperature,
            reduction,
            ground_truth,
        })
    }

    /// Scaled teacher logits `r·z_t(x)`.
    pub fn teacher_logits(&self, inputs: &Array2<f64>) -> Result<Vec<f64>> {
        Ok(forward_batch(&self.teacher, inputs)?
            .into_iter()
            .map(|z| self.reduction * z)
            .collect())
    }

    /// Soft labels `σ(r·z_t/T)`.
    pub fn soft_labels(&self, inputs: &Array2<f64>) -> Result<Vec<f64>> {
        Ok(self
            .teacher_logits(inputs)?
            .into_iter()
            .map(|z| sigmoid(z / self.temperature))
            .collect())
    }

    pub fn hard_labels(&self, inputs: &Array2<f64>) -> Result<Vec<f64>> {
        self.ground_truth.hard_labels(inputs)
    }

    /// Teacher logits and ground-truth labels as a training batch.
    pub fn batch(&self, inputs: Array2<f64>) -> Result<Batch> {
        let targets = self.teacher_logits(&inputs)?;
        let hard = self.hard_labels(&inputs)?;
        Ok(Batch { inputs, targets, hard })
    }
}

/// Online batches from the input law with targets computed by a closure.
pub struct FnSource<F> {
    pub input_dim: usize,
    pub input_std: f64,
    pub targets: F,
}

impl<F> FnSource<F>
where
    F: Fn(&Array2<f64>) -> Result<(Vec<f64>, Vec<f64>)> + Sync,
{
    pub fn new(input_dim: usize, targets: F) -> Self {
        Self {
            input_dim,
            input_std: INPUT_STD,
            targets,
        }
    }
}

impl<F> BatchSource for FnSource<F>
where
    F: Fn(&Array2<f64>) -> Result<(Vec<f64>, Vec<f64>)> + Sync,
{
    fn draw(&self, rng: &mut ChaCha8Rng, n: usize) -> Result<Batch> {
        let normal = Normal::new(0.0, self.input_std).expect("positive std");
        let inputs = Array2::from_shape_fn((n, self.input_dim), |_| normal.sample(rng));
        let (targets, hard) = (self.targets)(&inputs)?;
        Ok(Batch { inputs, targets, hard })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{init_params, NetConfig};

    fn mixture_task(q: usize) -> TaskSpec {
        TaskSpec::new(2, TargetKind::Mixture { mixture: MixtureSpec::new(q) })
    }

    #[test]
    fn inputs_reproduce_and_have_variance_25() {
        let a = sample_inputs(2, INPUT_STD, 5, &mut rng::stream(3, &[]));
        assert_eq!(a, sample_inputs(2, INPUT_STD, 5, &mut rng::stream(3, &[])));
        assert!(sample_inputs(2, INPUT_STD, 0, &mut rng::stream(3, &[])).is_empty());
        let xs = sample_inputs(1, INPUT_STD, 100_000, &mut rng::stream(4, &[]));
        let mean = xs.iter().map(|x| x[0]).sum::<f64>() / 1e5;
        let var = xs.iter().map(|x| (x[0] - mean).powi(2)).sum::<f64>() / (1e5 - 1.0);
        assert!((var - 25.0).abs() < 0.5, "variance {var}");
    }

    #[test]
    fn single_mode_peaks_at_center() {
        let m = MixtureSpec::new(1).realize(2, 9).unwrap();
        let c = m.modes[0].center.clone();
        assert_eq!(m.value(&c), m.modes[0].amplitude);
        let far = [c[0] + 150.0, c[1]];
        assert!(m.value(&far).abs() < 1e-8 * m.total_amplitude());
    }

    #[test]
    fn mixture_matches_direct_summation() {
        let mut spec = MixtureSpec::new(7);
        spec.width = Some(3.0);
        let m = spec.realize(3, 5).unwrap();
        let x = [0.4, -1.3, 2.2];
        let mut want = 0.0;
        for j in 0..m.modes.len() {
            let mode = &m.modes[j];
            let mut r2 = 0.0;
            for k in 0..3 {
                r2 += (x[k] - mode.center[k]) * (x[k] - mode.center[k]);
            }
            want += mode.amplitude * f64::exp(-r2 / mode.width);
        }
        assert!((m.value(&x) - want).abs() < 1e-12);
    }

    #[test]
    fn mode_laws() {
        let spec = MixtureSpec::new(4);
        let mut centers = Vec::new();
        let mut positive = 0;
        for seed in 0..2500 {
            let m = spec.realize(1, seed).unwrap();
            assert_eq!(m.modes.len(), 4);
            for mode in &m.modes {
                centers.push(mode.center[0]);
                positive += (mode.amplitude > 0.0) as usize;
                assert!(mode.width > 0.0);
                let a = mode.amplitude.abs();
                assert!((0.8..=1.2).contains(&a));
            }
        }
        let n = centers.len() as f64;
        let mean = centers.iter().sum::<f64>() / n;
        let var = centers.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.2 && (var - 25.0).abs() < 1.5, "{mean} {var}");
        assert!((positive as f64 / n - 0.5).abs() < 0.02);
    }

    #[test]
    fn active_dims_restrict_dependence() {
        let mut spec = MixtureSpec::new(3);
        spec.active_dims = Some(1);
        let m = spec.realize(2, 1).unwrap();
        assert_eq!(m.value(&[0.3, 5.0]), m.value(&[0.3, -9.0]));
    }

    #[test]
    fn flips() {
        let base: Vec<f64> = (0..50).map(|i| i as f64 - 20.0).collect();
        assert_eq!(flip_labels(&base, 0.0, 3), base);
        let once = flip_labels(&base, 0.3, 3);
        assert_eq!(flip_labels(&once, 0.3, 3), base);
        let n = 10_000;
        let signs: Vec<f64> = (0..n).map(|i| flip_sign(8, i, 0.5)).collect();
        let base_signs: Vec<f64> = (0..n).map(|i| if i % 3 == 0 { -1.0 } else { 1.0 }).collect();
        let corr = signs.iter().zip(&base_signs).map(|(a, b)| a * a * b).sum::<f64>() / n as f64;
        let flipped = signs.iter().zip(&base_signs).map(|(a, b)| a * b).collect::<Vec<_>>();
        let mean_f = flipped.iter().sum::<f64>() / n as f64;
        let mean_b = base_signs.iter().sum::<f64>() / n as f64;
        let cov = flipped.iter().zip(&base_signs).map(|(f, b)| (f - mean_f) * (b - mean_b)).sum::<f64>() / n as f64;
        let sd_f = (flipped.iter().map(|f| (f - mean_f).powi(2)).sum::<f64>() / n as f64).sqrt();
        let sd_b = (base_signs.iter().map(|b| (b - mean_b).powi(2)).sum::<f64>() / n as f64).sqrt();
        assert!((cov / (sd_f * sd_b)).abs() < 0.02, "corr {}", cov / (sd_f * sd_b));
        assert!(corr.is_finite());
    }

    #[test]
    fn targets_are_index_stable() {
        for spec in [
            TaskSpec::new(2, TargetKind::RandomLabels),
            TaskSpec::new(
                2,
                TargetKind::FlippedMixture {
                    mixture: MixtureSpec::new(3),
                    p_flip: 0.3,
                },
            ),
        ] {
            let task = spec.realize(4).unwrap();
            let xs = task.sample_inputs(20, &mut rng::stream(1, &[]));
            let all = task.logits(&xs).unwrap();
            assert_eq!(task.logits(&xs[..12]).unwrap(), all[..12]);
        }
        let zero = TaskSpec::new(3, TargetKind::Zero).realize(0).unwrap();
        assert_eq!(zero.logits(&[vec![1.0, 2.0, 3.0]]).unwrap(), vec![0.0]);
    }

    #[test]
    fn random_labels_are_standard_normal() {
        let v: Vec<f64> = (0..20_000).map(|i| random_label(2, i)).collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
        assert!(mean.abs() < 0.03 && (var - 1.0).abs() < 0.04);
    }

    #[test]
    fn validation() {
        let bad = TaskSpec::new(
            2,
            TargetKind::FlippedMixture {
                mixture: MixtureSpec::new(3),
                p_flip: 0.7,
            },
        );
        assert!(bad.validate().is_err());
        assert!(TaskSpec::new(2, TargetKind::Mixture { mixture: MixtureSpec::new(0) }).validate().is_err());
    }

    #[test]
    fn balanced_realization() {
        let probe = sample_inputs(2, INPUT_STD, 500, &mut rng::stream(0, &[]));
        let (task, _) = realize_balanced(&mixture_task(6), 3, &probe, 0.2, 0.8, 200).unwrap();
        let labels = task.hard_labels(&probe).unwrap();
        let frac = labels.iter().sum::<f64>() / 500.0;
        assert!((0.2..=0.8).contains(&frac));
    }

    #[test]
    fn teacher_labels_scale_linearly() {
        let params = init_params(&NetConfig::new(2, 1, 8), 1).unwrap();
        let gt = GroundTruth::Mixture(MixtureSpec::new(2).realize(2, 0).unwrap());
        let x = stack_inputs(&[vec![0.5, 1.0], vec![-2.0, 3.0]], 2).unwrap();
        let one = TeacherLabels::new(params.clone(), 2.0, 1.0, gt.clone()).unwrap();
        let two = TeacherLabels::new(params.clone(), 2.0, 2.0, gt).unwrap();
        let z1 = one.teacher_logits(&x).unwrap();
        assert_eq!(z1, forward_batch(&params, &x).unwrap());
        for (a, b) in z1.iter().zip(two.teacher_logits(&x).unwrap()) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
        assert_eq!(sigmoid(0.0 / 7.0), 0.5);
    }

    #[test]
    fn json_dump_round_trips() {
        let task = mixture_task(3).realize(2).unwrap();
        let back: Task = serde_json::from_str(&task.to_json()).unwrap();
        assert_eq!(back, task);
    }
}
