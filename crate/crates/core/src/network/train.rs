use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{forward_trace, init_params, jvp, vjp, Checkpoint, DeltaRole, NetConfig, ParamVector, Trace, WeightDelta};
use crate::distillation::{bce_with_logit, loss_gradient, sigmoid, DistillParams};
use crate::error::{check_len, Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    /// Adam with β₁ = 0.9, β₂ = 0.999.
    Adam,
    /// Plain (full- or mini-batch) gradient descent.
    Gd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    #[serde(default = "default_optimizer")]
    pub optimizer: Optimizer,
    /// Draw a fresh batch for every step instead of cycling over fixed data.
    #[serde(default)]
    pub online_batch: bool,
    /// Extra stopping epochs at which checkpoints are kept.
    #[serde(default)]
    pub checkpoints: Vec<usize>,
    /// Gradient norm above which a finished run is flagged as unconverged.
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
}

fn default_optimizer() -> Optimizer {
    Optimizer::Adam
}

fn default_grad_tol() -> f64 {
    1e-3
}

impl TrainConfig {
    pub fn new(learning_rate: f64, batch_size: usize, epochs: usize) -> Self {
        Self {
            learning_rate,
            batch_size,
            epochs,
            optimizer: Optimizer::Adam,
            online_batch: false,
            checkpoints: Vec::new(),
            grad_tol: default_grad_tol(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "learning_rate",
                value: self.learning_rate,
                reason: "must be positive",
            });
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter {
                name: "batch_size",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        Ok(())
    }
}

/// Stopping epochs `1, 2, 4, …` up to `max_epoch`, merged with `extra`.
pub fn checkpoint_schedule(max_epoch: usize, extra: &[usize]) -> Vec<usize> {
    let mut epochs: Vec<usize> = std::iter::successors(Some(1usize), |e| e.checked_mul(2))
        .take_while(|&e| e <= max_epoch)
        .chain(extra.iter().copied().filter(|&e| e <= max_epoch))
        .collect();
    epochs.sort_unstable();
    epochs.dedup();
    epochs
}

pub struct Adam {
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(len: usize, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for ((w, g), (m, v)) in params.iter_mut().zip(grad).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *w -= self.learning_rate * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

enum Stepper {
    Adam(Adam),
    Gd(f64),
}

impl Stepper {
    fn new(cfg: &TrainConfig, len: usize) -> Self {
        match cfg.optimizer {
            Optimizer::Adam => Stepper::Adam(Adam::new(len, cfg.learning_rate)),
            Optimizer::Gd => Stepper::Gd(cfg.learning_rate),
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        match self {
            Stepper::Adam(a) => a.step(params, grad),
            Stepper::Gd(lr) => params.iter_mut().zip(grad).for_each(|(w, g)| *w -= *lr * g),
        }
    }
}

/// Inputs with per-row regression targets and hard labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Array2<f64>,
    /// Target logits (L2) or teacher logits (distillation).
    pub targets: Vec<f64>,
    /// Ground-truth hard labels in `{0, 1}`.
    pub hard: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn rows(&self, idx: &[usize]) -> Batch {
        Batch {
            inputs: self.inputs.select(Axis(0), idx),
            targets: idx.iter().map(|&i| self.targets[i]).collect(),
            hard: idx.iter().map(|&i| self.hard[i]).collect(),
        }
    }

    fn check(&self) -> Result<()> {
        check_len("batch targets", self.len(), self.targets.len())?;
        check_len("batch hard labels", self.len(), self.hard.len())
    }
}

/// Generator of fresh training batches for online-batch training.
pub trait BatchSource: Sync {
    fn draw(&self, rng: &mut ChaCha8Rng, n: usize) -> Result<Batch>;
}

/// Trained parameters at each requested stopping epoch.
#[derive(Debug, Clone)]
pub struct TeacherRun {
    pub checkpoints: Vec<Checkpoint>,
    pub final_loss: f64,
}

impl TeacherRun {
    pub fn at_epoch(&self, epoch: usize) -> Option<&Checkpoint> {
        self.checkpoints.iter().find(|c| c.epoch == epoch)
    }

    pub fn last(&self) -> &Checkpoint {
        self.checkpoints.last().expect("at least the initial checkpoint")
    }
}

fn batches(n: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    if batch_size < n {
        idx.shuffle(rng);
    }
    idx.chunks(batch_size.min(n).max(1)).map(|c| c.to_vec()).collect()
}

/// Adam (or GD) on binary cross-entropy against hard labels.
///
/// With `online_batch` every epoch is one step on a fresh batch; otherwise
/// each epoch is one shuffled pass over a single draw of `data_size` points.
/// The returned run always contains epoch 0 (the initialization) followed
/// by [`checkpoint_schedule`] of `train_cfg`.
pub fn train_teacher(
    cfg: &NetConfig,
    source: &dyn BatchSource,
    data_size: usize,
    train_cfg: &TrainConfig,
    seed: u64,
) -> Result<TeacherRun> {
    train_cfg.validate()?;
    let mut params = init_params(cfg, seed)?;
    let schedule = checkpoint_schedule(train_cfg.epochs, &train_cfg.checkpoints);
    let mut checkpoints = vec![Checkpoint::new(params.clone(), seed, 0)];
    let mut stepper = Stepper::new(train_cfg, params.len());
    let mut rng = rng::stream(seed, &[rng::label("teacher-train")]);
    let fixed = if train_cfg.online_batch {
        None
    } else {
        Some(source.draw(&mut rng, data_size)?)
    };
    let mut loss = f64::NAN;
    for epoch in 1..=train_cfg.epochs {
        let steps = match &fixed {
            Some(data) => batches(data.len(), train_cfg.batch_size, &mut rng)
                .into_iter()
                .map(|idx| data.rows(&idx))
                .collect(),
            None => vec![source.draw(&mut rng, train_cfg.batch_size)?],
        };
        let mut total = 0.0;
        let mut count = 0;
        for batch in steps {
            batch.check()?;
            let trace = forward_trace(&params, &batch.inputs)?;
            let out = trace.outputs();
            let b = batch.len() as f64;
            total += out.iter().zip(&batch.hard).map(|(&f, &y)| bce_with_logit(y, f)).sum::<f64>();
            count += batch.len();
            let g: Vec<f64> = out.iter().zip(&batch.hard).map(|(&f, &y)| (sigmoid(f) - y) / b).collect();
            let grad = vjp(&params, &trace, &g)?;
            stepper.step(params.values_mut(), &grad);
        }
        loss = total / count.max(1) as f64;
        if !loss.is_finite() || params.values().iter().any(|w| !w.is_finite()) {
            return Err(Error::Divergence { epoch, loss });
        }
        if schedule.binary_search(&epoch).is_ok() {
            checkpoints.push(Checkpoint::new(params.clone(), seed, epoch));
        }
    }
    Ok(TeacherRun {
        checkpoints,
        final_loss: loss,
    })
}

/// Objective of the linearized model `f(x; w₀) + Δwᵀφ(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinearLoss {
    /// `½·mean (f − z)²` against `Batch::targets`.
    L2,
    /// Distillation loss with teacher logits `Batch::targets` and labels `Batch::hard`.
    Distill(DistillParams),
}

impl LinearLoss {
    fn output_grad(&self, out: &[f64], batch: &Batch) -> Vec<f64> {
        let b = batch.len() as f64;
        out.iter()
            .enumerate()
            .map(|(i, &f)| match self {
                LinearLoss::L2 => (f - batch.targets[i]) / b,
                LinearLoss::Distill(p) => loss_gradient(f, batch.targets[i], batch.hard[i], p) / b,
            })
            .collect()
    }
}

/// Training data for [`train_linearized`].
pub enum LinearData<'a> {
    Fixed(&'a Batch),
    Online(&'a dyn BatchSource),
}

#[derive(Debug, Clone)]
pub struct LinearFit {
    pub delta: WeightDelta,
    /// Norm of the loss gradient at the end of training (full data when fixed,
    /// last batch when online).
    pub grad_norm: f64,
    /// False when `grad_norm` exceeds the configured tolerance.
    pub converged: bool,
    /// `(epoch, ‖Δw‖)` at every epoch of [`checkpoint_schedule`].
    pub norm_trace: Vec<(usize, f64)>,
}

struct Step {
    batch: Batch,
    trace: Trace,
    f0: Vec<f64>,
}

impl Step {
    fn new(params0: &ParamVector, batch: Batch) -> Result<Self> {
        batch.check()?;
        let trace = forward_trace(params0, &batch.inputs)?;
        let f0 = trace.outputs();
        Ok(Self { batch, trace, f0 })
    }

    fn gradient(&self, params0: &ParamVector, delta: &[f64], loss: &LinearLoss) -> Result<Vec<f64>> {
        let tangent = jvp(params0, &self.trace, delta)?;
        let out: Vec<f64> = self.f0.iter().zip(tangent).map(|(f, t)| f + t).collect();
        vjp(params0, &self.trace, &loss.output_grad(&out, &self.batch))
    }
}

/// Gradient training of `Δw` in the linearized model around `params0`.
pub fn train_linearized(
    params0: &ParamVector,
    data: LinearData<'_>,
    loss: LinearLoss,
    role: DeltaRole,
    train_cfg: &TrainConfig,
    seed: u64,
) -> Result<LinearFit> {
    train_cfg.validate()?;
    let mut delta = vec![0.0; params0.len()];
    let mut stepper = Stepper::new(train_cfg, delta.len());
    let mut rng = rng::stream(seed, &[rng::label("linear-train")]);
    let mut grad_norm = 0.0;
    let schedule = checkpoint_schedule(train_cfg.epochs, &train_cfg.checkpoints);
    let mut norm_trace = Vec::with_capacity(schedule.len());
    let mut record = |epoch: usize, delta: &[f64]| {
        if schedule.binary_search(&epoch).is_ok() {
            norm_trace.push((epoch, crate::linalg::norm(delta)));
        }
    };
    match data {
        LinearData::Fixed(batch) => {
            let full = Step::new(params0, batch.clone())?;
            let cached = batch.len() <= train_cfg.batch_size;
            for epoch in 1..=train_cfg.epochs {
                if cached {
                    let g = full.gradient(params0, &delta, &loss)?;
                    stepper.step(&mut delta, &g);
                } else {
                    for idx in batches(batch.len(), train_cfg.batch_size, &mut rng) {
                        let step = Step::new(params0, batch.rows(&idx))?;
                        let g = step.gradient(params0, &delta, &loss)?;
                        stepper.step(&mut delta, &g);
                    }
                }
                record(epoch, &delta);
            }
            grad_norm = crate::linalg::norm(&full.gradient(params0, &delta, &loss)?);
        }
        LinearData::Online(source) => {
            for epoch in 1..=train_cfg.epochs {
                let step = Step::new(params0, source.draw(&mut rng, train_cfg.batch_size)?)?;
                let g = step.gradient(params0, &delta, &loss)?;
                grad_norm = crate::linalg::norm(&g);
                stepper.step(&mut delta, &g);
                record(epoch, &delta);
            }
        }
    }
    if delta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence {
            epoch: train_cfg.epochs,
            loss: f64::NAN,
        });
    }
    Ok(LinearFit {
        delta: WeightDelta::new(role, delta),
        grad_norm,
        converged: grad_norm <= train_cfg.grad_tol,
        norm_trace,
    })
}
