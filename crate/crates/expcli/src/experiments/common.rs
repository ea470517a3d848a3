use std::time::Instant;

use kdntk::kernel::analytic_nngp_gram;
use kdntk::network::{forward_batch, init_params, stack_inputs, train_teacher, NetConfig, ParamVector, TeacherRun, TrainConfig};
use kdntk::rng;
use kdntk::tasks::{realize_balanced, sample_inputs, FnSource, GroundTruth, Mixture, Target, TaskSpec};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::RunError;
use crate::config::{ExperimentConfig, ExperimentKind, InitKind};

const BALANCE_TRIES: usize = 1000;

/// Seed paths rooted at `[experiment, role, …]`.
#[derive(Debug, Clone, Copy)]
pub struct Seeds {
    root: u64,
    experiment: u64,
}

impl Seeds {
    pub fn new(root: u64, kind: ExperimentKind) -> Self {
        Self {
            root,
            experiment: rng::label(kind.name()),
        }
    }

    fn path(&self, role: &str, idx: &[u64]) -> Vec<u64> {
        let mut p = vec![self.experiment, rng::label(role)];
        p.extend_from_slice(idx);
        p
    }

    pub fn seed(&self, role: &str, idx: &[u64]) -> u64 {
        rng::derive_seed(self.root, &self.path(role, idx))
    }

    pub fn stream(&self, role: &str, idx: &[u64]) -> ChaCha8Rng {
        rng::stream(self.root, &self.path(role, idx))
    }
}

pub fn elapsed_ms(start: Instant) -> u64 {
    start.elapsed().as_millis() as u64
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

pub fn accuracy(logits: &[f64], labels: &[f64]) -> f64 {
    let hits = logits.iter().zip(labels).filter(|(z, y)| (**z > 0.0) == (**y > 0.5)).count();
    hits as f64 / logits.len().max(1) as f64
}

/// Evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

/// Gaussian draw from the infinite-width output covariance on `xs`.
pub fn nngp_logits(cfg: &NetConfig, xs: &[Vec<f64>], r: &mut ChaCha8Rng) -> kdntk::Result<Vec<f64>> {
    let chol = analytic_nngp_gram(cfg, xs)?.cholesky()?;
    let white: Vec<f64> = (0..xs.len()).map(|_| r.sample(StandardNormal)).collect();
    chol.mul_lower(&white)
}

/// A class-balanced mixture task for `trial` and the ground truth derived from it.
pub struct GroundTruthTask {
    pub spec: TaskSpec,
    pub mixture: Mixture,
    pub rejected: usize,
    truth: GroundTruth,
    scale: f64,
}

impl GroundTruthTask {
    pub fn draw(cfg: &ExperimentConfig, seeds: &Seeds, trial: u64) -> Result<Self, RunError> {
        let spec = cfg.task()?.clone();
        let probe = sample_inputs(
            spec.input_dim,
            spec.input_std,
            cfg.options.probe_points,
            &mut seeds.stream("balance-probe", &[trial]),
        );
        let [lo, hi] = cfg.options.balance;
        let (task, rejected) = realize_balanced(&spec, seeds.seed("task", &[trial]), &probe, lo, hi, BALANCE_TRIES)?;
        let mixture = match task.target {
            Target::Mixture(m) => m,
            _ => unreachable!("validated as a mixture task"),
        };
        Ok(Self {
            spec,
            truth: GroundTruth::Mixture(mixture.clone()),
            mixture,
            rejected,
            scale: 1.0,
        })
    }

    /// Replaces the ground truth by a network trained on its hard labels,
    /// whose logits are scaled by `scale`.
    pub fn into_network_truth(
        mut self,
        net: &NetConfig,
        train: &TrainConfig,
        data_size: usize,
        scale: f64,
        seed: u64,
    ) -> Result<Self, RunError> {
        let run = self.train_teacher(net, train, data_size, seed)?;
        self.truth = GroundTruth::Network(run.last().params.clone());
        self.scale = scale;
        Ok(self)
    }

    pub fn logits(&self, xs: &[Vec<f64>]) -> kdntk::Result<Vec<f64>> {
        let z = self.truth.logits(&stack_inputs(xs, self.spec.input_dim)?)?;
        Ok(z.into_iter().map(|v| self.scale * v).collect())
    }

    pub fn labels(&self, xs: &[Vec<f64>]) -> kdntk::Result<Vec<f64>> {
        Ok(self.logits(xs)?.into_iter().map(|z| (z > 0.0) as u8 as f64).collect())
    }

    pub fn inputs(&self, n: usize, r: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        sample_inputs(self.spec.input_dim, self.spec.input_std, n, r)
    }

    /// Trains a teacher network on this ground truth's hard labels.
    pub fn train_teacher(
        &self,
        net: &NetConfig,
        train: &TrainConfig,
        data_size: usize,
        seed: u64,
    ) -> Result<TeacherRun, RunError> {
        let truth = self.truth.clone();
        let mut source = FnSource::new(self.spec.input_dim, |x: &ndarray::Array2<f64>| {
            let hard = truth.hard_labels(x)?;
            Ok((vec![0.0; hard.len()], hard))
        });
        source.input_std = self.spec.input_std;
        Ok(train_teacher(net, &source, data_size, train, seed)?)
    }
}

/// Student initial logits `z₀` on `xs`, drawn from the stream at `path`.
pub fn initial_logits(
    cfg: &ExperimentConfig,
    seeds: &Seeds,
    fallback: InitKind,
    student: &NetConfig,
    xs: &[Vec<f64>],
    path: &[u64],
) -> kdntk::Result<Vec<f64>> {
    match cfg.init_kind(fallback) {
        InitKind::Zero => Ok(vec![0.0; xs.len()]),
        InitKind::Nngp => nngp_logits(student, xs, &mut seeds.stream("init", path)),
        InitKind::Network => {
            let p = network_at_init(student, cfg.options.init_width, seeds.seed("init", path))?;
            forward_batch(&p, &stack_inputs(xs, student.input_dim)?)
        }
    }
}

pub fn network_at_init(cfg: &NetConfig, width: usize, seed: u64) -> kdntk::Result<ParamVector> {
    let mut c = *cfg;
    c.width = width;
    init_params(&c, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_paths_depend_on_every_label() {
        let s = Seeds::new(1, ExperimentKind::Risk);
        let t = Seeds::new(1, ExperimentKind::AngleDist);
        assert_ne!(s.seed("a", &[0]), s.seed("a", &[1]));
        assert_ne!(s.seed("a", &[0]), s.seed("b", &[0]));
        assert_ne!(s.seed("a", &[0]), t.seed("a", &[0]));
        assert_eq!(s.seed("a", &[3, 4]), Seeds::new(1, ExperimentKind::Risk).seed("a", &[3, 4]));
    }

    #[test]
    fn helpers() {
        assert_eq!(linspace(-1.0, 1.0, 3), vec![-1.0, 0.0, 1.0]);
        assert_eq!(accuracy(&[1.0, -2.0, 3.0], &[1.0, 0.0, 0.0]), 2.0 / 3.0);
        assert_eq!(mean(&[1.0, 2.0, 6.0]), 3.0);
    }
}
