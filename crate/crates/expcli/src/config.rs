//! Experiment configuration files.
//!
//! A config is a TOML document. Top-level keys name the shared pieces
//! (`student`, `teacher`, `task`, `distill`, `n_grid`, …); knobs that only
//! some experiments read live in the `[options]` table.

use std::fmt;
use std::path::{Path, PathBuf};

use kdntk::distillation::DistillParams;
use kdntk::network::{NetConfig, TrainConfig};
use kdntk::tasks::{TargetKind, TaskSpec};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Kernel-solve budget, in `Σ n³` units, above which `validate` warns.
pub const DEFAULT_COST_BUDGET: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    EffectiveLogits,
    NtkCheck,
    Inefficiency,
    Risk,
    AngleDist,
    HardLabelEffect,
    ZeroNorm,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::EffectiveLogits,
        ExperimentKind::NtkCheck,
        ExperimentKind::Inefficiency,
        ExperimentKind::Risk,
        ExperimentKind::AngleDist,
        ExperimentKind::HardLabelEffect,
        ExperimentKind::ZeroNorm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::EffectiveLogits => "effective-logits",
            ExperimentKind::NtkCheck => "ntk-check",
            ExperimentKind::Inefficiency => "inefficiency",
            ExperimentKind::Risk => "risk",
            ExperimentKind::AngleDist => "angle-dist",
            ExperimentKind::HardLabelEffect => "hard-label-effect",
            ExperimentKind::ZeroNorm => "zero-norm",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Initial logits of a linearized student.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    Zero,
    Nngp,
    Network,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Options {
    /// Teacher-logit range of the effective-logit sweep.
    pub z_range: [f64; 2],
    pub z_points: usize,
    /// Widths of the kernel convergence sweep.
    pub widths: Vec<usize>,
    /// Inputs per Gram matrix in the kernel sweep.
    pub kernel_points: usize,
    /// Input norms at which `Θ(x,x)/xᵀx` is reported.
    pub ratio_norms: Vec<f64>,
    /// Monte Carlo sample size for risks, accuracies and angle curves.
    pub test_points: usize,
    /// Student initial logits; the default depends on the experiment.
    pub init: Option<InitKind>,
    /// Width of the network that supplies `z₀` when `init = "network"`.
    pub init_width: usize,
    /// Reduction factor applied to teacher logits.
    pub reduction: f64,
    /// Accepted positive-class fraction of ground-truth tasks.
    pub balance: [f64; 2],
    pub probe_points: usize,
    /// Anchor points defining the exactly realizable oracle of `angle-dist`.
    pub anchors: usize,
    pub angle_grid: usize,
    /// Teacher stopping epochs of `hard-label-effect`.
    pub checkpoints: Vec<usize>,
    /// Scale of the ground-truth logits used as `Δz_g` targets.
    pub truth_scale: f64,
    /// When set, the ground truth of `hard-label-effect` is a network trained
    /// this many epochs on the task's hard labels, seen through the reduction factor.
    pub truth_epochs: Option<usize>,
    /// Training-set size of a teacher trained on fixed data.
    pub teacher_data: usize,
    pub cost_budget: f64,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            z_range: [-5.0, 5.0],
            z_points: 21,
            widths: vec![64, 256, 1024, 4096],
            kernel_points: 16,
            ratio_norms: vec![10.0, 20.0, 50.0, 100.0],
            test_points: 10_000,
            init: None,
            init_width: 256,
            reduction: 0.3,
            balance: [0.2, 0.8],
            probe_points: 2000,
            anchors: 4,
            angle_grid: kdntk::metrics::ANGLE_GRID_POINTS,
            checkpoints: vec![1, 4, 16, 64, 256, 1024, 4096, 8192],
            truth_scale: 1.0,
            truth_epochs: None,
            teacher_data: 4096,
            cost_budget: DEFAULT_COST_BUDGET,
        }
    }
}

fn default_count() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional when the experiment is chosen on the command line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentKind>,
    /// Root seed; every random stream is derived from it.
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub student: Option<NetConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub teacher: Option<NetConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub teacher_training: Option<TrainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub student_training: Option<TrainConfig>,
    #[serde(default)]
    pub distill: Vec<DistillParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskSpec>,
    #[serde(default)]
    pub tasks: Vec<TaskSpec>,
    #[serde(default)]
    pub n_grid: Vec<usize>,
    #[serde(default = "default_count")]
    pub repeats: usize,
    /// Independent task or teacher realizations.
    #[serde(default = "default_count")]
    pub trials: usize,
    #[serde(default)]
    pub options: Options,
}

/// Problem with a config file, naming the offending field.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

fn field_err(field: &str) -> impl Fn(kdntk::Error) -> ConfigError + '_ {
    move |e| ConfigError::new(field, e.to_string())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::new("config", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("config", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// The experiment to run, reconciling the file with a command-line choice.
    pub fn resolve_kind(&self, requested: Option<ExperimentKind>) -> Result<ExperimentKind, ConfigError> {
        match (self.experiment, requested) {
            (Some(a), Some(b)) if a != b => Err(ConfigError::new(
                "experiment",
                format!("config declares `{a}` but `{b}` was requested"),
            )),
            (Some(a), _) | (None, Some(a)) => Ok(a),
            (None, None) => Err(ConfigError::new("experiment", "no experiment kind given")),
        }
    }

    pub fn student(&self) -> Result<&NetConfig, ConfigError> {
        self.student.as_ref().ok_or_else(|| ConfigError::new("student", "required by this experiment"))
    }

    pub fn teacher(&self) -> Result<&NetConfig, ConfigError> {
        self.teacher.as_ref().ok_or_else(|| ConfigError::new("teacher", "required by this experiment"))
    }

    pub fn teacher_training(&self) -> Result<&TrainConfig, ConfigError> {
        self.teacher_training
            .as_ref()
            .ok_or_else(|| ConfigError::new("teacher_training", "required by this experiment"))
    }

    pub fn student_training(&self) -> Result<&TrainConfig, ConfigError> {
        self.student_training
            .as_ref()
            .ok_or_else(|| ConfigError::new("student_training", "required by this experiment"))
    }

    pub fn task(&self) -> Result<&TaskSpec, ConfigError> {
        self.task.as_ref().ok_or_else(|| ConfigError::new("task", "required by this experiment"))
    }

    pub fn init_kind(&self, fallback: InitKind) -> InitKind {
        self.options.init.unwrap_or(fallback)
    }

    /// Schema and cross-field checks for experiment `kind`.
    pub fn validate(&self, kind: ExperimentKind) -> Result<(), ConfigError> {
        if self.repeats == 0 {
            return Err(ConfigError::new("repeats", "must be at least 1"));
        }
        if self.trials == 0 {
            return Err(ConfigError::new("trials", "must be at least 1"));
        }
        for (i, d) in self.distill.iter().enumerate() {
            d.validate().map_err(field_err(&format!("distill[{i}]")))?;
        }
        if let Some(s) = &self.student {
            s.validate().map_err(field_err("student"))?;
        }
        if let Some(t) = &self.teacher {
            t.validate().map_err(field_err("teacher"))?;
        }
        if let Some(t) = &self.teacher_training {
            t.validate().map_err(field_err("teacher_training"))?;
        }
        if let Some(t) = &self.student_training {
            t.validate().map_err(field_err("student_training"))?;
        }
        if let Some(t) = &self.task {
            t.validate().map_err(field_err("task"))?;
        }
        for (i, t) in self.tasks.iter().enumerate() {
            t.validate().map_err(field_err(&format!("tasks[{i}]")))?;
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ConfigError::new("n_grid", "must be strictly increasing"));
        }
        let o = &self.options;
        if !(o.reduction > 0.0) {
            return Err(ConfigError::new("options.reduction", "must be positive"));
        }
        if !(0.0 <= o.balance[0] && o.balance[0] < o.balance[1] && o.balance[1] <= 1.0) {
            return Err(ConfigError::new("options.balance", "must satisfy 0 ≤ lo < hi ≤ 1"));
        }
        if o.test_points == 0 {
            return Err(ConfigError::new("options.test_points", "must be at least 1"));
        }
        match kind {
            ExperimentKind::EffectiveLogits => {
                self.require_distill()?;
                if !(o.z_range[0] < o.z_range[1]) || o.z_points < 2 {
                    return Err(ConfigError::new("options.z_range", "need lo < hi and z_points ≥ 2"));
                }
            }
            ExperimentKind::NtkCheck => {
                self.student()?;
                if o.widths.is_empty() || o.widths.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(ConfigError::new("options.widths", "must be non-empty and strictly increasing"));
                }
                if o.kernel_points < 2 {
                    return Err(ConfigError::new("options.kernel_points", "must be at least 2"));
                }
            }
            ExperimentKind::Inefficiency => {
                let student = self.student()?;
                self.require_grid(2)?;
                if self.n_grid[0] < 2 {
                    return Err(ConfigError::new("n_grid", "inefficiency needs n ≥ 2"));
                }
                if self.teacher.is_some() {
                    self.teacher_training()?;
                    self.require_mixture_task()?;
                    self.require_distill()?;
                } else if self.tasks.is_empty() {
                    return Err(ConfigError::new("tasks", "give target tasks, or a teacher with `task` and `distill`"));
                }
                for (i, t) in self.tasks.iter().chain(self.task.iter()).enumerate() {
                    if t.input_dim != student.input_dim {
                        return Err(ConfigError::new(format!("tasks[{i}].input_dim"), "must match student.input_dim"));
                    }
                    if matches!(t.target, TargetKind::TeacherNet { .. }) {
                        return Err(ConfigError::new(format!("tasks[{i}].target"), "teacher checkpoints are not supported here"));
                    }
                }
            }
            ExperimentKind::Risk => {
                self.student()?;
                self.teacher()?;
                self.teacher_training()?;
                self.require_mixture_task()?;
                self.require_distill()?;
                self.require_grid(3)?;
                if o.init == Some(InitKind::Nngp) {
                    return Err(ConfigError::new("options.init", "risk needs initial logits at test points; use `network` or `zero`"));
                }
            }
            ExperimentKind::AngleDist => {
                self.student()?;
                self.require_mixture_task()?;
                self.require_grid(1)?;
                if o.anchors < 2 || o.angle_grid < 2 {
                    return Err(ConfigError::new("options.anchors", "anchors and angle_grid must be at least 2"));
                }
            }
            ExperimentKind::HardLabelEffect => {
                self.student()?;
                self.teacher()?;
                let tc = self.teacher_training()?;
                self.require_mixture_task()?;
                if self.distill.len() != 1 {
                    return Err(ConfigError::new("distill", "exactly one entry supplies the temperature"));
                }
                self.require_grid(1)?;
                if o.checkpoints.is_empty() || o.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(ConfigError::new("options.checkpoints", "must be non-empty and strictly increasing"));
                }
                if *o.checkpoints.last().unwrap() > tc.epochs {
                    return Err(ConfigError::new("options.checkpoints", "exceed teacher_training.epochs"));
                }
                if o.truth_epochs == Some(0) {
                    return Err(ConfigError::new("options.truth_epochs", "must be at least 1"));
                }
            }
            ExperimentKind::ZeroNorm => {
                self.student()?;
                self.require_mixture_task()?;
                if !self.student_training()?.online_batch {
                    return Err(ConfigError::new("student_training.online_batch", "zero-norm trains on online batches"));
                }
            }
        }
        Ok(())
    }

    fn require_distill(&self) -> Result<(), ConfigError> {
        if self.distill.is_empty() {
            Err(ConfigError::new("distill", "at least one (rho, T) entry is required"))
        } else {
            Ok(())
        }
    }

    fn require_grid(&self, min: usize) -> Result<(), ConfigError> {
        if self.n_grid.len() < min {
            Err(ConfigError::new("n_grid", format!("needs at least {min} point(s)")))
        } else {
            Ok(())
        }
    }

    fn require_mixture_task(&self) -> Result<(), ConfigError> {
        match &self.task().map_err(|_| ConfigError::new("task", "a mixture ground-truth task is required"))?.target {
            TargetKind::Mixture { .. } => Ok(()),
            _ => Err(ConfigError::new("task.target", "must be a mixture")),
        }
    }

    /// Kernel-solve cost `Σ (n+1)³ · repeats · trials` over the grid.
    pub fn solve_cost(&self) -> f64 {
        let per = self.n_grid.iter().fold(0.0, |acc, &n| acc + ((n + 1) as f64).powi(3));
        per * self.repeats as f64 * self.trials as f64
    }

    /// Warnings about budgets and desk-scale limits.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let cost = self.solve_cost();
        if cost > self.options.cost_budget {
            out.push(format!(
                "estimated kernel-solve cost {cost:.3e} exceeds budget {:.3e}",
                self.options.cost_budget
            ));
        }
        if let Some(n) = self.n_grid.iter().find(|&&n| n > 1024) {
            out.push(format!("n = {n} is above the desk-scale limit of 1024"));
        }
        if self.repeats > 20 {
            out.push(format!("{} repeats is above the desk-scale limit of 20", self.repeats));
        }
        if let Some(m) = self.options.widths.iter().find(|&&m| m > 4096) {
            out.push(format!("width {m} is above the desk-scale limit of 4096"));
        }
        out
    }

    /// Fully resolved config for kind `kind` and seed `seed` as JSON, without the output path.
    pub fn resolved(&self, kind: ExperimentKind, seed: u64) -> Value {
        let mut c = self.clone();
        c.experiment = Some(kind);
        c.seed = seed;
        c.output = None;
        canonical(serde_json::to_value(&c).expect("configs serialize"))
    }
}

/// Recursively sorts object keys.
pub fn canonical(v: Value) -> Value {
    match v {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, canonical(v))).collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonical).collect()),
        other => other,
    }
}

/// SHA-256 of the canonical JSON text, hex encoded.
pub fn config_hash(resolved: &Value) -> String {
    let text = serde_json::to_string(resolved).expect("json values serialize");
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
experiment = "effective-logits"
seed = 1

[[distill]]
rho = 0.5
T = 2.0
"#;

    #[test]
    fn minimal_config_validates() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        let kind = c.resolve_kind(None).unwrap();
        assert_eq!(kind, ExperimentKind::EffectiveLogits);
        c.validate(kind).unwrap();
        assert!(c.warnings().is_empty());
    }

    #[test]
    fn out_of_range_rho_names_the_field() {
        let c = ExperimentConfig::parse(&MINIMAL.replace("rho = 0.5", "rho = 1.5")).unwrap();
        let err = c.validate(ExperimentKind::EffectiveLogits).unwrap_err();
        assert_eq!(err.field, "distill[0]");
        assert!(err.message.contains("rho"), "{err}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = ExperimentConfig::parse(&format!("{MINIMAL}\nbogus = 3\n")).unwrap_err();
        assert!(err.message.contains("bogus"), "{err}");
    }

    #[test]
    fn huge_grid_warns() {
        let mut c = ExperimentConfig::parse(MINIMAL).unwrap();
        c.n_grid = vec![10, 100_000];
        let w = c.warnings();
        assert!(w.iter().any(|m| m.contains("cost")), "{w:?}");
    }

    #[test]
    fn kind_mismatch_is_an_error() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        assert!(c.resolve_kind(Some(ExperimentKind::Risk)).is_err());
        let mut c = c;
        c.experiment = None;
        assert_eq!(c.resolve_kind(Some(ExperimentKind::Risk)).unwrap(), ExperimentKind::Risk);
        assert!(c.resolve_kind(None).is_err());
    }

    #[test]
    fn hash_ignores_field_order_and_output() {
        let a = ExperimentConfig::parse(MINIMAL).unwrap();
        let reordered = r#"
seed = 1
output = "elsewhere"
experiment = "effective-logits"

[[distill]]
T = 2.0
rho = 0.5
"#;
        let b = ExperimentConfig::parse(reordered).unwrap();
        let kind = ExperimentKind::EffectiveLogits;
        assert_eq!(config_hash(&a.resolved(kind, 1)), config_hash(&b.resolved(kind, 1)));
        assert_ne!(config_hash(&a.resolved(kind, 1)), config_hash(&a.resolved(kind, 2)));
    }

    #[test]
    fn canonical_sorts_nested_keys() {
        let v: Value = serde_json::from_str(r#"{"b": {"z": 1, "a": 2}, "a": [ {"y": 0, "x": 1} ]}"#).unwrap();
        assert_eq!(serde_json::to_string(&canonical(v)).unwrap(), r#"{"a":[{"x":1,"y":0}],"b":{"a":2,"z":1}}"#);
    }
}
