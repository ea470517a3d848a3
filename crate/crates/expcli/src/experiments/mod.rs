//! The seven experiments.
//!
//! Each experiment appends rows to a sink in a fixed order. Independent
//! units may run in parallel, but their rows are collected before being
//! appended, so the output never depends on scheduling.

mod angle_dist;
pub mod common;
mod effective_logits;
mod hard_label;
mod inefficiency;
mod ntk_check;
mod risk;
mod zero_norm;

use crate::config::{ConfigError, ExperimentConfig, ExperimentKind};
use crate::record::{RecordContext, RunRecord};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(#[from] kdntk::Error),
    #[error("cannot write outputs: {0}")]
    Output(String),
}

impl RunError {
    /// Process exit code: 1 for config errors, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Numerical(_) | RunError::Output(_) => 2,
        }
    }
}

/// Shared inputs of an experiment run.
pub struct Env<'a> {
    pub cfg: &'a ExperimentConfig,
    pub ctx: RecordContext,
    pub seeds: common::Seeds,
}

impl Env<'_> {
    pub fn kind(&self) -> ExperimentKind {
        self.ctx.experiment
    }
}

/// Runs `env`'s experiment, appending rows to `sink` as units complete.
pub fn run(env: &Env<'_>, sink: &mut Vec<RunRecord>) -> Result<(), RunError> {
    match env.kind() {
        ExperimentKind::EffectiveLogits => effective_logits::run(env, sink),
        ExperimentKind::NtkCheck => ntk_check::run(env, sink),
        ExperimentKind::Inefficiency => inefficiency::run(env, sink),
        ExperimentKind::Risk => risk::run(env, sink),
        ExperimentKind::AngleDist => angle_dist::run(env, sink),
        ExperimentKind::HardLabelEffect => hard_label::run(env, sink),
        ExperimentKind::ZeroNorm => zero_norm::run(env, sink),
    }
}

/// `@trial=k` qualifier when the config asks for several trials.
pub(crate) fn trial_quals(cfg: &ExperimentConfig, trial: usize) -> Vec<(&'static str, String)> {
    if cfg.trials > 1 {
        vec![("trial", trial.to_string())]
    } else {
        Vec::new()
    }
}
