//! Data-inefficiency curves `I(n)`.
//!
//! With a `tasks` list every task is measured on shared inputs, kernels and
//! initial logits; each repeat draws a fresh realization of each task. With
//! a `teacher`, targets are the effective logits of a trained teacher for
//! every `distill` entry instead.

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use kdntk::distillation::effective_logit_saturating;
use kdntk::kernel::analytic_ntk_gram;
use kdntk::metrics::{inefficiency_curves, InefficiencyCurve, InefficiencyDraw};
use kdntk::network::{forward_batch, stack_inputs};
use kdntk::tasks::{sample_inputs, TargetKind, TaskSpec};
use rand_chacha::ChaCha8Rng;

use super::common::{elapsed_ms, initial_logits, GroundTruthTask};
use super::{trial_quals, Env, RunError};
use crate::config::InitKind;
use crate::record::{qualified, RunRecord};

pub fn run(env: &Env<'_>, sink: &mut Vec<RunRecord>) -> Result<(), RunError> {
    for trial in 0..env.cfg.trials {
        if env.cfg.teacher.is_some() {
            distill_trial(env, trial, sink)?;
        } else {
            task_trial(env, trial, sink)?;
        }
    }
    Ok(())
}

fn inputs(env: &Env<'_>, dim: usize, std: f64, n: usize, path: &[u64]) -> Vec<Vec<f64>> {
    let mut r: ChaCha8Rng = env.seeds.stream("inputs", path);
    sample_inputs(dim, std, n, &mut r)
}

fn target_name(t: &TaskSpec) -> &'static str {
    match t.target {
        TargetKind::Mixture { .. } => "mixture",
        TargetKind::FlippedMixture { .. } => "flipped-mixture",
        TargetKind::TeacherNet { .. } => "teacher-net",
        TargetKind::Zero => "zero",
        TargetKind::RandomLabels => "random-labels",
    }
}

fn task_trial(env: &Env<'_>, trial: usize, sink: &mut Vec<RunRecord>) -> Result<(), RunError> {
    let cfg = env.cfg;
    let student = *cfg.student()?;
    let tasks = &cfg.tasks;
    let std = tasks[0].input_std;
    let start = Instant::now();
    let curves = inefficiency_curves(&cfg.n_grid, cfg.repeats, tasks.len(), |n, rep| {
        let path = [trial as u64, n as u64, rep as u64];
        let xs = inputs(env, student.input_dim, std, n + 1, &path);
        let kernel = analytic_ntk_gram(&student, &xs)?;
        let z0 = initial_logits(env.cfg, &env.seeds, InitKind::Nngp, &student, &xs, &path)?;
        let shifts = tasks
            .iter()
            .enumerate()
            .map(|(t, spec)| {
                let task = spec.realize(env.seeds.seed("task", &[trial as u64, t as u64, n as u64, rep as u64]))?;
                let z = task.logits(&xs)?;
                // Random labels are a random target shift in their own right.
                Ok(match spec.target {
                    TargetKind::RandomLabels => z,
                    _ => z.iter().zip(&z0).map(|(a, b)| a - b).collect(),
                })
            })
            .collect::<kdntk::Result<Vec<_>>>()?;
        Ok(InefficiencyDraw { kernel, shifts })
    })?;
    let ms = elapsed_ms(start);
    for (t, (spec, curve)) in tasks.iter().zip(&curves).enumerate() {
        let mut quals = trial_quals(cfg, trial);
        quals.push(("task", t.to_string()));
        quals.push(("target", target_name(spec).to_string()));
        let (q, p_flip) = match &spec.target {
            TargetKind::Mixture { mixture } => (Some(mixture.q), None),
            TargetKind::FlippedMixture { mixture, p_flip } => (Some(mixture.q), Some(*p_flip)),
            _ => (None, None),
        };
        push_curve(env, curve, &quals, sink, |mut r| {
            r.q = q;
            r.p_flip = p_flip;
            r.wall_ms(ms)
        });
    }
    Ok(())
}

fn distill_trial(env: &Env<'_>, trial: usize, sink: &mut Vec<RunRecord>) -> Result<(), RunError> {
    let cfg = env.cfg;
    let student = *cfg.student()?;
    let start = Instant::now();
    let gt = GroundTruthTask::draw(cfg, &env.seeds, trial as u64)?;
    let run = gt.train_teacher(
        cfg.teacher()?,
        cfg.teacher_training()?,
        cfg.options.teacher_data,
        env.seeds.seed("teacher", &[trial as u64]),
    )?;
    let teacher = &run.last().params;
    let reduction = cfg.options.reduction;
    let saturated: Vec<AtomicBool> = cfg.distill.iter().map(|_| AtomicBool::new(false)).collect();
    let curves = inefficiency_curves(&cfg.n_grid, cfg.repeats, cfg.distill.len(), |n, rep| {
        let path = [trial as u64, n as u64, rep as u64];
        let xs = inputs(env, student.input_dim, gt.spec.input_std, n + 1, &path);
        let kernel = analytic_ntk_gram(&student, &xs)?;
        let z0 = initial_logits(env.cfg, &env.seeds, InitKind::Nngp, &student, &xs, &path)?;
        let zt: Vec<f64> = forward_batch(teacher, &stack_inputs(&xs, student.input_dim)?)?
            .into_iter()
            .map(|z| reduction * z)
            .collect();
        let yg = gt.labels(&xs)?;
        let shifts = cfg
            .distill
            .iter()
            .enumerate()
            .map(|(k, p)| {
                zt.iter()
                    .zip(&yg)
                    .zip(&z0)
                    .map(|((&t, &y), &b)| {
                        let eff = effective_logit_saturating(t, y, p)?;
                        if eff.saturated {
                            saturated[k].store(true, Ordering::Relaxed);
                        }
                        Ok(eff.value - b)
                    })
                    .collect::<kdntk::Result<Vec<_>>>()
            })
            .collect::<kdntk::Result<Vec<_>>>()?;
        Ok(InefficiencyDraw { kernel, shifts })
    })?;
    let ms = elapsed_ms(start);
    let quals = trial_quals(cfg, trial);
    for ((p, curve), sat) in cfg.distill.iter().zip(&curves).zip(&saturated) {
        let sat = sat.load(Ordering::Relaxed);
        push_curve(env, curve, &quals, sink, |r| {
            r.rho(p.rho).temperature(p.temperature).flag_if(sat, "saturated").wall_ms(ms)
        });
    }
    Ok(())
}

fn push_curve(
    env: &Env<'_>,
    curve: &InefficiencyCurve,
    quals: &[(&str, String)],
    sink: &mut Vec<RunRecord>,
    decorate: impl Fn(RunRecord) -> RunRecord,
) {
    for pt in &curve.points {
        for (name, value) in [
            ("inefficiency", pt.value),
            ("mean_norm", pt.mean_norm),
            ("mean_norm_next", pt.mean_norm_next),
            ("skipped", pt.skipped as f64),
        ] {
            let r = env
                .ctx
                .record(qualified(name, quals), value)
                .n(pt.n)
                .flag_if(pt.unreliable, "unreliable");
            sink.push(decorate(r));
        }
    }
}
