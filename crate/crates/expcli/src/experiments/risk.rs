//! Transfer risk of kernel students against sample size, with power-law fits.

use std::time::Instant;

use kdntk::distillation::effective_logit_saturating;
use kdntk::kernel::{analytic_ntk_cross, analytic_ntk_gram};
use kdntk::metrics::{empirical_risk, fit_power_law};
use kdntk::network::{forward_batch, stack_inputs};
use rayon::prelude::*;

use super::common::{accuracy, elapsed_ms, mean, network_at_init, GroundTruthTask};
use super::{trial_quals, Env, RunError};
use crate::config::{ConfigError, InitKind};
use crate::record::{qualified, RunRecord};

pub fn run(env: &Env<'_>, sink: &mut Vec<RunRecord>) -> Result<(), RunError> {
    for trial in 0..env.cfg.trials {
        trial_rows(env, trial, sink)?;
    }
    Ok(())
}

fn trial_rows(env: &Env<'_>, trial: usize, sink: &mut Vec<RunRecord>) -> Result<(), RunError> {
    let cfg = env.cfg;
    let o = &cfg.options;
    let student = *cfg.student()?;
    let init = cfg.init_kind(InitKind::Network);
    if init == InitKind::Nngp {
        return Err(ConfigError::new("options.init", "risk needs initial logits at test points; use `network` or `zero`").into());
    }
    let t = trial as u64;
    let start = Instant::now();
    let gt = GroundTruthTask::draw(cfg, &env.seeds, t)?;
    let run = gt.train_teacher(cfg.teacher()?, cfg.teacher_training()?, o.teacher_data, env.seeds.seed("teacher", &[t]))?;
    let teacher = &run.last().params;
    let test = gt.inputs(o.test_points, &mut env.seeds.stream("test", &[t]));
    let test_m = stack_inputs(&test, student.input_dim)?;
    let teacher_test = forward_batch(teacher, &test_m)?;
    let quals = trial_quals(cfg, trial);
    sink.push(
        env.ctx
            .record(qualified("teacher_accuracy", &quals), accuracy(&teacher_test, &gt.labels(&test)?))
            .wall_ms(elapsed_ms(start)),
    );

    // Teacher labels act as the ground truth of the student task.
    let units: Vec<(usize, usize)> = cfg.n_grid.iter().flat_map(|&n| (0..cfg.repeats).map(move |r| (n, r))).collect();
    let risks = units
        .par_iter()
        .map(|&(n, rep)| -> kdntk::Result<(Vec<f64>, u64)> {
            let start = Instant::now();
            let path = [t, n as u64, rep as u64];
            let xs = gt.inputs(n, &mut env.seeds.stream("inputs", &path));
            let x = stack_inputs(&xs, student.input_dim)?;
            let zt: Vec<f64> = forward_batch(teacher, &x)?.into_iter().map(|z| o.reduction * z).collect();
            let (z0, z0_test) = match init {
                InitKind::Network => {
                    let p0 = network_at_init(&student, o.init_width, env.seeds.seed("init", &path))?;
                    (forward_batch(&p0, &x)?, forward_batch(&p0, &test_m)?)
                }
                _ => (vec![0.0; n], vec![0.0; test.len()]),
            };
            let chol = analytic_ntk_gram(&student, &xs)?.cholesky()?;
            let cross = analytic_ntk_cross(&student, &test, &xs)?;
            let out = cfg
                .distill
                .iter()
                .map(|p| {
                    let dz = zt
                        .iter()
                        .zip(&z0)
                        .map(|(&z, &b)| Ok(effective_logit_saturating(z, (z > 0.0) as u8 as f64, p)?.value - b))
                        .collect::<kdntk::Result<Vec<f64>>>()?;
                    let coef = chol.solve(&dz)?;
                    let pred: Vec<f64> = cross
                        .rows()
                        .into_iter()
                        .zip(&z0_test)
                        .map(|(row, b)| b + row.iter().zip(&coef).map(|(k, c)| k * c).sum::<f64>())
                        .collect();
                    Ok(empirical_risk(&pred, &teacher_test)?.risk)
                })
                .collect::<kdntk::Result<Vec<f64>>>()?;
            Ok((out, elapsed_ms(start)))
        })
        .collect::<kdntk::Result<Vec<_>>>()?;

    let floor = 1.0 / o.test_points as f64;
    let reps = cfg.repeats;
    for (k, p) in cfg.distill.iter().enumerate() {
        let mut means = Vec::with_capacity(cfg.n_grid.len());
        for (g, &n) in cfg.n_grid.iter().enumerate() {
            let chunk = &risks[g * reps..(g + 1) * reps];
            let vals: Vec<f64> = chunk.iter().map(|c| c.0[k]).collect();
            let m = mean(&vals);
            let se = if reps > 1 {
                (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / ((reps - 1) * reps) as f64).sqrt()
            } else {
                0.0
            };
            let ms = chunk.iter().map(|c| c.1).sum();
            for (name, value) in [("risk", m), ("risk_se", se)] {
                sink.push(
                    env.ctx
                        .record(qualified(name, &quals), value)
                        .n(n)
                        .rho(p.rho)
                        .temperature(p.temperature)
                        .flag_if(m < floor, "floored")
                        .wall_ms(ms),
                );
            }
            means.push(m);
        }
        let ns: Vec<f64> = cfg.n_grid.iter().map(|&n| n as f64).collect();
        let clipped: Vec<f64> = means.iter().map(|m| m.max(floor)).collect();
        let fit = fit_power_law(&ns, &clipped)?;
        let floored = means.iter().any(|&m| m < floor);
        for (name, value) in [("slope", fit.exponent), ("intercept", fit.intercept), ("fit_residual", fit.residual)] {
            sink.push(
                env.ctx
                    .record(qualified(name, &quals), value)
                    .rho(p.rho)
                    .temperature(p.temperature)
                    .flag_if(floored, "floored"),
            );
        }
    }
    Ok(())
}
