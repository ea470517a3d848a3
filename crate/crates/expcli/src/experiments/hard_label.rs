//! Sign of the hard-label correction against teacher stopping epoch.
//!
//! For each stopping epoch `e` the teacher supplies `z_t = r·f_e(x)`, the
//! correction logits follow from `z_t` and the ground-truth labels, and the
//! projection of the hard-label weight response on the part of `Δw_g`
//! orthogonal to the teacher is reported raw, normalized and as the
//! derivative of `cos α(Δŵ, Δw_g)`. The accuracy of a pure hard-label
//! student is reported once per `n` for comparison.

use std::time::Instant;

use kdntk::distillation::correction_logit;
use kdntk::hardlabel::CorrectionGeometry;
use kdntk::kernel::{analytic_ntk_cross, analytic_ntk_gram};
use kdntk::linalg::kernel_inner;
use kdntk::network::{forward_batch, stack_inputs, TrainConfig};

use super::common::{accuracy, elapsed_ms, initial_logits, GroundTruthTask};
use super::{trial_quals, Env, RunError};
use crate::config::InitKind;
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
    let params = cfg.distill[0];
    let t = trial as u64;
    let quals = trial_quals(cfg, trial);

    let start = Instant::now();
    let mut gt = GroundTruthTask::draw(cfg, &env.seeds, t)?;
    if let Some(epochs) = o.truth_epochs {
        let train = TrainConfig {
            epochs,
            checkpoints: vec![epochs],
            ..cfg.teacher_training()?.clone()
        };
        gt = gt.into_network_truth(cfg.teacher()?, &train, o.teacher_data, o.reduction, env.seeds.seed("truth", &[t]))?;
    }
    let train = TrainConfig {
        checkpoints: o.checkpoints.clone(),
        ..cfg.teacher_training()?.clone()
    };
    let run = gt.train_teacher(cfg.teacher()?, &train, o.teacher_data, env.seeds.seed("teacher", &[t]))?;
    let test = gt.inputs(o.test_points, &mut env.seeds.stream("test", &[t]));
    let test_labels = gt.labels(&test)?;
    let test_m = stack_inputs(&test, student.input_dim)?;
    let teachers = o
        .checkpoints
        .iter()
        .map(|&e| {
            let ckpt = run.at_epoch(e).expect("checkpoint epochs are scheduled");
            let acc = accuracy(&forward_batch(&ckpt.params, &test_m)?, &test_labels);
            Ok((e, &ckpt.params, acc))
        })
        .collect::<kdntk::Result<Vec<_>>>()?;
    let teacher_ms = elapsed_ms(start);

    for &n in &cfg.n_grid {
        let start = Instant::now();
        let path = [t, n as u64];
        let xs = gt.inputs(n, &mut env.seeds.stream("inputs", &path));
        let x = stack_inputs(&xs, student.input_dim)?;
        let k = analytic_ntk_gram(&student, &xs)?;
        let z0 = initial_logits(cfg, &env.seeds, InitKind::Nngp, &student, &xs, &path)?;
        let yg = gt.labels(&xs)?;
        let dz_g: Vec<f64> = gt
            .logits(&xs)?
            .iter()
            .zip(&z0)
            .map(|(g, b)| o.truth_scale * g - b)
            .collect();
        let norm_wg = kernel_inner(&k, &dz_g, &dz_g)?.max(0.0).sqrt();

        // Pure hard-label student: saturated targets, test logits without z₀.
        let z_max = params.z_max();
        let hard: Vec<f64> = yg.iter().zip(&z0).map(|(y, b)| (2.0 * y - 1.0) * z_max - b).collect();
        let coef = k.cholesky()?.solve(&hard)?;
        let pred: Vec<f64> = analytic_ntk_cross(&student, &test, &xs)?
            .rows()
            .into_iter()
            .map(|row| row.iter().zip(&coef).map(|(a, c)| a * c).sum())
            .collect();
        sink.push(
            env.ctx
                .record(qualified("student_hard_accuracy", &quals), accuracy(&pred, &test_labels))
                .n(n)
                .temperature(params.temperature)
                .wall_ms(elapsed_ms(start) + teacher_ms),
        );

        for &(e, teacher, acc) in &teachers {
            let start = Instant::now();
            let zt: Vec<f64> = forward_batch(teacher, &x)?.into_iter().map(|z| o.reduction * z).collect();
            let dz_h = zt
                .iter()
                .zip(&yg)
                .map(|(&z, &y)| correction_logit(z, y, params.temperature))
                .collect::<kdntk::Result<Vec<_>>>()?;
            let dz_t: Vec<f64> = zt.iter().zip(&z0).map(|(z, b)| z - b).collect();
            let geom = CorrectionGeometry::new(&k, &dz_g, &dz_t, &dz_h)?;
            let ms = elapsed_ms(start);
            for (name, value) in [
                ("teacher_accuracy", acc),
                ("projection", geom.projection()),
                ("projection_normalized", geom.normalized_projection()),
                ("derivative", geom.derivative(norm_wg)),
            ] {
                sink.push(
                    env.ctx
                        .record(qualified(name, &quals), value)
                        .n(n)
                        .epoch(e)
                        .temperature(params.temperature)
                        .wall_ms(ms),
                );
            }
        }
    }
    Ok(())
}
