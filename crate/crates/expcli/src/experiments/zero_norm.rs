//! Weight-change norm of online-batch linearized training, fitting the zero
//! function versus a mixture task.

use std::time::Instant;

use kdntk::network::{init_params, train_linearized, DeltaRole, LinearData, LinearLoss};
use kdntk::tasks::FnSource;
use ndarray::Array2;

use super::common::{elapsed_ms, GroundTruthTask};
use super::{trial_quals, Env, RunError};
use crate::record::{qualified, RunRecord};

pub fn run(env: &Env<'_>, sink: &mut Vec<RunRecord>) -> Result<(), RunError> {
    let cfg = env.cfg;
    let student = *cfg.student()?;
    let train = cfg.student_training()?;
    for trial in 0..cfg.trials {
        let t = trial as u64;
        let gt = GroundTruthTask::draw(cfg, &env.seeds, t)?;
        let p0 = init_params(&student, env.seeds.seed("network", &[t]))?;
        for (which, role, scale) in [("zero", DeltaRole::Zero, 0.0), ("task", DeltaRole::GroundTruth, 1.0)] {
            let start = Instant::now();
            let mixture = &gt.mixture;
            let mut source = FnSource::new(student.input_dim, |x: &Array2<f64>| {
                let z: Vec<f64> = x
                    .rows()
                    .into_iter()
                    .map(|r| scale * mixture.value(r.as_slice().expect("row-major")))
                    .collect();
                let hard = z.iter().map(|v| (*v > 0.0) as u8 as f64).collect();
                Ok((z, hard))
            });
            source.input_std = gt.spec.input_std;
            let fit = train_linearized(
                &p0,
                LinearData::Online(&source),
                LinearLoss::L2,
                role,
                train,
                env.seeds.seed("train", &[t, kdntk::rng::label(which)]),
            )?;
            let ms = elapsed_ms(start);
            let mut quals = trial_quals(cfg, trial);
            quals.push(("target", which.to_string()));
            for &(e, norm) in &fit.norm_trace {
                sink.push(env.ctx.record(qualified("weight_norm", &quals), norm).epoch(e).wall_ms(ms));
            }
            sink.push(
                env.ctx
                    .record(qualified("final_grad_norm", &quals), fit.grad_norm)
                    .epoch(train.epochs)
                    .flag_if(!fit.converged, "unconverged")
                    .wall_ms(ms),
            );
        }
    }
    Ok(())
}
