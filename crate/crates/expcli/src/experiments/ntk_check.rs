//! Empirical-versus-analytic kernel error over a width sweep.

use std::time::Instant;

use kdntk::kernel::{analytic_ntk_diag, analytic_ntk_gram, empirical_ntk_gram, frobenius_relative_error};
use kdntk::tasks::{sample_inputs, INPUT_STD};
use rayon::prelude::*;

use super::common::{elapsed_ms, network_at_init};
use super::{Env, RunError};
use crate::record::{qualified, RunRecord};

/// Threshold of the diagonal-ratio check.
pub const DIAG_RATIO_FLOOR: f64 = 0.25;

pub fn run(env: &Env<'_>, sink: &mut Vec<RunRecord>) -> Result<(), RunError> {
    let cfg = env.cfg;
    let student = *cfg.student()?;
    let o = &cfg.options;
    let n = o.kernel_points;
    let trials = cfg.trials;
    // Input set `s` is shared by every width, so widths are compared on paired draws.
    let inputs: Vec<Vec<Vec<f64>>> = (0..trials)
        .map(|s| sample_inputs(student.input_dim, INPUT_STD, n, &mut env.seeds.stream("inputs", &[s as u64])))
        .collect();
    let analytic = inputs
        .iter()
        .map(|xs| analytic_ntk_gram(&student, xs))
        .collect::<kdntk::Result<Vec<_>>>()?;

    let units: Vec<(usize, usize)> = o.widths.iter().flat_map(|&m| (0..trials).map(move |s| (m, s))).collect();
    let errors = units
        .par_iter()
        .map(|&(m, s)| {
            let start = Instant::now();
            let p = network_at_init(&student, m, env.seeds.seed("network", &[m as u64, s as u64]))?;
            let err = frobenius_relative_error(&empirical_ntk_gram(&p, &inputs[s])?, &analytic[s])?;
            Ok((err, elapsed_ms(start)))
        })
        .collect::<kdntk::Result<Vec<_>>>()?;

    let mut prev = f64::INFINITY;
    for (w, &m) in o.widths.iter().enumerate() {
        let chunk = &errors[w * trials..(w + 1) * trials];
        for (s, &(err, ms)) in chunk.iter().enumerate() {
            let name = qualified("frobenius_error", &[("m", m.to_string()), ("trial", s.to_string())]);
            sink.push(env.ctx.record(name, err).n(n).wall_ms(ms));
        }
        let mean = chunk.iter().map(|e| e.0).sum::<f64>() / trials as f64;
        let ms = chunk.iter().map(|e| e.1).sum();
        sink.push(
            env.ctx
                .record(qualified("frobenius_error_mean", &[("m", m.to_string())]), mean)
                .n(n)
                .flag_if(!(mean < prev), "not-decreasing")
                .wall_ms(ms),
        );
        prev = mean;
    }

    // The ReLU kernel diagonal depends on the input only through its norm.
    for &r in &o.ratio_norms {
        let start = Instant::now();
        let mut x = vec![0.0; student.input_dim];
        x[0] = r;
        let ratio = analytic_ntk_diag(&student, &x)? / (r * r);
        sink.push(
            env.ctx
                .record(qualified("diag_ratio", &[("norm", r.to_string())]), ratio)
                .flag_if(ratio < DIAG_RATIO_FLOOR, "below-floor")
                .wall_ms(elapsed_ms(start)),
        );
    }
    Ok(())
}
