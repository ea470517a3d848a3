//! `z_s,eff` over a `(ρ, T) × y_g × z_t` grid.

use std::time::Instant;

use kdntk::distillation::{effective_logit_saturating, sigmoid};

use super::common::{elapsed_ms, linspace};
use super::{Env, RunError};
use crate::record::{qualified, RunRecord};

pub fn run(env: &Env<'_>, sink: &mut Vec<RunRecord>) -> Result<(), RunError> {
    let o = &env.cfg.options;
    let zs = linspace(o.z_range[0], o.z_range[1], o.z_points);
    for p in &env.cfg.distill {
        for y in [0.0, 1.0] {
            let start = Instant::now();
            let mut rows = Vec::with_capacity(2 * zs.len());
            for &z_t in &zs {
                let eff = effective_logit_saturating(z_t, y, p)?;
                let quals = [("z_t", z_t.to_string()), ("y_g", y.to_string())];
                for (name, value) in [("z_eff", eff.value), ("p_eff", sigmoid(eff.value))] {
                    rows.push(
                        env.ctx
                            .record(qualified(name, &quals), value)
                            .rho(p.rho)
                            .temperature(p.temperature)
                            .flag_if(eff.saturated, "saturated"),
                    );
                }
            }
            let ms = elapsed_ms(start);
            sink.extend(rows.into_iter().map(|r| r.wall_ms(ms)));
        }
    }
    Ok(())
}
