//! Binary distillation loss and effective student logits.
//!
//! The loss mixes a soft cross-entropy against the teacher at temperature
//! `T` with a hard cross-entropy against the ground-truth label:
//!
//! ```text
//! L(z_s) = ρ·H(σ(z_t/T), σ(z_s/T)) + (1−ρ)·H(y_g, σ(z_s))
//! ∂L/∂z_s = (ρ/T)(σ(z_s/T) − σ(z_t/T)) + (1−ρ)(σ(z_s) − y_g)
//! ```
//!
//! The effective logit is the root of the gradient. It is strictly
//! increasing in `z_s`, so it is located by bracketed bisection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `|z_t/T|` for which the sigmoid derivative is trusted.
pub const CORRECTION_LIMIT: f64 = 500.0;

const MAX_BRACKET_DOUBLINGS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistillParams {
    /// Soft ratio `ρ ∈ [0, 1]`.
    pub rho: f64,
    /// Temperature `T > 0`.
    #[serde(rename = "T", alias = "temperature")]
    pub temperature: f64,
}

impl DistillParams {
    pub fn new(rho: f64, temperature: f64) -> Result<Self> {
        let p = Self { rho, temperature };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::InvalidParameter {
                name: "rho",
                value: self.rho,
                reason: "soft ratio must lie in [0, 1]",
            });
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "T",
                value: self.temperature,
                reason: "temperature must be positive",
            });
        }
        Ok(())
    }

    /// Saturation magnitude `30·max(1, T)`.
    pub fn z_max(&self) -> f64 {
        30.0 * self.temperature.max(1.0)
    }
}

/// Teacher logit, ground-truth label and student logit for one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogitTriple {
    pub z_t: f64,
    pub y_g: f64,
    pub z_s: f64,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `σ′(z) = σ(z)(1 − σ(z))`.
pub fn sigmoid_prime(z: f64) -> f64 {
    let s = sigmoid(z);
    s * sigmoid(-z)
}

/// `ln(1 + eᶻ)` without overflow.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Inverse sigmoid, accurate near both ends.
pub fn logit(p: f64) -> f64 {
    p.ln() - (-p).ln_1p()
}

/// `H(p, σ(z)) = −p·ln σ(z) − (1−p)·ln(1−σ(z))`.
pub fn bce_with_logit(p: f64, z: f64) -> f64 {
    p * softplus(-z) + (1.0 - p) * softplus(z)
}

pub fn distill_loss(z_s: f64, z_t: f64, y_g: f64, params: &DistillParams) -> f64 {
    let t = params.temperature;
    params.rho * bce_with_logit(sigmoid(z_t / t), z_s / t)
        + (1.0 - params.rho) * bce_with_logit(y_g, z_s)
}

pub fn loss_gradient(z_s: f64, z_t: f64, y_g: f64, params: &DistillParams) -> f64 {
    let t = params.temperature;
    params.rho / t * (sigmoid(z_s / t) - sigmoid(z_t / t)) + (1.0 - params.rho) * (sigmoid(z_s) - y_g)
}

fn check_label(y_g: f64) -> Result<()> {
    if y_g == 0.0 || y_g == 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "y_g",
            value: y_g,
            reason: "hard label must be 0 or 1",
        })
    }
}

/// Root of [`loss_gradient`] in `z_s`.
pub fn effective_logit(z_t: f64, y_g: f64, params: &DistillParams) -> Result<f64> {
    params.validate()?;
    check_label(y_g)?;
    if params.rho == 0.0 {
        return Err(Error::Unbounded("pure hard labels have no finite effective logit"));
    }
    if params.rho == 1.0 {
        return Ok(z_t);
    }
    let g = |z: f64| loss_gradient(z, z_t, y_g, params);
    let mut lo = -params.z_max();
    let mut hi = params.z_max();
    let mut doublings = 0;
    while g(lo) > 0.0 {
        lo *= 2.0;
        doublings += 1;
        if doublings > MAX_BRACKET_DOUBLINGS {
            return Err(Error::Unbounded("effective logit below every bracket"));
        }
    }
    while g(hi) < 0.0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_BRACKET_DOUBLINGS {
            return Err(Error::Unbounded("effective logit above every bracket"));
        }
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let r = g(mid);
        if r == 0.0 {
            return Ok(mid);
        }
        if r < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if g(lo).abs() <= g(hi).abs() { lo } else { hi })
}

/// Effective logit that never fails for valid inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveLogit {
    pub value: f64,
    /// Set when the value was clamped to `±Z_MAX` because no finite root exists.
    pub saturated: bool,
}

/// Like [`effective_logit`] but maps unbounded solutions to `sign(2y_g−1)·Z_MAX`.
pub fn effective_logit_saturating(z_t: f64, y_g: f64, params: &DistillParams) -> Result<EffectiveLogit> {
    match effective_logit(z_t, y_g, params) {
        Ok(value) => Ok(EffectiveLogit { value, saturated: false }),
        Err(Error::Unbounded(_)) => Ok(EffectiveLogit {
            value: (2.0 * y_g - 1.0) * params.z_max(),
            saturated: true,
        }),
        Err(e) => Err(e),
    }
}

/// Closed form at `T = 1`: `logit(ρσ(z_t) + (1−ρ)y_g)`.
pub fn effective_logit_closed_t1(z_t: f64, y_g: f64, rho: f64) -> Result<f64> {
    DistillParams::new(rho, 1.0)?;
    check_label(y_g)?;
    let p = rho * sigmoid(z_t) + (1.0 - rho) * y_g;
    if p <= 0.0 || p >= 1.0 {
        return Err(Error::Unbounded("target probability is 0 or 1"));
    }
    Ok(logit(p))
}

/// First-order response `δz_h = ∂z_s,eff/∂(1−ρ)` at `ρ = 1`.
pub fn correction_logit(z_t: f64, y_g: f64, temperature: f64) -> Result<f64> {
    DistillParams::new(1.0, temperature)?;
    if (z_t / temperature).abs() > CORRECTION_LIMIT {
        return Err(Error::Overflow("sigmoid derivative underflows for |z_t/T| > 500"));
    }
    Ok(temperature * temperature * (y_g - sigmoid(z_t)) / sigmoid_prime(z_t / temperature))
}

/// Effective logit of label smoothing with strength `ε`: `±ln(2/ε − 1)`.
pub fn label_smoothing_logit(y_g: f64, epsilon: f64) -> Result<f64> {
    check_label(y_g)?;
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            value: epsilon,
            reason: "smoothing strength must lie in (0, 1]",
        });
    }
    let a = (2.0 / epsilon - 1.0).ln();
    Ok(if y_g == 1.0 { a } else { -a })
}
