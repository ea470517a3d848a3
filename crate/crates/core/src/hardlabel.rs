//! Hard-label correction for imperfect teachers.
//!
//! All inner products are `⟨a, b⟩ = aᵀΘ_n⁻¹b`. With `Δz_g` the ground-truth
//! shift, `Δz_t` the teacher shift and `δz_h` the correction logits, the
//! derivative of the student-oracle cosine with respect to the hard-label
//! weight `1 − ρ` at `ρ = 1` is
//!
//! ```text
//! (⟨Δz_g, δz_h⟩ − ⟨Δz_g, Δz_t⟩/⟨Δz_t, Δz_t⟩·⟨Δz_t, δz_h⟩) / (‖Δw_g‖·√⟨Δz_t, Δz_t⟩)
//! ```
//!
//! The bracket is the projection of `δŵ_h` on the part of `Δŵ_g` that is
//! orthogonal to the teacher's weight change.

use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, Cholesky, KernelMatrix};

/// Vectors mapped through `L⁻¹`, so that `⟨a, b⟩` becomes a plain dot product.
struct Whitened {
    chol: Cholesky,
}

impl Whitened {
    fn new(k: &KernelMatrix) -> Result<Self> {
        Ok(Self { chol: k.cholesky()? })
    }

    fn map(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("logit shift", self.chol.size(), v.len())?;
        self.chol.forward_substitute(v)
    }
}

fn check_norm(norm_wg: f64) -> Result<()> {
    if norm_wg > 0.0 && norm_wg.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "norm_wg",
            value: norm_wg,
            reason: "ground-truth weight norm must be positive",
        })
    }
}

/// `cos α(Δŵ, Δw_g) = ⟨Δz_g, Δz_s⟩ / (‖Δw_g‖·√⟨Δz_s, Δz_s⟩)`.
pub fn cos_alpha_g(k: &KernelMatrix, dz_g: &[f64], dz_s: &[f64], norm_wg: f64) -> Result<f64> {
    check_norm(norm_wg)?;
    let w = Whitened::new(k)?;
    let (g, s) = (w.map(dz_g)?, w.map(dz_s)?);
    let ss = dot(&s, &s);
    if ss == 0.0 {
        return Err(Error::DegenerateVector("student logit shift"));
    }
    Ok(dot(&g, &s) / (norm_wg * ss.sqrt()))
}

/// Inner products needed by the correction analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionGeometry {
    pub gh: f64,
    pub gt: f64,
    pub tt: f64,
    pub th: f64,
    pub gg: f64,
    pub hh: f64,
}

impl CorrectionGeometry {
    pub fn new(k: &KernelMatrix, dz_g: &[f64], dz_t: &[f64], dz_h: &[f64]) -> Result<Self> {
        let w = Whitened::new(k)?;
        let (g, t, h) = (w.map(dz_g)?, w.map(dz_t)?, w.map(dz_h)?);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return Err(Error::DegenerateVector("teacher logit shift"));
        }
        Ok(Self {
            gh: dot(&g, &h),
            gt: dot(&g, &t),
            tt,
            th: dot(&t, &h),
            gg: dot(&g, &g),
            hh: dot(&h, &h),
        })
    }

    /// `⟨δŵ_h, Δŵ_c⟩`.
    pub fn projection(&self) -> f64 {
        self.gh - self.gt / self.tt * self.th
    }

    /// `⟨δŵ_h, Δŵ_c⟩ / (‖δŵ_h‖·‖Δŵ_c‖)`, zero when either factor vanishes.
    pub fn normalized_projection(&self) -> f64 {
        let cc = (self.gg - self.gt * self.gt / self.tt).max(0.0);
        let den = (self.hh * cc).sqrt();
        if den > 0.0 {
            self.projection() / den
        } else {
            0.0
        }
    }

    pub fn derivative(&self, norm_wg: f64) -> f64 {
        self.projection() / (norm_wg * self.tt.sqrt())
    }
}

/// `∂cos α(Δŵ, Δw_g)/∂(1−ρ)` at `ρ = 1`.
pub fn hard_label_derivative(
    k: &KernelMatrix,
    dz_g: &[f64],
    dz_t: &[f64],
    dz_h: &[f64],
    norm_wg: f64,
) -> Result<f64> {
    check_norm(norm_wg)?;
    Ok(CorrectionGeometry::new(k, dz_g, dz_t, dz_h)?.derivative(norm_wg))
}

/// `⟨Δz_g, δz_h⟩ − ⟨Δz_g, Δz_t⟩/⟨Δz_t, Δz_t⟩·⟨Δz_t, δz_h⟩`.
pub fn correction_projection(k: &KernelMatrix, dz_g: &[f64], dz_t: &[f64], dz_h: &[f64]) -> Result<f64> {
    Ok(CorrectionGeometry::new(k, dz_g, dz_t, dz_h)?.projection())
}
