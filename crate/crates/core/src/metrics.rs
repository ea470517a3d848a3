//! Weight-change geometry of linearized students.
//!
//! With `Θ_n` the kernel on the training inputs and `Δz = z − z₀` the
//! target shift, the converged student moves its weights by
//! `Δŵ = φ(X)Θ_n⁻¹Δz`, whose length is `√(ΔzᵀΘ_n⁻¹Δz)`. The quantities
//! here are built from that identity: data inefficiency
//! `I(n) = n·[ln E‖Δŵ_{n+1}‖ − ln E‖Δŵ_n‖]`, the accumulative angle
//! distribution `p(β) = P[ᾱ(φ(x), Δw_* − Δw_z) > β]`, the transfer-risk
//! bound `R_n ≤ p(π/2 − ᾱ_n)` and empirical sign-disagreement risks.

use std::f64::consts::FRAC_PI_2;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::kernel::{analytic_nngp_gram, analytic_ntk_cross, analytic_ntk_gram, empirical_ntk_cross, empirical_ntk_gram, KernelKind};
use crate::linalg::{acute_angle, kernel_inner, Cholesky, KernelMatrix};
use crate::network::{feature_factors, forward_batch, jvp, forward_trace, stack_inputs, NetConfig, ParamVector, WeightDelta};

/// Default number of points on the `β` grid.
pub const ANGLE_GRID_POINTS: usize = 512;

/// Fraction of skipped repeats above which a grid point is unreliable.
pub const SKIP_LIMIT: f64 = 0.2;

/// `‖Δŵ‖ = √(ΔzᵀΘ_n⁻¹Δz)`.
pub fn weight_change_norm(k: &KernelMatrix, dz: &[f64]) -> Result<f64> {
    Ok(kernel_inner(k, dz, dz)?.max(0.0).sqrt())
}

/// Weight-change norm on all `n` points and the `n` norms obtained by
/// leaving out each point in turn.
///
/// Removing point `i` from the kernel system changes the squared norm by
/// `(Θ⁻¹Δz)ᵢ² / (Θ⁻¹)ᵢᵢ`, so all leave-one-out norms cost one factorization.
pub fn leave_one_out_norms(k: &KernelMatrix, dz: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_len("leave-one-out norms", k.size(), dz.len())?;
    let chol = k.cholesky()?;
    loo_from_factor(&chol, &chol.inverse_diag(), dz)
}

fn loo_from_factor(chol: &Cholesky, inv_diag: &[f64], dz: &[f64]) -> Result<(f64, Vec<f64>)> {
    let a = chol.solve(dz)?;
    let full2: f64 = dz.iter().zip(&a).map(|(z, v)| z * v).sum();
    let loo = a
        .iter()
        .zip(inv_diag)
        .map(|(ai, dii)| (full2 - ai * ai / dii).max(0.0).sqrt())
        .collect();
    Ok((full2.max(0.0).sqrt(), loo))
}

/// `n·[ln E_{n+1} − ln E_n]` from the two expected norms.
pub fn inefficiency(n: usize, mean_norm_n: f64, mean_norm_next: f64) -> f64 {
    n as f64 * (mean_norm_next.ln() - mean_norm_n.ln())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InefficiencyPoint {
    pub n: usize,
    /// `E‖Δŵ_n‖` averaged over repeats.
    pub mean_norm: f64,
    /// `E‖Δŵ_{n+1}‖` averaged over repeats.
    pub mean_norm_next: f64,
    pub value: f64,
    pub repeats: usize,
    pub skipped: usize,
    pub unreliable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InefficiencyCurve {
    pub points: Vec<InefficiencyPoint>,
}

impl InefficiencyCurve {
    pub fn ns(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.n).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    /// Mean of `I(n)` over grid points with `lo ≤ n ≤ hi`.
    pub fn plateau(&self, lo: usize, hi: usize) -> Option<f64> {
        let v: Vec<f64> = self
            .points
            .iter()
            .filter(|p| (lo..=hi).contains(&p.n) && p.value.is_finite())
            .map(|p| p.value)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// One repeat of an inefficiency measurement: a kernel on `n + 1` points
/// and any number of target shifts on those points.
pub struct InefficiencyDraw {
    pub kernel: KernelMatrix,
    pub shifts: Vec<Vec<f64>>,
}

/// Data-inefficiency curves for several targets sharing the same draws.
///
/// For each grid point `n` and repeat, `draw(n, repeat)` supplies `n + 1`
/// points. `E‖Δŵ_{n+1}‖` averages the full norm and `E‖Δŵ_n‖` averages the
/// leave-one-out norms, so every point of the draw serves as the extra
/// sample once. Repeats whose kernel cannot be factorized are skipped.
pub fn inefficiency_curves<F>(grid: &[usize], repeats: usize, targets: usize, draw: F) -> Result<Vec<InefficiencyCurve>>
where
    F: Fn(usize, usize) -> Result<InefficiencyDraw> + Sync,
{
    if repeats == 0 {
        return Err(Error::InvalidParameter {
            name: "repeats",
            value: 0.0,
            reason: "need at least one repeat",
        });
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) || grid.first().is_some_and(|&n| n < 2) {
        return Err(Error::InvalidParameter {
            name: "n_grid",
            value: grid.first().copied().unwrap_or(0) as f64,
            reason: "grid must be strictly increasing with n ≥ 2",
        });
    }
    let units: Vec<(usize, usize)> = grid.iter().flat_map(|&n| (0..repeats).map(move |r| (n, r))).collect();
    let results: Vec<Option<Vec<(f64, f64)>>> = units
        .par_iter()
        .map(|&(n, r)| {
            let d = draw(n, r)?;
            check_len("inefficiency kernel", n + 1, d.kernel.size())?;
            check_len("inefficiency targets", targets, d.shifts.len())?;
            let chol = match d.kernel.cholesky() {
                Ok(c) => c,
                Err(Error::SingularKernel { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            let inv_diag = chol.inverse_diag();
            let mut out = Vec::with_capacity(targets);
            for dz in &d.shifts {
                check_len("inefficiency shift", n + 1, dz.len())?;
                let (full, loo) = loo_from_factor(&chol, &inv_diag, dz)?;
                out.push((full, loo.iter().sum::<f64>() / loo.len() as f64));
            }
            Ok(Some(out))
        })
        .collect::<Result<_>>()?;
    let mut curves = vec![InefficiencyCurve { points: Vec::new() }; targets];
    for (g, &n) in grid.iter().enumerate() {
        let chunk = &results[g * repeats..(g + 1) * repeats];
        let ok: Vec<&Vec<(f64, f64)>> = chunk.iter().flatten().collect();
        let skipped = repeats - ok.len();
        for (t, curve) in curves.iter_mut().enumerate() {
            let (sum_full, sum_loo) = ok.iter().fold((0.0, 0.0), |(a, b), v| (a + v[t].0, b + v[t].1));
            let cnt = ok.len().max(1) as f64;
            let (mean_next, mean_n) = (sum_full / cnt, sum_loo / cnt);
            curve.points.push(InefficiencyPoint {
                n,
                mean_norm: mean_n,
                mean_norm_next: mean_next,
                value: if ok.is_empty() { f64::NAN } else { inefficiency(n, mean_n, mean_next) },
                repeats,
                skipped,
                unreliable: skipped as f64 > SKIP_LIMIT * repeats as f64,
            });
        }
    }
    Ok(curves)
}

/// Initial logits `z₀` of the linearized student.
#[derive(Debug, Clone, PartialEq)]
pub enum InitLogits {
    Zero,
    /// Gaussian draw from the infinite-width output covariance.
    Nngp,
    /// Outputs of a concrete network at initialization.
    Network(ParamVector),
}

/// Linearized student: kernel choice plus initial logits.
#[derive(Debug, Clone)]
pub struct LinearStudent {
    pub config: NetConfig,
    pub kernel: KernelKind,
    /// Network at initialization, required for the empirical kernel.
    pub params: Option<ParamVector>,
    pub init: InitLogits,
}

impl LinearStudent {
    pub fn analytic(config: NetConfig, init: InitLogits) -> Self {
        Self {
            config,
            kernel: KernelKind::Analytic,
            params: None,
            init,
        }
    }

    pub fn empirical(params: ParamVector) -> Self {
        Self {
            config: *params.config(),
            kernel: KernelKind::Empirical,
            init: InitLogits::Network(params.clone()),
            params: Some(params),
        }
    }

    fn params(&self) -> Result<&ParamVector> {
        self.params.as_ref().ok_or(Error::InvalidParameter {
            name: "kernel",
            value: f64::NAN,
            reason: "empirical kernel needs network parameters",
        })
    }

    pub fn gram(&self, xs: &[Vec<f64>]) -> Result<KernelMatrix> {
        match self.kernel {
            KernelKind::Analytic => analytic_ntk_gram(&self.config, xs),
            KernelKind::Empirical => empirical_ntk_gram(self.params()?, xs),
        }
    }

    pub fn cross(&self, a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Array2<f64>> {
        match self.kernel {
            KernelKind::Analytic => analytic_ntk_cross(&self.config, a, b),
            KernelKind::Empirical => empirical_ntk_cross(self.params()?, a, b),
        }
    }

    /// `z₀` on `xs`; the NNGP variant draws from `rng`.
    pub fn initial_logits(&self, xs: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        match &self.init {
            InitLogits::Zero => Ok(vec![0.0; xs.len()]),
            InitLogits::Nngp => {
                let chol = analytic_nngp_gram(&self.config, xs)?.cholesky()?;
                let white: Vec<f64> = (0..xs.len()).map(|_| rng.sample(StandardNormal)).collect();
                chol.mul_lower(&white)
            }
            InitLogits::Network(p) => forward_batch(p, &stack_inputs(xs, self.config.input_dim)?),
        }
    }

    /// Converged student logits `z₀(x) + Θ(x, X)Θ_n⁻¹(z − z₀(X))` on `test`.
    pub fn predict(&self, train: &[Vec<f64>], targets: &[f64], test: &[Vec<f64>]) -> Result<Vec<f64>> {
        check_len("student targets", train.len(), targets.len())?;
        if matches!(self.init, InitLogits::Nngp) {
            return Err(Error::InvalidParameter {
                name: "init",
                value: f64::NAN,
                reason: "predictions need deterministic initial logits",
            });
        }
        let mut dummy = crate::rng::stream(0, &[]);
        let z0 = self.initial_logits(train, &mut dummy)?;
        let dz: Vec<f64> = targets.iter().zip(&z0).map(|(z, z0)| z - z0).collect();
        let coef = self.gram(train)?.cholesky()?.solve(&dz)?;
        let base = self.initial_logits(test, &mut dummy)?;
        let cross = self.cross(test, train)?;
        Ok(base
            .iter()
            .zip(cross.rows())
            .map(|(b, row)| b + row.iter().zip(&coef).map(|(k, c)| k * c).sum::<f64>())
            .collect())
    }
}

/// `ᾱ_n = ᾱ(Δw_* − Δw_z, Δŵ − Δw_z)`.
pub fn alpha_n(student: &WeightDelta, oracle: &WeightDelta, zero: &WeightDelta) -> Result<f64> {
    acute_angle(oracle.minus(zero)?.values(), student.minus(zero)?.values())
}

/// Approximation `cos ᾱ_n ≈ ‖Δŵ‖/‖Δw_*‖` that ignores the zero-function weights.
pub fn cos_alpha_neglecting_zero(student: &WeightDelta, oracle: &WeightDelta) -> Result<f64> {
    let o = oracle.norm();
    if o == 0.0 {
        return Err(Error::DegenerateVector("oracle weight change"));
    }
    Ok(student.norm() / o)
}

/// Monte Carlo estimate of `p(β) = P[ᾱ > β]` on a uniform grid over `[0, π/2]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AngleCurve {
    pub betas: Vec<f64>,
    pub p: Vec<f64>,
    /// 95% normal-approximation half-widths.
    pub half_width: Vec<f64>,
    pub samples: usize,
    /// Largest sampled `|cos ᾱ|`.
    pub max_cos: f64,
}

impl AngleCurve {
    /// Survival curve from sampled `|cos ᾱ|` values.
    pub fn from_abs_cosines(abs_cos: &[f64], grid_points: usize) -> Result<Self> {
        if grid_points < 2 {
            return Err(Error::InvalidParameter {
                name: "grid_points",
                value: grid_points as f64,
                reason: "need at least two grid points",
            });
        }
        let mut sorted: Vec<f64> = abs_cos.iter().map(|c| c.abs().min(1.0)).collect();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let betas: Vec<f64> = (0..grid_points)
            .map(|i| FRAC_PI_2 * i as f64 / (grid_points - 1) as f64)
            .collect();
        let mut p = Vec::with_capacity(grid_points);
        let mut half_width = Vec::with_capacity(grid_points);
        for (i, b) in betas.iter().enumerate() {
            // ᾱ > β ⇔ |cos ᾱ| < cos β; the end points are fixed exactly.
            let v = if i == 0 {
                1.0
            } else if i == grid_points - 1 {
                0.0
            } else {
                let c = b.cos();
                sorted.partition_point(|&x| x < c) as f64 / n.max(1) as f64
            };
            p.push(v);
            half_width.push(1.96 * (v * (1.0 - v) / n.max(1) as f64).sqrt());
        }
        Ok(Self {
            betas,
            p,
            half_width,
            samples: n,
            max_cos: sorted.last().copied().unwrap_or(0.0),
        })
    }

    /// `p` at `β`, taken from the grid point at or below `β`; since `p` is
    /// nonincreasing this never understates the interpolated value.
    pub fn at(&self, beta: f64) -> f64 {
        let beta = beta.clamp(0.0, FRAC_PI_2);
        let step = FRAC_PI_2 / (self.betas.len() - 1) as f64;
        let i = ((beta / step) * (1.0 + 1e-12)).floor() as usize;
        self.p[i.min(self.p.len() - 1)]
    }
}

/// Angle distribution from explicit weight directions:
/// `|cos ᾱ| = |φ(x)ᵀv| / (‖φ(x)‖·‖v‖)` with `v = Δw_* − Δw_z`.
pub fn angle_distribution_features(
    params0: &ParamVector,
    direction: &WeightDelta,
    inputs: &[Vec<f64>],
    grid_points: usize,
) -> Result<AngleCurve> {
    let norm = direction.norm();
    if norm == 0.0 {
        return Err(Error::DegenerateVector("oracle direction"));
    }
    let x = stack_inputs(inputs, params0.config().input_dim)?;
    let trace = forward_trace(params0, &x)?;
    let proj = jvp(params0, &trace, direction.values())?;
    let diag = feature_factors(params0, &x)?.diag();
    let cos: Vec<f64> = proj
        .iter()
        .zip(diag)
        .map(|(p, d)| (p / (d.sqrt() * norm)).abs())
        .collect();
    AngleCurve::from_abs_cosines(&cos, grid_points)
}

/// Angle distribution from effective logits:
/// `|cos ᾱ| = |z_s,eff(x)| / (‖Δw_* − Δw_z‖·√Θ(x,x))`.
pub fn angle_distribution_logits(
    effective_logits: &[f64],
    kernel_diag: &[f64],
    oracle_minus_zero_norm: f64,
    grid_points: usize,
) -> Result<AngleCurve> {
    check_len("angle distribution", effective_logits.len(), kernel_diag.len())?;
    if !(oracle_minus_zero_norm > 0.0) {
        return Err(Error::DegenerateVector("oracle direction"));
    }
    let cos: Vec<f64> = effective_logits
        .iter()
        .zip(kernel_diag)
        .map(|(z, k)| (z / (oracle_minus_zero_norm * k.sqrt())).abs())
        .collect();
    AngleCurve::from_abs_cosines(&cos, grid_points)
}

/// Transfer-risk bound `R_n ≤ p(π/2 − ᾱ_n)`.
pub fn risk_bound(curve: &AngleCurve, alpha: f64) -> Result<f64> {
    if !(0.0..=FRAC_PI_2 + 1e-12).contains(&alpha) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            value: alpha,
            reason: "must lie in [0, π/2]",
        });
    }
    Ok(curve.at(FRAC_PI_2 - alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskEstimate {
    /// Fraction of samples with `z_s·z_t < 0` or a zero logit.
    pub risk: f64,
    /// Number of samples where either logit was exactly zero.
    pub ties: usize,
    pub samples: usize,
    /// Binomial standard error of `risk`.
    pub std_err: f64,
}

/// Sign-disagreement risk `P[z_t·z_s < 0]` over paired logits.
pub fn empirical_risk(student: &[f64], teacher: &[f64]) -> Result<RiskEstimate> {
    check_len("empirical risk", teacher.len(), student.len())?;
    let mut errors = 0;
    let mut ties = 0;
    for (s, t) in student.iter().zip(teacher) {
        if *s == 0.0 || *t == 0.0 {
            ties += 1;
            errors += 1;
        } else if (*s > 0.0) != (*t > 0.0) {
            errors += 1;
        }
    }
    let n = student.len();
    let risk = if n == 0 { 0.0 } else { errors as f64 / n as f64 };
    Ok(RiskEstimate {
        risk,
        ties,
        samples: n,
        std_err: (risk * (1.0 - risk) / n.max(1) as f64).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLaw {
    pub exponent: f64,
    pub intercept: f64,
    /// RMS residual of the log-log fit.
    pub residual: f64,
}

/// Least-squares line through `(ln n, ln value)`.
pub fn fit_power_law(ns: &[f64], values: &[f64]) -> Result<PowerLaw> {
    check_len("power-law fit", ns.len(), values.len())?;
    if ns.len() < 3 {
        return Err(Error::InvalidParameter {
            name: "points",
            value: ns.len() as f64,
            reason: "need at least three points",
        });
    }
    if let Some(v) = ns.iter().chain(values).find(|v| !(**v > 0.0)) {
        return Err(Error::InvalidParameter {
            name: "values",
            value: *v,
            reason: "power-law fit needs positive data",
        });
    }
    let x: Vec<f64> = ns.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let m = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / m, y.iter().sum::<f64>() / m);
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let residual = (x
        .iter()
        .zip(&y)
        .map(|(a, b)| (b - intercept - exponent * a).powi(2))
        .sum::<f64>()
        / m)
        .sqrt();
    Ok(PowerLaw {
        exponent,
        intercept,
        residual,
    })
}

/// Centered moving average with the given half-window, for plotting.
pub fn smooth(values: &[f64], half_window: usize) -> Vec<f64> {
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half_window);
            let hi = (i + half_window + 1).min(values.len());
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{feature, init_params, DeltaRole};
    use crate::rng;
    use crate::tasks::{sample_inputs, INPUT_STD};
    use proptest::prelude::*;

    fn spd(n: usize, seed: u64) -> KernelMatrix {
        let cfg = NetConfig::new(2, 2, 1);
        let xs = sample_inputs(2, INPUT_STD, n, &mut rng::stream(seed, &[]));
        analytic_ntk_gram(&cfg, &xs).unwrap()
    }

    #[test]
    fn norm_examples() {
        let k = KernelMatrix::identity(2).with_jitter(0.0);
        assert!((weight_change_norm(&k, &[3.0, 4.0]).unwrap() - 5.0).abs() < 1e-14);
        assert_eq!(weight_change_norm(&k, &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn norm_equals_explicit_feature_solution() {
        let cfg = NetConfig::new(2, 2, 64);
        let p = init_params(&cfg, 3).unwrap();
        let xs = sample_inputs(2, INPUT_STD, 12, &mut rng::stream(1, &[]));
        let feats: Vec<Vec<f64>> = xs.iter().map(|x| feature(&p, x).unwrap()).collect();
        let k = crate::kernel::empirical_kernel(&feats).unwrap().with_jitter(0.0);
        let dz: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).sin()).collect();
        let coef = k.cholesky().unwrap().solve(&dz).unwrap();
        let mut w = vec![0.0; p.len()];
        for (f, c) in feats.iter().zip(&coef) {
            for (wi, fi) in w.iter_mut().zip(f) {
                *wi += c * fi;
            }
        }
        let explicit = crate::linalg::dot(&w, &w).sqrt();
        let got = weight_change_norm(&k, &dz).unwrap();
        assert!((got - explicit).abs() < 1e-6 * explicit, "{got} vs {explicit}");
    }

    #[test]
    fn leave_one_out_matches_refactorization() {
        let k = spd(9, 4);
        let dz: Vec<f64> = (0..9).map(|i| (i as f64).cos()).collect();
        let (full, loo) = leave_one_out_norms(&k, &dz).unwrap();
        assert!((full - weight_change_norm(&k, &dz).unwrap()).abs() < 1e-10 * full);
        for i in 0..9 {
            let keep: Vec<usize> = (0..9).filter(|&j| j != i).collect();
            let sub = KernelMatrix::from_fn(8, |a, b| k.get(keep[a], keep[b])).unwrap().with_jitter(k.jitter());
            let dzi: Vec<f64> = keep.iter().map(|&j| dz[j]).collect();
            let want = weight_change_norm(&sub, &dzi).unwrap();
            assert!((loo[i] - want).abs() < 1e-6 * want, "{i}: {} vs {want}", loo[i]);
        }
    }

    #[test]
    fn injected_power_law() {
        let law = |n: usize| 3.0 * (n as f64).sqrt();
        let v = inefficiency(100, law(100), law(101));
        // 0.5·100·ln(101/100)
        assert!((v - 0.4975165).abs() < 1e-6, "{v}");
        assert!((v - 50.0 * 1.01f64.ln()).abs() < 1e-12);
        assert_eq!(inefficiency(40, 2.5, 2.5), 0.0);
    }

    #[test]
    fn curves_flag_skipped_repeats() {
        let singular = KernelMatrix::new(3, vec![1.0, 2.0, 0.0, 2.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let curves = inefficiency_curves(&[2], 5, 1, |_, r| {
            Ok(InefficiencyDraw {
                kernel: if r < 2 { singular.clone() } else { KernelMatrix::identity(3) },
                shifts: vec![vec![1.0, 1.0, 1.0]],
            })
        })
        .unwrap();
        let p = &curves[0].points[0];
        assert_eq!(p.skipped, 2);
        assert!(p.unreliable);
        // Identity kernel: full norm √3, leave-one-out norms √2.
        assert!((p.value - 2.0 * (3f64.sqrt().ln() - 2f64.sqrt().ln())).abs() < 1e-6);
        assert!(inefficiency_curves(&[4, 4], 1, 1, |_, _| unreachable!()).is_err());
    }

    #[test]
    fn nested_norms_grow() {
        let k = spd(40, 8);
        let dz: Vec<f64> = (0..40).map(|i| ((i * 7) as f64).sin()).collect();
        let mut last = 0.0;
        for m in [5, 10, 20, 40] {
            let sub = k.leading(m).with_jitter(0.0);
            let v = weight_change_norm(&sub, &dz[..m]).unwrap();
            assert!(v >= last * (1.0 - 1e-6));
            last = v;
        }
    }

    #[test]
    fn alpha_examples() {
        let a = WeightDelta::new(DeltaRole::Student, vec![1.0, 2.0, 0.0]);
        let b = WeightDelta::new(DeltaRole::Oracle, vec![1.0, 2.0, 0.0]);
        let z = WeightDelta::zeros(DeltaRole::Zero, 3);
        assert_eq!(alpha_n(&a, &b, &z).unwrap(), 0.0);
        let c = WeightDelta::new(DeltaRole::Oracle, vec![-2.0, 1.0, 0.0]);
        assert!((alpha_n(&a, &c, &z).unwrap() - FRAC_PI_2).abs() < 1e-12);
        assert!(alpha_n(&z, &b, &z).is_err());
    }

    #[test]
    fn angle_curve_edges_and_monotonicity() {
        let cos: Vec<f64> = (0..1000).map(|i| (i as f64 / 1000.0) * 0.3).collect();
        let c = AngleCurve::from_abs_cosines(&cos, ANGLE_GRID_POINTS).unwrap();
        assert_eq!(c.p[0], 1.0);
        assert_eq!(*c.p.last().unwrap(), 0.0);
        assert!(c.p.windows(2).all(|w| w[0] >= w[1]));
        // |cos| ≤ 0.3 everywhere, so ᾱ > β surely for cos β > 0.3.
        assert_eq!(c.at(0.3f64.acos() - 0.01), 1.0);
        assert_eq!(risk_bound(&c, 0.0).unwrap(), 0.0);
        assert_eq!(risk_bound(&c, FRAC_PI_2).unwrap(), 1.0);
    }

    #[test]
    fn feature_and_logit_angle_modes_agree() {
        let cfg = NetConfig::new(2, 2, 32);
        let p = init_params(&cfg, 2).unwrap();
        let dir = WeightDelta::new(DeltaRole::Oracle, init_params(&cfg, 9).unwrap().into_values());
        let xs = sample_inputs(2, INPUT_STD, 200, &mut rng::stream(3, &[]));
        let a = angle_distribution_features(&p, &dir, &xs, 64).unwrap();
        let x = stack_inputs(&xs, 2).unwrap();
        let trace = forward_trace(&p, &x).unwrap();
        let logits = jvp(&p, &trace, dir.values()).unwrap();
        let diag = feature_factors(&p, &x).unwrap().diag();
        let b = angle_distribution_logits(&logits, &diag, dir.norm(), 64).unwrap();
        assert_eq!(a.p, b.p);
    }

    #[test]
    fn risk_examples() {
        let t = [1.0, -2.0, 3.0, -0.5];
        assert_eq!(empirical_risk(&t, &t).unwrap().risk, 0.0);
        let neg: Vec<f64> = t.iter().map(|v| -v).collect();
        assert_eq!(empirical_risk(&neg, &t).unwrap().risk, 1.0);
        let r = empirical_risk(&[0.0, 1.0], &[1.0, 1.0]).unwrap();
        assert_eq!((r.risk, r.ties), (0.5, 1));
    }

    #[test]
    fn halfspace_disagreement_is_angle_over_pi() {
        let gamma = 0.6f64;
        let xs = sample_inputs(2, INPUT_STD, 100_000, &mut rng::stream(12, &[]));
        let s: Vec<f64> = xs.iter().map(|x| x[0]).collect();
        let t: Vec<f64> = xs.iter().map(|x| gamma.cos() * x[0] + gamma.sin() * x[1]).collect();
        let r = empirical_risk(&s, &t).unwrap();
        assert!((r.risk - gamma / std::f64::consts::PI).abs() < 0.01);
    }

    #[test]
    fn power_law_examples() {
        let ns = [10.0, 20.0, 40.0, 80.0];
        let v: Vec<f64> = ns.iter().map(|n: &f64| 4.0 * n.powf(-0.7)).collect();
        let f = fit_power_law(&ns, &v).unwrap();
        assert!((f.exponent + 0.7).abs() < 1e-12 && f.residual < 1e-12);
        assert!((f.intercept - 4f64.ln()).abs() < 1e-12);
        assert!(fit_power_law(&ns, &[2.0; 4]).unwrap().exponent.abs() < 1e-15);
        assert!(fit_power_law(&ns, &[1.0, 0.0, 1.0, 1.0]).is_err());
        assert!(fit_power_law(&ns[..2], &v[..2]).is_err());
    }

    #[test]
    fn smoothing_preserves_constants() {
        assert_eq!(smooth(&[2.0; 5], 2), vec![2.0; 5]);
        assert_eq!(smooth(&[0.0, 3.0, 0.0], 1), vec![1.5, 1.0, 1.5]);
    }

    #[test]
    fn predictions_interpolate_training_targets() {
        let cfg = NetConfig::new(2, 2, 16);
        let student = LinearStudent::empirical(init_params(&cfg, 5).unwrap());
        let xs = sample_inputs(2, INPUT_STD, 6, &mut rng::stream(6, &[]));
        let z = vec![1.0, -1.0, 0.5, 2.0, -0.3, 0.0];
        let pred = student.predict(&xs, &z, &xs).unwrap();
        for (a, b) in pred.iter().zip(&z) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
    }

    proptest! {
        #[test]
        fn nngp_initial_logits_are_reproducible(seed in 0u64..1000) {
            let s = LinearStudent::analytic(NetConfig::new(2, 2, 1), InitLogits::Nngp);
            let xs = sample_inputs(2, INPUT_STD, 5, &mut rng::stream(seed, &[]));
            let a = s.initial_logits(&xs, &mut rng::stream(seed, &[1])).unwrap();
            let b = s.initial_logits(&xs, &mut rng::stream(seed, &[1])).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn angle_curve_is_monotone(cos in prop::collection::vec(0.0f64..1.0, 1..300)) {
            let c = AngleCurve::from_abs_cosines(&cos, 97).unwrap();
            prop_assert!(c.p.windows(2).all(|w| w[0] >= w[1]));
            prop_assert!(c.p[0] <= 1.0 && *c.p.last().unwrap() >= 0.0);
        }
    }
}
