//! Neural tangent kernels: empirical Gram matrices of random features and
//! the analytic infinite-width recursion for ReLU networks.
//!
//! The analytic kernel follows the arc-cosine recursion
//!
//! ```text
//! Σ⁰(x,y) = σ_W²·xᵀy/d + σ_b²,   Θ⁰ = Σ⁰
//! θ       = arccos(Σ(x,y)/√(Σ(x,x)Σ(y,y)))
//! Σ'(x,y) = σ_W²·√(Σ(x,x)Σ(y,y))/(2π)·(sin θ + (π−θ)cos θ) + σ_b²
//! Σ̇'(x,y) = σ_W²·(π−θ)/(2π)
//! Θ'      = Σ' + Σ̇'·Θ
//! ```
//!
//! applied once per hidden layer.

use std::f64::consts::PI;
use std::io::Write;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};
use crate::linalg::{dot, KernelMatrix};
use crate::network::{feature_factors, stack_inputs, NetConfig, ParamVector};

/// Which kernel stands in for `Θ_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    #[default]
    Analytic,
    Empirical,
}

/// Gram matrix `Θ̂ᵢⱼ = φ(xᵢ)ᵀφ(xⱼ)` of explicit feature vectors.
pub fn empirical_kernel(features: &[Vec<f64>]) -> Result<KernelMatrix> {
    if let Some(first) = features.first() {
        for f in features {
            check_len("feature vector", first.len(), f.len())?;
        }
    }
    KernelMatrix::from_fn(features.len(), |i, j| dot(&features[i], &features[j]))
}

/// Empirical NTK of a finite network at `params`, assembled from per-layer
/// gradient factors without materializing any `p`-dimensional feature.
pub fn empirical_ntk_gram(params: &ParamVector, inputs: &[Vec<f64>]) -> Result<KernelMatrix> {
    let x = stack_inputs(inputs, params.config().input_dim)?;
    let f = feature_factors(params, &x)?;
    let g = f.cross_gram(&f);
    let n = inputs.len();
    KernelMatrix::from_fn(n, |i, j| g[[i, j]])
}

/// Empirical cross kernel `φ(aᵢ)ᵀφ(bⱼ)`.
pub fn empirical_ntk_cross(params: &ParamVector, a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Array2<f64>> {
    let d = params.config().input_dim;
    let fa = feature_factors(params, &stack_inputs(a, d)?)?;
    let fb = feature_factors(params, &stack_inputs(b, d)?)?;
    Ok(fa.cross_gram(&fb))
}

/// Analytic `Θ(x, x)`.
pub fn analytic_ntk_diag(cfg: &NetConfig, x: &[f64]) -> Result<f64> {
    check_len("kernel input", cfg.input_dim, x.len())?;
    let (w2, b2) = (cfg.sigma_w * cfg.sigma_w, cfg.sigma_b * cfg.sigma_b);
    let mut sigma = w2 * dot(x, x) / cfg.input_dim as f64 + b2;
    let mut theta = sigma;
    let sigma_dot = w2 / 2.0;
    for _ in 0..cfg.hidden_layers {
        sigma = w2 * sigma / 2.0 + b2;
        theta = sigma + sigma_dot * theta;
    }
    Ok(theta)
}

/// Analytic infinite-width NTK `Θ(x, y)`.
pub fn analytic_ntk(cfg: &NetConfig, x: &[f64], y: &[f64]) -> Result<f64> {
    if x == y {
        return analytic_ntk_diag(cfg, x);
    }
    check_len("kernel input", cfg.input_dim, x.len())?;
    check_len("kernel input", cfg.input_dim, y.len())?;
    let d = cfg.input_dim as f64;
    let (w2, b2) = (cfg.sigma_w * cfg.sigma_w, cfg.sigma_b * cfg.sigma_b);
    let mut sxx = w2 * dot(x, x) / d + b2;
    let mut syy = w2 * dot(y, y) / d + b2;
    let mut sxy = w2 * dot(x, y) / d + b2;
    let mut theta = sxy;
    for _ in 0..cfg.hidden_layers {
        let scale = (sxx * syy).sqrt();
        let angle = if scale > 0.0 {
            (sxy / scale).clamp(-1.0, 1.0).acos()
        } else {
            PI / 2.0
        };
        let next = w2 * scale / (2.0 * PI) * (angle.sin() + (PI - angle) * angle.cos()) + b2;
        let deriv = w2 * (PI - angle) / (2.0 * PI);
        theta = next + deriv * theta;
        sxy = next;
        sxx = w2 * sxx / 2.0 + b2;
        syy = w2 * syy / 2.0 + b2;
    }
    Ok(theta)
}

/// Analytic output covariance (NNGP) `Σᴸ(x, y)` of the network at initialization.
pub fn analytic_nngp(cfg: &NetConfig, x: &[f64], y: &[f64]) -> Result<f64> {
    check_len("kernel input", cfg.input_dim, x.len())?;
    check_len("kernel input", cfg.input_dim, y.len())?;
    let d = cfg.input_dim as f64;
    let (w2, b2) = (cfg.sigma_w * cfg.sigma_w, cfg.sigma_b * cfg.sigma_b);
    let mut sxx = w2 * dot(x, x) / d + b2;
    let mut syy = w2 * dot(y, y) / d + b2;
    let mut sxy = w2 * dot(x, y) / d + b2;
    for _ in 0..cfg.hidden_layers {
        let scale = (sxx * syy).sqrt();
        let angle = if x == y {
            0.0
        } else if scale > 0.0 {
            (sxy / scale).clamp(-1.0, 1.0).acos()
        } else {
            PI / 2.0
        };
        sxy = w2 * scale / (2.0 * PI) * (angle.sin() + (PI - angle) * angle.cos()) + b2;
        sxx = w2 * sxx / 2.0 + b2;
        syy = w2 * syy / 2.0 + b2;
    }
    Ok(sxy)
}

pub fn analytic_nngp_gram(cfg: &NetConfig, inputs: &[Vec<f64>]) -> Result<KernelMatrix> {
    let n = inputs.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i..n)
                .map(|j| analytic_nngp(cfg, &inputs[i], &inputs[j]))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    KernelMatrix::from_fn(n, |i, j| rows[i][j - i])
}

/// Analytic Gram matrix over `inputs`; upper triangle computed in parallel.
pub fn analytic_ntk_gram(cfg: &NetConfig, inputs: &[Vec<f64>]) -> Result<KernelMatrix> {
    let n = inputs.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i..n)
                .map(|j| analytic_ntk(cfg, &inputs[i], &inputs[j]))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    KernelMatrix::from_fn(n, |i, j| rows[i][j - i])
}

/// Analytic cross kernel `Θ(aᵢ, bⱼ)` as an `|a| × |b|` matrix.
pub fn analytic_ntk_cross(cfg: &NetConfig, a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Array2<f64>> {
    let rows: Vec<Vec<f64>> = a
        .par_iter()
        .map(|x| b.iter().map(|y| analytic_ntk(cfg, x, y)).collect::<Result<Vec<f64>>>())
        .collect::<Result<_>>()?;
    let mut out = Array2::zeros((a.len(), b.len()));
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            out[[i, j]] = v;
        }
    }
    Ok(out)
}

/// `‖A − B‖_F / ‖B‖_F`.
pub fn frobenius_relative_error(a: &KernelMatrix, b: &KernelMatrix) -> Result<f64> {
    check_len("kernel comparison", b.size(), a.size())?;
    let (num, den) = a
        .entries()
        .iter()
        .zip(b.entries())
        .fold((0.0, 0.0), |(n, d), (x, y)| (n + (x - y) * (x - y), d + y * y));
    Ok((num / den).sqrt())
}

/// Writes the matrix as CSV, one row per line, with a header `i,0,1,…`.
pub fn write_kernel_csv<W: Write>(k: &KernelMatrix, mut w: W) -> Result<()> {
    let n = k.size();
    let header: Vec<String> = std::iter::once("i".to_string()).chain((0..n).map(|j| j.to_string())).collect();
    writeln!(w, "{}", header.join(","))?;
    for i in 0..n {
        let row: Vec<String> = std::iter::once(i.to_string())
            .chain((0..n).map(|j| format!("{:e}", k.get(i, j))))
            .collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
