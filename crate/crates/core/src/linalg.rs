//! Dense symmetric positive-definite algebra for Gram matrices.
//!
//! Every kernel solve in the crate goes through [`Cholesky`]. A
//! [`KernelMatrix`] carries its own diagonal jitter; when the first
//! factorization attempt fails the jitter is escalated by a factor of ten
//! up to [`JITTER_RETRIES`] times before giving up with
//! [`Error::SingularKernel`].

use std::f64::consts::FRAC_PI_2;

use crate::error::{check_len, Error, Result};

/// Default jitter, relative to the mean diagonal entry.
pub const RELATIVE_JITTER: f64 = 1e-8;
/// Number of ×10 jitter escalations attempted after the first failure.
pub const JITTER_RETRIES: usize = 3;

const SYMMETRY_TOL: f64 = 1e-10;

/// Square symmetric Gram matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    n: usize,
    entries: Vec<f64>,
    jitter: f64,
}

impl KernelMatrix {
    /// Builds a kernel matrix from row-major entries with the default
    /// jitter `1e-8 · trace / n`.
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        check_len("kernel matrix entries", n * n, entries.len())?;
        if let Some(bad) = entries.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "kernel entry",
                value: *bad,
                reason: "must be finite",
            });
        }
        let scale = entries.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (entries[i * n + j], entries[j * n + i]);
                if (a - b).abs() > SYMMETRY_TOL * scale.max(f64::MIN_POSITIVE) {
                    return Err(Error::InvalidParameter {
                        name: "kernel symmetry",
                        value: a - b,
                        reason: "matrix is not symmetric",
                    });
                }
            }
        }
        let mut k = Self {
            n,
            entries,
            jitter: 0.0,
        };
        k.jitter = k.default_jitter();
        Ok(k)
    }

    /// Builds a kernel matrix from a symmetric entry function, evaluating
    /// only the upper triangle.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        Self::new(n, entries)
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Self::new(n, entries).expect("identity is a valid kernel")
    }

    /// Replaces the diagonal jitter.
    pub fn with_jitter(mut self, jitter: f64) -> Self {
        assert!(jitter >= 0.0 && jitter.is_finite(), "jitter must be non-negative");
        self.jitter = jitter;
        self
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    fn default_jitter(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            RELATIVE_JITTER * self.trace().abs() / self.n as f64
        }
    }

    /// Leading `m × m` principal submatrix, with a freshly computed default jitter.
    pub fn leading(&self, m: usize) -> Self {
        assert!(m <= self.n);
        let mut entries = Vec::with_capacity(m * m);
        for i in 0..m {
            entries.extend_from_slice(&self.entries[i * self.n..i * self.n + m]);
        }
        let mut k = Self {
            n: m,
            entries,
            jitter: 0.0,
        };
        k.jitter = k.default_jitter();
        k
    }

    /// `K·v` without jitter.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("matvec", self.n, v.len())?;
        Ok(self
            .entries
            .chunks_exact(self.n.max(1))
            .take(self.n)
            .map(|row| dot(row, v))
            .collect())
    }

    /// Cholesky factorization of `K + jitter·I`, escalating the jitter on failure.
    pub fn cholesky(&self) -> Result<Cholesky> {
        let base = if self.jitter > 0.0 {
            self.jitter
        } else {
            self.default_jitter().max(f64::MIN_POSITIVE)
        };
        let mut jitter = self.jitter;
        for attempt in 0..=JITTER_RETRIES {
            if let Some(lower) = factorize(self.n, &self.entries, jitter) {
                return Ok(Cholesky {
                    n: self.n,
                    lower,
                    jitter,
                });
            }
            jitter = base * 10f64.powi(attempt as i32 + 1);
        }
        Err(Error::SingularKernel {
            scale: self.trace() / self.n.max(1) as f64,
            jitter: jitter / 10.0,
        })
    }
}

/// Lower-triangular factor `L` with `L·Lᵀ = K + jitter·I`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    lower: Vec<f64>,
    jitter: f64,
}

fn factorize(n: usize, a: &[f64], jitter: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let row_j = &l[j * n..j * n + j];
        let diag = a[j * n + j] + jitter - dot(row_j, row_j);
        if !(diag > 0.0) || !diag.is_finite() {
            return None;
        }
        let ljj = diag.sqrt();
        l[j * n + j] = ljj;
        for i in (j + 1)..n {
            let s = a[i * n + j] - dot(&l[i * n..i * n + j], &l[j * n..j * n + j]);
            l[i * n + j] = s / ljj;
        }
    }
    Some(l)
}

impl Cholesky {
    pub fn size(&self) -> usize {
        self.n
    }

    /// Jitter actually added to the diagonal (after any escalation).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Solves `L·y = b`.
    pub fn forward_substitute(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_len("triangular solve", self.n, b.len())?;
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let s = y[i] - dot(&self.lower[i * n..i * n + i], &y[..i]);
            y[i] = s / self.lower[i * n + i];
        }
        Ok(y)
    }

    fn back_substitute(&self, y: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.lower[k * n + i] * y[k];
            }
            y[i] = s / self.lower[i * n + i];
        }
    }

    /// Solves `(K + jitter·I)·v = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut y = self.forward_substitute(b)?;
        self.back_substitute(&mut y);
        Ok(y)
    }

    /// `aᵀ(K + jitter·I)⁻¹b`, evaluated as `(L⁻¹a)·(L⁻¹b)` so that it is
    /// exactly symmetric in its arguments.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        let la = self.forward_substitute(a)?;
        let lb = self.forward_substitute(b)?;
        Ok(dot(&la, &lb))
    }

    /// `L·v`, which maps white noise to a sample with covariance `K + jitter·I`.
    pub fn mul_lower(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("triangular product", self.n, v.len())?;
        let n = self.n;
        Ok((0..n).map(|i| dot(&self.lower[i * n..=i * n + i], &v[..=i])).collect())
    }

    /// Diagonal of `(K + jitter·I)⁻¹`.
    pub fn inverse_diag(&self) -> Vec<f64> {
        let n = self.n;
        let mut diag = vec![0.0; n];
        let mut col = vec![0.0; n];
        for c in 0..n {
            // Column c of L⁻¹ vanishes above row c.
            for i in c..n {
                let rhs = if i == c { 1.0 } else { 0.0 };
                let s = rhs - dot(&self.lower[i * n + c..i * n + i], &col[c..i]);
                col[i] = s / self.lower[i * n + i];
            }
            for i in c..n {
                diag[c] += col[i] * col[i];
            }
        }
        diag
    }

    /// Explicit inverse `(K + jitter·I)⁻¹`, row-major.
    pub fn inverse(&self) -> Vec<f64> {
        let n = self.n;
        // L⁻¹ column by column, then (L⁻¹)ᵀL⁻¹.
        let mut linv = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for c in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[c] = 1.0;
            let col = self.forward_substitute(&e).expect("length matches");
            for r in 0..n {
                linv[r * n + c] = col[r];
            }
        }
        let mut inv = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let start = j.max(i);
                let mut s = 0.0;
                for k in start..n {
                    s += linv[k * n + i] * linv[k * n + j];
                }
                inv[i * n + j] = s;
                inv[j * n + i] = s;
            }
        }
        inv
    }
}

/// Solves `(K + jitter·I)·v = b`.
pub fn spd_solve(k: &KernelMatrix, b: &[f64]) -> Result<Vec<f64>> {
    check_len("spd_solve", k.size(), b.len())?;
    k.cholesky()?.solve(b)
}

/// Kernel inner product `⟨a, b⟩_K = aᵀ(K + jitter·I)⁻¹b`.
pub fn kernel_inner(k: &KernelMatrix, a: &[f64], b: &[f64]) -> Result<f64> {
    check_len("kernel_inner", k.size(), a.len())?;
    check_len("kernel_inner", k.size(), b.len())?;
    k.cholesky()?.inner(a, b)
}

/// Acute angle `cos⁻¹(|uᵀv| / (‖u‖‖v‖))` in `[0, π/2]`.
pub fn acute_angle(u: &[f64], v: &[f64]) -> Result<f64> {
    check_len("acute_angle", u.len(), v.len())?;
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || !nu.is_finite() {
        return Err(Error::DegenerateVector("first argument of acute_angle has zero norm"));
    }
    if nv == 0.0 || !nv.is_finite() {
        return Err(Error::DegenerateVector("second argument of acute_angle has zero norm"));
    }
    // Half-angle form 2·atan2(‖û − sv̂‖, ‖û + sv̂‖) with s = sign(ûᵀv̂):
    // exact at 0 and π/2, unlike arccos near 1.
    let c: f64 = u.iter().zip(v).map(|(a, b)| (a / nu) * (b / nv)).sum();
    let s = if c < 0.0 { -1.0 } else { 1.0 };
    let (mut diff, mut sum) = (0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        let (a, b) = (a / nu, s * b / nv);
        diff += (a - b) * (a - b);
        sum += (a + b) * (a + b);
    }
    Ok((2.0 * diff.sqrt().atan2(sum.sqrt())).clamp(0.0, FRAC_PI_2))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    // Scaled to avoid overflow on large vectors.
    let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * a.iter().map(|v| (v / scale).powi(2)).sum::<f64>().sqrt()
}
