//! Bound inputs straight from a symmetric matrix `M` and mean vector `μ`.
//!
//! The trace path needs `tr M`, `μᵀMμ`, `‖Mμ‖²`, `‖M‖²_HS` and an upper
//! estimate of `maxᵢ|λᵢ|`; no eigendecomposition. [`full_spectrum`] exists
//! for simulation and cross-checking.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffs::FunctionSpec;
use crate::error::{Error, Result};
use crate::spectrum::{ScaleParams, Spectrum};
use crate::sum::compensated;

pub const DEFAULT_SPECTRAL_TOL: f64 = 1e-10;
pub const DEFAULT_EIGEN_CAP: usize = 2000;
const POWER_ITERATION_CAP: usize = 200_000;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Accepts `n × n` row-major entries that are symmetric to within
    /// `1e-12·max|Mᵢⱼ|`; the upper triangle is then copied onto the lower.
    pub fn new(n: usize, mut data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("matrix"));
        }
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "matrix", index: i });
        }
        let scale = data.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            for j in i + 1..n {
                let (u, l) = (data[i * n + j], data[j * n + i]);
                if (u - l).abs() > 1e-12 * scale {
                    return Err(Error::NotSymmetric { i, j });
                }
                data[j * n + i] = u;
            }
        }
        Ok(SymMatrix { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: r.len() });
        }
        SymMatrix::new(n, rows.concat())
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        let n = values.len();
        let mut data = vec![0.0; n * n];
        for (i, &v) in values.iter().enumerate() {
            data[i * n + i] = v;
        }
        SymMatrix::new(n, data)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .into_par_iter()
            .map(|i| dot(self.row(i), x))
            .collect()
    }

    /// `‖M‖²_HS`
    pub fn hs_norm2(&self) -> f64 {
        compensated(self.data.iter().map(|v| v * v))
    }

    fn max_row_abs_sum(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    compensated(a.iter().zip(b).map(|(x, y)| x * y))
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Trace quantities of `(M, μ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixSummary {
    pub n: usize,
    /// `tr M`
    pub trace: f64,
    /// `μᵀMμ`
    pub mu_quad: f64,
    /// `‖Mμ‖²`
    pub mmu_norm2: f64,
    /// `‖M‖²_HS`
    pub hs_norm2: f64,
    /// Upper estimate of `maxᵢ|λᵢ|`.
    pub spec_bound: f64,
    /// Estimated distance from the power-iteration value to the true maximum.
    pub spec_bound_width: f64,
}

impl MatrixSummary {
    /// Scale parameters for `XᵀMX` (identity `f`) or `XᵀMᵖX`; `d` uses both
    /// `f(L)` and `f(-L)` since individual eigenvalues are not known.
    pub fn scale_params(&self, f: &FunctionSpec) -> Result<ScaleParams> {
        let l = self.spec_bound;
        let d = f.eval(l)?.abs().max(f.eval(-l)?.abs());
        let c = f.fprime0();
        Ok(ScaleParams {
            l,
            d,
            xi: c * (self.mu_quad + self.trace),
            s2: self.hs_norm2,
            s2d: self.mmu_norm2,
            c,
        })
    }
}

/// Trace summary with the default spectral tolerance and seed.
pub fn summarize(m: &SymMatrix, mu: &[f64]) -> Result<MatrixSummary> {
    summarize_with(m, mu, DEFAULT_SPECTRAL_TOL, 0)
}

pub fn summarize_with(m: &SymMatrix, mu: &[f64], tol: f64, seed: u64) -> Result<MatrixSummary> {
    if mu.len() != m.n {
        return Err(Error::DimensionMismatch {
            expected: m.n,
            got: mu.len(),
        });
    }
    if let Some(i) = mu.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "mu", index: i });
    }
    let mmu = m.matvec(mu);
    let est = spectral_estimate(m, tol, seed)?;
    Ok(MatrixSummary {
        n: m.n,
        trace: compensated((0..m.n).map(|i| m.get(i, i))),
        mu_quad: dot(mu, &mmu),
        mmu_norm2: dot(&mmu, &mmu),
        hs_norm2: m.hs_norm2(),
        spec_bound: est.value,
        spec_bound_width: est.width,
    })
}

/// Power-iteration estimate of `maxᵢ|λᵢ|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    /// Estimate inflated by `(1 + tol)`, capped by the HS and row-sum norms.
    pub value: f64,
    /// Raw iterate, a lower bound on `maxᵢ|λᵢ|`.
    pub estimate: f64,
    /// Extrapolated remaining gap to the limit.
    pub width: f64,
    pub iterations: usize,
}

/// Upper estimate of `maxᵢ|λᵢ|` to relative accuracy `tol` (seed 0).
pub fn spectral_bound(m: &SymMatrix, tol: f64) -> Result<f64> {
    Ok(spectral_estimate(m, tol, 0)?.value)
}

/// Power iteration on `M` tracking `‖M v‖` for unit `v`.
///
/// For symmetric `M` the sequence `‖M vₖ‖` is non-decreasing and converges
/// to `maxᵢ|λᵢ|` whatever the signs, so `±λ` pairs do not make it oscillate.
/// It behaves like the Rayleigh quotient of `M²`. Convergence is geometric,
/// and the remaining gap is extrapolated from successive increments
/// (Aitken); iteration stops once that gap is below `tol/100` relative.
pub fn spectral_estimate(m: &SymMatrix, tol: f64, seed: u64) -> Result<SpectralEstimate> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidArgument(format!("tol must lie in (0, 1) (got {tol})")));
    }
    let hs = m.hs_norm2().sqrt();
    if hs == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let upper = hs.min(m.max_row_abs_sum());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..m.n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut prev = 0.0;
    let mut prev_delta = f64::NAN;
    let mut width = f64::INFINITY;
    let mut restarted = false;
    for k in 1..=POWER_ITERATION_CAP {
        let w = m.matvec(&v);
        let est = norm(&w);
        if est == 0.0 {
            if restarted {
                return Err(Error::SpectralNoConvergence { best: 0.0, width: upper });
            }
            restarted = true;
            v = (0..m.n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let nv = norm(&v);
            v.iter_mut().for_each(|x| *x /= nv);
            continue;
        }
        v = w.into_iter().map(|x| x / est).collect();
        let delta = est - prev;
        if k >= 3 {
            width = if delta <= 0.0 {
                0.0
            } else {
                let r = delta / prev_delta;
                if (0.0..1.0).contains(&r) {
                    delta * r / (1.0 - r)
                } else {
                    f64::INFINITY
                }
            };
            if width <= 0.01 * tol * est || est >= upper * (1.0 - 0.01 * tol) {
                return Ok(SpectralEstimate {
                    value: (est * (1.0 + tol)).min(upper),
                    estimate: est,
                    width: width.min(upper - est).max(0.0),
                    iterations: k,
                });
            }
        }
        prev_delta = delta;
        prev = est;
    }
    Err(Error::SpectralNoConvergence {
        best: prev,
        width: width.min(upper - prev),
    })
}

/// Eigenvalues and orthonormal eigenvectors (column `j` of `vectors`,
/// row-major `n × n`).
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
}

/// Cyclic Jacobi rotations until the off-diagonal norm is at most
/// `1e-12·‖M‖_HS`.
pub fn jacobi_eigen(m: &SymMatrix, cap: usize) -> Result<SymmetricEigen> {
    let n = m.n;
    if n > cap {
        return Err(Error::TooLarge { n, cap });
    }
    let mut a = m.data.clone();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let target = 1e-12 * m.hs_norm2().sqrt();
    let off_norm = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j] * a[i * n + j];
                }
            }
        }
        s.sqrt()
    };

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_norm(&a) <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged && off_norm(&a) > target {
        return Err(Error::EigenNoConvergence { sweeps: JACOBI_MAX_SWEEPS });
    }
    Ok(SymmetricEigen {
        values: (0..n).map(|i| a[i * n + i]).collect(),
        vectors: v,
    })
}

/// Eigenvalues of `M` paired with `δ = Vᵀμ`, the rotated mean. The sign of
/// each `δᵢ` depends on the eigenvector sign and is irrelevant downstream.
pub fn full_spectrum(m: &SymMatrix, mu: &[f64]) -> Result<Spectrum> {
    full_spectrum_capped(m, mu, DEFAULT_EIGEN_CAP)
}

pub fn full_spectrum_capped(m: &SymMatrix, mu: &[f64], cap: usize) -> Result<Spectrum> {
    let n = m.n;
    if mu.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: mu.len() });
    }
    let eig = jacobi_eigen(m, cap)?;
    let deltas = (0..n)
        .map(|j| compensated((0..n).map(|k| eig.vectors[k * n + j] * mu[k])))
        .collect();
    Spectrum::new(eig.values, deltas)
}
