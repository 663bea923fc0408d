//! Tail bounds for `Q_f`.
//!
//! The optimized bound uses the cumulant majorants from [`crate::coeffs`]:
//!
//! ```text
//! log E[exp(t (Q_f - ξ))] ≤ ν_f(t)/2 = β(t)·Σηᵢ²δᵢ² + α(t)·Σηᵢ²
//! P(Q_f > q) ≤ min_{0 < t < t★} exp(ν_f(t)/2 - (q - ξ) t)
//! ```
//!
//! The legacy bound is the piecewise sub-gamma bound for `Q = XᵀMX` with
//! variance factor `ν = 2(4‖Mμ‖² + 2‖M‖²_HS)` and scale `b = maxᵢ|λᵢ|`.
//! All bounds are computed in log space; `bound = min(1, exp(log_bound))`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffs::{t_star, FunctionSpec, Majorant};
use crate::error::{Error, Result};
use crate::matrixops::MatrixSummary;
use crate::optimize::{minimize_scalar, DEFAULT_TOL};
use crate::spectrum::{ScaleParams, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tail {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Chernoff bound with optimal quadratic majorants.
    Optimized,
    /// Piecewise sub-gamma baseline.
    Legacy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Optimized,
    Trivial,
    Gaussian,
    Exponential,
}

impl Tail {
    pub fn as_str(self) -> &'static str {
        match self {
            Tail::Upper => "upper",
            Tail::Lower => "lower",
        }
    }
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Optimized => "optimized",
            Method::Legacy => "legacy",
        }
    }
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Optimized => "optimized",
            Regime::Trivial => "trivial",
            Regime::Gaussian => "gaussian",
            Regime::Exponential => "exponential",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBoundResult {
    pub q: f64,
    pub bound: f64,
    pub t_opt: f64,
    pub log_bound: f64,
    pub tail: Tail,
    pub method: Method,
    pub regime: Regime,
}

impl TailBoundResult {
    fn trivial(q: f64, tail: Tail, method: Method) -> Self {
        TailBoundResult {
            q,
            bound: 1.0,
            t_opt: 0.0,
            log_bound: 0.0,
            tail,
            method,
            regime: Regime::Trivial,
        }
    }

    fn from_log(q: f64, log_bound: f64, t_opt: f64, tail: Tail, method: Method, regime: Regime) -> Self {
        if log_bound >= 0.0 {
            return TailBoundResult { t_opt, ..Self::trivial(q, tail, method) };
        }
        TailBoundResult {
            q,
            bound: log_bound.exp(),
            t_opt,
            log_bound,
            tail,
            method,
            regime,
        }
    }

    pub fn log10_bound(&self) -> f64 {
        self.log_bound / std::f64::consts::LN_10
    }
}

/// `ν_f(t) = 2(β(t)·Σηᵢ²δᵢ² + α(t)·Σηᵢ²)`.
pub fn nu_f(spec: &Spectrum, f: &FunctionSpec, t: f64) -> Result<f64> {
    f.check_admissible()?;
    let p = spec.scale_params(f)?;
    let t_hi = tilt_limit(&p, f)?;
    if !(t >= 0.0 && t < t_hi) {
        return Err(Error::TOutOfRange { t, t_star: t_hi });
    }
    let m = Majorant::new(f, p.l)?;
    let (alpha, beta) = m.alpha_beta(t);
    Ok(2.0 * (beta * p.s2d + alpha * p.s2))
}

fn tilt_limit(p: &ScaleParams, f: &FunctionSpec) -> Result<f64> {
    let ts = t_star(f, p.l)?;
    Ok(if p.d > 0.0 { ts.min(0.5 / p.d) } else { ts })
}

/// Optimized bound on `P(Q_f > q)`.
pub fn upper_tail_bound(spec: &Spectrum, f: &FunctionSpec, q: f64) -> Result<TailBoundResult> {
    tail_bound(&spec.scale_params(f)?, f, q, Tail::Upper)
}

/// Optimized bound on `P(Q_f < q)`.
pub fn lower_tail_bound(spec: &Spectrum, f: &FunctionSpec, q: f64) -> Result<TailBoundResult> {
    tail_bound(&spec.scale_params(f)?, f, q, Tail::Lower)
}

/// Optimized bound from scale parameters alone; this is the path used for
/// matrices summarized by their traces.
///
/// The lower tail is the upper tail of `-Q_f`, the quadratic form of
/// `x ↦ -f(-x)` on `-η`; `ξ` flips sign and the trace sums are unchanged.
pub fn tail_bound(params: &ScaleParams, f: &FunctionSpec, q: f64, tail: Tail) -> Result<TailBoundResult> {
    f.check_admissible()?;
    if !q.is_finite() {
        return Err(Error::InvalidArgument(format!("q must be finite (got {q})")));
    }
    let (g, excess) = match tail {
        Tail::Upper => (f.clone(), q - params.xi),
        Tail::Lower => (f.reflected(), params.xi - q),
    };
    if !(excess > 0.0) {
        return Ok(TailBoundResult::trivial(q, tail, Method::Optimized));
    }
    let t_hi = tilt_limit(params, &g)?;
    let m = Majorant::new(&g, params.l)?;
    let (s2, s2d) = (params.s2, params.s2d);
    let objective = |t: f64| {
        let (alpha, beta) = m.alpha_beta(t);
        beta * s2d + alpha * s2 - excess * t
    };
    let r = minimize_scalar(objective, 0.0, t_hi, DEFAULT_TOL)?;
    Ok(TailBoundResult::from_log(
        q,
        r.value.min(0.0),
        r.t_opt,
        tail,
        Method::Optimized,
        Regime::Optimized,
    ))
}

/// Optimized bound for `XᵀM X` (or `Xᵀ Mᵖ X`) with `X ~ N(μ, I)`, from the
/// trace summary of `M`.
pub fn matrix_tail_bound(
    summary: &MatrixSummary,
    f: &FunctionSpec,
    q: f64,
    tail: Tail,
) -> Result<TailBoundResult> {
    tail_bound(&summary.scale_params(f)?, f, q, tail)
}

/// Parameters of the legacy sub-gamma bound for `Q = XᵀMX`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegacyParams {
    pub nu: f64,
    pub b: f64,
    pub mean: f64,
}

impl LegacyParams {
    pub fn new(nu: f64, b: f64, mean: f64) -> Result<Self> {
        if !(nu > 0.0 && b > 0.0 && mean.is_finite() && nu.is_finite() && b.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "legacy bound needs nu > 0 and b > 0 (got nu = {nu}, b = {b})"
            )));
        }
        Ok(LegacyParams { nu, b, mean })
    }

    /// `ν = 2(4Σηᵢ²δᵢ² + 2Σηᵢ²)`, `b = maxᵢ|ηᵢ|`, mean `Σηᵢδᵢ² + Σηᵢ`.
    pub fn from_spectrum(spec: &Spectrum) -> Result<Self> {
        LegacyParams::new(
            2.0 * (4.0 * spec.sum_eta2_delta2() + 2.0 * spec.sum_eta2()),
            spec.max_abs_eta(),
            spec.sum_eta_delta2() + spec.sum_eta(),
        )
    }

    /// `ν = 2(4‖Mμ‖² + 2‖M‖²_HS)`, `b` = spectral bound, mean `μᵀMμ + tr M`.
    pub fn from_summary(s: &MatrixSummary) -> Result<Self> {
        LegacyParams::new(
            2.0 * (4.0 * s.mmu_norm2 + 2.0 * s.hs_norm2),
            s.spec_bound,
            s.mu_quad + s.trace,
        )
    }

    /// Distance from the mean at which the Gaussian piece hands over to the
    /// exponential piece.
    pub fn threshold(&self) -> f64 {
        self.nu / (4.0 * self.b)
    }
}

/// Legacy piecewise bound; the boundary point belongs to the Gaussian piece.
pub fn legacy_bound(params: &LegacyParams, q: f64, tail: Tail) -> TailBoundResult {
    let x = match tail {
        Tail::Upper => q - params.mean,
        Tail::Lower => params.mean - q,
    };
    if !(x > 0.0) {
        return TailBoundResult::trivial(q, tail, Method::Legacy);
    }
    let scale = 4.0 * params.b;
    if x <= params.threshold() {
        let log_bound = -0.5 * x * x / params.nu;
        TailBoundResult::from_log(q, log_bound, x / params.nu, tail, Method::Legacy, Regime::Gaussian)
    } else {
        let log_bound = 0.5 * params.nu / (scale * scale) - x / scale;
        TailBoundResult::from_log(q, log_bound, 1.0 / scale, tail, Method::Legacy, Regime::Exponential)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub q: f64,
    pub optimized: TailBoundResult,
    /// Present for the identity function only.
    pub legacy: Option<TailBoundResult>,
    /// `optimized / legacy`.
    pub ratio: Option<f64>,
}

/// Side-by-side upper-tail bounds over a grid of `q`, in input order.
pub fn compare(spec: &Spectrum, f: &FunctionSpec, q_grid: &[f64]) -> Result<Vec<ComparisonRow>> {
    let params = spec.scale_params(f)?;
    let legacy = if f.is_identity() {
        Some(LegacyParams::from_spectrum(spec)?)
    } else {
        None
    };
    compare_with(&params, legacy.as_ref(), f, q_grid)
}

/// [`compare`] from precomputed parameters, shared by the matrix path.
pub fn compare_with(
    params: &ScaleParams,
    legacy: Option<&LegacyParams>,
    f: &FunctionSpec,
    q_grid: &[f64],
) -> Result<Vec<ComparisonRow>> {
    q_grid
        .par_iter()
        .map(|&q| {
            let optimized = tail_bound(params, f, q, Tail::Upper)?;
            let legacy = legacy.map(|lp| legacy_bound(lp, q, Tail::Upper));
            let ratio = legacy.map(|l| (optimized.log_bound - l.log_bound).exp());
            Ok(ComparisonRow {
                q,
                optimized,
                legacy,
                ratio,
            })
        })
        .collect()
}
