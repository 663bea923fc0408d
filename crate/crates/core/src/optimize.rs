//! Derivative-free minimization on an open interval.
//!
//! Brent's method (golden section with parabolic steps) on the probe bracket
//! `[lo + ε(hi - lo), hi - ε(hi - lo)]`. The endpoints themselves are never
//! evaluated, so objectives that blow up at `hi` are fine.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative inset of the two bracket probes from the open endpoints.
pub const BRACKET_EPS: f64 = 1e-9;
pub const MAX_EVALUATIONS: usize = 10_000;
pub const DEFAULT_TOL: f64 = 1e-10;

const CGOLD: f64 = 0.381_966_011_250_105_1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarMinResult {
    pub t_opt: f64,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// The minimum sits at the lower probe: the infimum is approached only
    /// as `t → lo`.
    pub at_boundary: bool,
}

/// Minimizes `objective` over `(lo, hi)`.
///
/// `tol` is relative to the interval width. The returned value is never
/// larger than the objective at either bracket probe. Probe values of `+∞`
/// are tolerated; NaN or infinities strictly inside the bracket are errors.
pub fn minimize_scalar<F>(mut objective: F, lo: f64, hi: f64, tol: f64) -> Result<ScalarMinResult>
where
    F: FnMut(f64) -> f64,
{
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidInterval { lo, hi });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive (got {tol})")));
    }
    let width = hi - lo;
    let probe_lo = lo + BRACKET_EPS * width;
    let probe_hi = hi - BRACKET_EPS * width;
    let evaluations = std::cell::Cell::new(0usize);
    let mut eval = |t: f64, interior: bool| -> Result<f64> {
        evaluations.set(evaluations.get() + 1);
        let v = objective(t);
        if v.is_nan() || (interior && !v.is_finite()) || v == f64::NEG_INFINITY {
            return Err(Error::NonFiniteObjective { t });
        }
        Ok(v)
    };

    let f_lo = eval(probe_lo, false)?;
    let f_hi = eval(probe_hi, false)?;

    let abs_tol = 0.5 * tol * width;
    let (mut a, mut b) = (probe_lo, probe_hi);
    let mut x = a + CGOLD * (b - a);
    let mut w = x;
    let mut v = x;
    let mut fx = eval(x, true)?;
    let mut fw = fx;
    let mut fv = fx;
    let mut d = 0.0_f64;
    let mut e = 0.0_f64;
    let mut converged = false;

    while evaluations.get() < MAX_EVALUATIONS {
        let xm = 0.5 * (a + b);
        let tol1 = abs_tol + f64::EPSILON * x.abs();
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            converged = true;
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = eval(u, true)?;
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            evaluations: evaluations.get(),
        });
    }

    let mut result = ScalarMinResult {
        t_opt: x,
        value: fx,
        evaluations: evaluations.get(),
        converged,
        at_boundary: false,
    };
    if f_hi < result.value {
        result.t_opt = probe_hi;
        result.value = f_hi;
    }
    if f_lo <= result.value || result.t_opt - lo <= 10.0 * BRACKET_EPS * width {
        result.t_opt = probe_lo;
        result.value = f_lo;
        result.at_boundary = true;
    }
    Ok(result)
}
