//! Cumulant terms of `Q_f` and the coefficients of their optimal quadratic
//! majorants.
//!
//! The cumulant generating function of `Q_f` is a sum of two kinds of terms,
//! `L1(u) = -log(1 - 2u)/2` and `L2(u) = u/(1 - 2u)`, evaluated at
//! `u = t·f(ηᵢ)`. For each tilt `t` they are dominated on `x ∈ [-L, L]` by
//! parabolas `a·x² + t·f'(0)·x` that touch at the origin and at `x = L`:
//!
//! ```text
//! alpha = L1(t·f(L))/L² - t·f'(0)/L
//! beta  = L2(t·f(L))/L² - t·f'(0)/L
//! gamma = t·f'(0)
//! ```
//!
//! For `f(x) = x` and `f(x) = xᵖ` the coefficients have closed forms; any
//! other monotone `f` is supplied as a table and checked on a grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `-log(1 - 2x)/2`, defined for `x < 1/2`.
pub fn l1(x: f64) -> Result<f64> {
    if !(x < 0.5) {
        return Err(Error::Domain { func: "l1", x });
    }
    Ok(l1_raw(x))
}

/// `x/(1 - 2x)`, defined for `x < 1/2`.
pub fn l2(x: f64) -> Result<f64> {
    if !(x < 0.5) {
        return Err(Error::Domain { func: "l2", x });
    }
    Ok(l2_raw(x))
}

#[inline]
pub(crate) fn l1_raw(x: f64) -> f64 {
    -0.5 * (-2.0 * x).ln_1p()
}

#[inline]
pub(crate) fn l2_raw(x: f64) -> f64 {
    x / (1.0 - 2.0 * x)
}

/// `L1(u) - u`, accurate for small `|u|` where the direct difference cancels.
pub(crate) fn l1_excess(u: f64) -> f64 {
    let y = 2.0 * u;
    if y.abs() < 0.05 {
        // Σ_{k≥2} y^k / (2k)
        let mut pow = y * y;
        let mut acc = 0.0;
        let mut k = 2.0;
        loop {
            let term = pow / (2.0 * k);
            acc += term;
            if term.abs() <= 1e-18 * acc.abs() || k > 60.0 {
                break;
            }
            pow *= y;
            k += 1.0;
        }
        acc
    } else {
        l1_raw(u) - u
    }
}

/// `L2(u) - u`.
#[inline]
pub(crate) fn l2_excess(u: f64) -> f64 {
    2.0 * u * u / (1.0 - 2.0 * u)
}

/// A monotone function tabulated on a grid and interpolated with a
/// shape-preserving (Fritsch–Carlson) cubic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedFn {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
    fprime0: f64,
    fprime0_estimated: bool,
}

impl TabulatedFn {
    /// Builds the interpolant from `(x, f(x))` knots.
    ///
    /// The knots must be strictly increasing in `x` and bracket zero with
    /// `f(0) = 0`. Monotonicity is checked separately by
    /// [`FunctionSpec::check_admissible`]. When `fprime0` is `None` the slope
    /// at the origin is estimated by central differences and a warning is
    /// logged, since it feeds straight into the linear majorant term.
    pub fn new(points: &[(f64, f64)], fprime0: Option<f64>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::InvalidTable("need at least three knots".into()));
        }
        for (i, &(x, y)) in points.iter().enumerate() {
            if !x.is_finite() || !y.is_finite() {
                return Err(Error::NonFinite { what: "table", index: i });
            }
        }
        let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
        if let Some(i) = xs.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidTable(format!(
                "x values must be strictly increasing (knot {})",
                i + 1
            )));
        }
        if !(xs[0] < 0.0 && *xs.last().unwrap() > 0.0) {
            return Err(Error::InvalidTable("grid must contain zero in its interior".into()));
        }
        let slopes = pchip_slopes(&xs, &ys);
        let mut table = TabulatedFn {
            xs,
            ys,
            slopes,
            fprime0: 0.0,
            fprime0_estimated: false,
        };
        let at_zero = table.eval(0.0)?;
        let scale = table.ys.iter().fold(1.0_f64, |m, y| m.max(y.abs()));
        if at_zero.abs() > 1e-12 * scale {
            return Err(Error::InvalidTable(format!("f(0) = {at_zero}, expected 0")));
        }
        match fprime0 {
            Some(c) if c.is_finite() => table.fprime0 = c,
            Some(_) => return Err(Error::NonFinite { what: "fprime0", index: 0 }),
            None => {
                let c = table.derivative(0.0)?;
                log::warn!("f'(0) not supplied; using finite-difference estimate {c}");
                table.fprime0 = c;
                table.fprime0_estimated = true;
            }
        }
        Ok(table)
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    pub fn fprime0(&self) -> f64 {
        self.fprime0
    }

    /// True when `f'(0)` was not supplied and had to be estimated.
    pub fn fprime0_estimated(&self) -> bool {
        self.fprime0_estimated
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        if !(x >= lo && x <= hi) {
            return Err(Error::OutsideTable { x, lo, hi });
        }
        let k = match self.xs.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => return Ok(self.ys[i]),
            Err(i) => i - 1,
        };
        let h = self.xs[k + 1] - self.xs[k];
        let s = (x - self.xs[k]) / h;
        let (y0, y1) = (self.ys[k], self.ys[k + 1]);
        let (m0, m1) = (self.slopes[k], self.slopes[k + 1]);
        let s2 = s * s;
        let s3 = s2 * s;
        Ok((2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * h * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * h * m1)
    }

    /// Central finite difference, one-sided at the table edges.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        let h = 1e-6 * (hi - lo);
        let (a, b) = ((x - h).max(lo), (x + h).min(hi));
        Ok((self.eval(b)? - self.eval(a)?) / (b - a))
    }

    /// `x ↦ -f(-x)`.
    pub fn reflected(&self) -> TabulatedFn {
        let n = self.xs.len();
        let xs: Vec<f64> = (0..n).map(|i| -self.xs[n - 1 - i]).collect();
        let ys: Vec<f64> = (0..n).map(|i| -self.ys[n - 1 - i]).collect();
        let slopes: Vec<f64> = (0..n).map(|i| self.slopes[n - 1 - i]).collect();
        TabulatedFn {
            xs,
            ys,
            slopes,
            fprime0: self.fprime0,
            fprime0_estimated: self.fprime0_estimated,
        }
    }
}

fn pchip_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / h[k]).collect();
    let mut m = vec![0.0; n];
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            m[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    m[0] = pchip_end(h[0], h[1], delta[0], delta[1]);
    m[n - 1] = pchip_end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    m
}

fn pchip_end(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d0 == 0.0 || d.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

/// The function `f` applied to the spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionSpec {
    Identity,
    /// `x ↦ xᵖ`. `Power(1)` behaves exactly like `Identity`.
    Power(u32),
    Tabulated(TabulatedFn),
}

impl FunctionSpec {
    /// `p = 1` maps to [`FunctionSpec::Identity`].
    pub fn power(p: u32) -> Result<Self> {
        match p {
            0 => Err(Error::InvalidPower(p)),
            1 => Ok(FunctionSpec::Identity),
            p => Ok(FunctionSpec::Power(p)),
        }
    }

    pub fn label(&self) -> String {
        match self {
            FunctionSpec::Identity | FunctionSpec::Power(1) => "identity".into(),
            FunctionSpec::Power(p) => format!("power:{p}"),
            FunctionSpec::Tabulated(_) => "tabulated".into(),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, FunctionSpec::Identity | FunctionSpec::Power(1))
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        match self {
            FunctionSpec::Identity => Ok(x),
            FunctionSpec::Power(p) => Ok(x.powi(*p as i32)),
            FunctionSpec::Tabulated(t) => t.eval(x),
        }
    }

    pub fn derivative(&self, x: f64) -> Result<f64> {
        match self {
            FunctionSpec::Identity => Ok(1.0),
            FunctionSpec::Power(0) => Ok(0.0),
            FunctionSpec::Power(p) => Ok(*p as f64 * x.powi(*p as i32 - 1)),
            FunctionSpec::Tabulated(t) => t.derivative(x),
        }
    }

    /// `c = f'(0)`.
    pub fn fprime0(&self) -> f64 {
        match self {
            FunctionSpec::Identity | FunctionSpec::Power(1) => 1.0,
            FunctionSpec::Power(_) => 0.0,
            FunctionSpec::Tabulated(t) => t.fprime0(),
        }
    }

    /// Structural preconditions shared by every bound: a valid power, and a
    /// non-decreasing table. Even powers are admitted although they are not
    /// monotone; their majorants are established directly.
    pub fn check_admissible(&self) -> Result<()> {
        match self {
            FunctionSpec::Identity => Ok(()),
            FunctionSpec::Power(0) => Err(Error::InvalidPower(0)),
            FunctionSpec::Power(_) => Ok(()),
            FunctionSpec::Tabulated(t) => {
                match t.ys.windows(2).position(|w| w[1] < w[0]) {
                    Some(i) => Err(Error::NotMonotone { index: i + 1 }),
                    None => Ok(()),
                }
            }
        }
    }

    /// The function whose upper-tail bound gives the lower tail of `Q_f`:
    /// `-Q_f` is the quadratic form of `g(x) = -f(-x)` on the spectrum `-η`.
    ///
    /// Odd functions reflect to themselves. Even powers keep `f`: the
    /// cumulant terms at negative arguments are non-positive, so the
    /// majorants of `f` still apply.
    pub fn reflected(&self) -> FunctionSpec {
        match self {
            FunctionSpec::Tabulated(t) => FunctionSpec::Tabulated(t.reflected()),
            other => other.clone(),
        }
    }
}

/// Coefficients of the quadratic majorants at one tilt `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCoefficients {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub t_star: f64,
    pub l: f64,
    pub t: f64,
}

fn check_l(l: f64) -> Result<()> {
    if l > 0.0 && l.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("L must be positive and finite (got {l})")))
    }
}

fn check_t(t: f64, t_star: f64) -> Result<()> {
    if t >= 0.0 && t < t_star {
        Ok(())
    } else {
        Err(Error::TOutOfRange { t, t_star })
    }
}

/// Supremum of admissible tilts, `min{1/|2f(L)|, 1/|2f(-L)|}`.
pub fn t_star(f: &FunctionSpec, l: f64) -> Result<f64> {
    check_l(l)?;
    match f {
        FunctionSpec::Identity | FunctionSpec::Power(1) => Ok(0.5 / l),
        FunctionSpec::Power(p) => Ok(0.5 / l.powi(*p as i32)),
        FunctionSpec::Tabulated(_) => {
            let hi = f.eval(l)?.abs();
            let lo = f.eval(-l)?.abs();
            if hi == 0.0 && lo == 0.0 {
                return Err(Error::ZeroAtBoundary { l });
            }
            Ok(0.5 / hi.max(lo))
        }
    }
}

/// Closed-form coefficients for `f(x) = x`.
pub fn coeffs_identity(l: f64, t: f64) -> Result<BoundCoefficients> {
    check_l(l)?;
    let t_star = 0.5 / l;
    check_t(t, t_star)?;
    let u = t * l;
    Ok(BoundCoefficients {
        alpha: l1_excess(u) / (l * l),
        beta: 2.0 * t * t / (1.0 - 2.0 * u),
        gamma: t,
        t_star,
        l,
        t,
    })
}

/// Closed-form coefficients for `f(x) = xᵖ`, `p ≥ 2`.
pub fn coeffs_power(l: f64, t: f64, p: u32) -> Result<BoundCoefficients> {
    if p < 2 {
        return Err(Error::InvalidPower(p));
    }
    check_l(l)?;
    let lp = l.powi(p as i32);
    let t_star = 0.5 / lp;
    check_t(t, t_star)?;
    let u = t * lp;
    Ok(BoundCoefficients {
        alpha: l1_raw(u) / (l * l),
        beta: t * l.powi(p as i32 - 2) / (1.0 - 2.0 * u),
        gamma: 0.0,
        t_star,
        l,
        t,
    })
}

/// Coefficients from the general endpoint formula, valid for any admissible
/// `f`. For identity and powers this agrees with the closed forms.
pub fn coeffs_general(f: &FunctionSpec, l: f64, t: f64) -> Result<BoundCoefficients> {
    f.check_admissible()?;
    let t_star = t_star(f, l)?;
    check_t(t, t_star)?;
    let m = Majorant::new(f, l)?;
    let (alpha, beta) = m.general(t);
    Ok(BoundCoefficients {
        alpha,
        beta,
        gamma: t * m.c,
        t_star,
        l,
        t,
    })
}

/// Dispatches to the closed forms where they exist.
pub fn coefficients(f: &FunctionSpec, l: f64, t: f64) -> Result<BoundCoefficients> {
    match f {
        FunctionSpec::Identity | FunctionSpec::Power(1) => coeffs_identity(l, t),
        FunctionSpec::Power(p) => coeffs_power(l, t, *p),
        FunctionSpec::Tabulated(_) => coeffs_general(f, l, t),
    }
}

/// Pre-evaluated majorant for repeated evaluation at many tilts.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Majorant {
    kind: MajorantKind,
    l: f64,
    f_l: f64,
    c: f64,
}

#[derive(Debug, Clone, Copy)]
enum MajorantKind {
    Identity,
    Power(u32),
    General,
}

impl Majorant {
    pub(crate) fn new(f: &FunctionSpec, l: f64) -> Result<Self> {
        check_l(l)?;
        let kind = match f {
            FunctionSpec::Identity | FunctionSpec::Power(1) => MajorantKind::Identity,
            FunctionSpec::Power(0) => return Err(Error::InvalidPower(0)),
            FunctionSpec::Power(p) => MajorantKind::Power(*p),
            FunctionSpec::Tabulated(_) => MajorantKind::General,
        };
        Ok(Majorant {
            kind,
            l,
            f_l: f.eval(l)?,
            c: f.fprime0(),
        })
    }

    /// `(alpha, beta)` at tilt `t`; the caller keeps `t` inside `[0, t★)`.
    #[inline]
    pub(crate) fn alpha_beta(&self, t: f64) -> (f64, f64) {
        let l = self.l;
        match self.kind {
            MajorantKind::Identity => {
                let u = t * l;
                (l1_excess(u) / (l * l), 2.0 * t * t / (1.0 - 2.0 * u))
            }
            MajorantKind::Power(p) => {
                let u = t * self.f_l;
                (l1_raw(u) / (l * l), t * l.powi(p as i32 - 2) / (1.0 - 2.0 * u))
            }
            MajorantKind::General => self.general(t),
        }
    }

    fn general(&self, t: f64) -> (f64, f64) {
        let l2 = self.l * self.l;
        let u = t * self.f_l;
        // L(u)/L² - t c/L split as (L(u) - u)/L² + t (f(L) - c L)/L²
        let linear = t * (self.f_l - self.c * self.l) / l2;
        (l1_excess(u) / l2 + linear, l2_excess(u) / l2 + linear)
    }
}

/// Which cumulant term a condition refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CgfTerm {
    L1,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub term: CgfTerm,
    /// 1: `x(∂ₓL(tf(x))/2 + t f'(0)) ≥ L(tf(x))`;
    /// 2: `(L(tf(x)) - L(tf(-x)))/(2x) ≥ t f'(0)`.
    pub condition: u8,
    pub x: f64,
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
}

/// Result of the grid check of the majorant admissibility conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub passed: bool,
    pub points_checked: usize,
    pub first_violation: Option<Violation>,
}

const CONDITION_TOL: f64 = 1e-12;

/// Checks both admissibility conditions for `L1` and `L2` on a
/// `grid_size × grid_size` grid over `x ∈ (0, L]`, `t ∈ [0, t★)`.
///
/// A passing report is grid evidence, not a proof. Points where a cumulant
/// term leaves its domain are reported as violations.
pub fn verify_lemma_conditions(
    f: &FunctionSpec,
    l: f64,
    grid_size: usize,
) -> Result<ConditionReport> {
    check_l(l)?;
    if grid_size < 2 {
        return Err(Error::InvalidArgument("grid_size must be at least 2".into()));
    }
    f.check_admissible()?;
    if let FunctionSpec::Tabulated(tab) = f {
        let (lo, hi) = tab.domain();
        if lo > -l || hi < l {
            return Err(Error::OutsideTable { x: l, lo, hi });
        }
    }
    let ts = t_star(f, l)?;
    let c = f.fprime0();
    let g = grid_size as f64;
    let mut checked = 0;

    for j in 0..grid_size {
        let t = ts * j as f64 / g;
        for k in 1..=grid_size {
            let x = l * k as f64 / g;
            let fx = f.eval(x)?;
            let fmx = f.eval(-x)?;
            let dfx = f.derivative(x)?;
            for term in [CgfTerm::L1, CgfTerm::L2] {
                checked += 1;
                let (u, um) = (t * fx, t * fmx);
                if !(u < 0.5 && um < 0.5) {
                    return Ok(failed(checked, term, 1, x, t, f64::NAN, f64::NAN));
                }
                let (v, vm, dv) = match term {
                    CgfTerm::L1 => (l1_raw(u), l1_raw(um), t * dfx / (1.0 - 2.0 * u)),
                    CgfTerm::L2 => {
                        let r = 1.0 - 2.0 * u;
                        (l2_raw(u), l2_raw(um), t * dfx / (r * r))
                    }
                };
                let lhs1 = x * (dv / 2.0 + t * c);
                if !holds(lhs1, v) {
                    return Ok(failed(checked, term, 1, x, t, lhs1, v));
                }
                let lhs2 = (v - vm) / (2.0 * x);
                if !holds(lhs2, t * c) {
                    return Ok(failed(checked, term, 2, x, t, lhs2, t * c));
                }
            }
        }
    }
    Ok(ConditionReport {
        passed: true,
        points_checked: checked,
        first_violation: None,
    })
}

fn holds(lhs: f64, rhs: f64) -> bool {
    lhs >= rhs - CONDITION_TOL * rhs.abs().max(1.0)
}

fn failed(checked: usize, term: CgfTerm, condition: u8, x: f64, t: f64, lhs: f64, rhs: f64) -> ConditionReport {
    ConditionReport {
        passed: false,
        points_checked: checked,
        first_violation: Some(Violation {
            term,
            condition,
            x,
            t,
            lhs,
            rhs,
        }),
    }
}
