//! The pairs `{(ηᵢ, δᵢ)}` defining `Q_f = Σ f(ηᵢ)(Zᵢ + δᵢ)²`.

use serde::{Deserialize, Serialize};

use crate::coeffs::FunctionSpec;
use crate::error::{Error, Result};
use crate::sum::{compensated, CompensatedSum};

/// Validated spectrum with trace sums cached at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    etas: Vec<f64>,
    deltas: Vec<f64>,
    sum_eta: f64,
    sum_eta2: f64,
    sum_eta_delta2: f64,
    sum_eta2_delta2: f64,
    max_abs_eta: f64,
}

/// Scale quantities that enter the bound: `L`, `d`, `ξ`, the two trace sums
/// `Σηᵢ²` and `Σηᵢ²δᵢ²`, and `c = f'(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams {
    pub l: f64,
    pub d: f64,
    pub xi: f64,
    pub s2: f64,
    pub s2d: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
}

impl Spectrum {
    pub fn new(etas: Vec<f64>, deltas: Vec<f64>) -> Result<Self> {
        if etas.len() != deltas.len() {
            return Err(Error::LengthMismatch {
                etas: etas.len(),
                deltas: deltas.len(),
            });
        }
        if etas.is_empty() {
            return Err(Error::Empty("spectrum"));
        }
        if let Some(i) = etas.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "eta", index: i });
        }
        if let Some(i) = deltas.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "delta", index: i });
        }
        let max_abs_eta = etas.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
        if max_abs_eta == 0.0 {
            return Err(Error::DegenerateSpectrum);
        }

        let mut sums = [CompensatedSum::default(); 4];
        for (&e, &d) in etas.iter().zip(&deltas) {
            let e2 = e * e;
            let d2 = d * d;
            sums[0].add(e);
            sums[1].add(e2);
            sums[2].add(e * d2);
            sums[3].add(e2 * d2);
        }
        Ok(Spectrum {
            sum_eta: sums[0].value(),
            sum_eta2: sums[1].value(),
            sum_eta_delta2: sums[2].value(),
            sum_eta2_delta2: sums[3].value(),
            max_abs_eta,
            etas,
            deltas,
        })
    }

    /// Central spectrum (`δ ≡ 0`).
    pub fn central(etas: Vec<f64>) -> Result<Self> {
        let n = etas.len();
        Spectrum::new(etas, vec![0.0; n])
    }

    /// `ηᵢ = exp(-rate·i)` for `i = 1..=n`, every `δᵢ = delta`.
    pub fn exponential_decay(n: usize, rate: f64, delta: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidArgument(format!("rate must be positive (got {rate})")));
        }
        let etas = (1..=n).map(|i| (-rate * i as f64).exp()).collect();
        Spectrum::new(etas, vec![delta; n])
    }

    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn len(&self) -> usize {
        self.etas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.etas.is_empty()
    }

    /// `Σηᵢ`
    pub fn sum_eta(&self) -> f64 {
        self.sum_eta
    }

    /// `Σηᵢ²`
    pub fn sum_eta2(&self) -> f64 {
        self.sum_eta2
    }

    /// `Σηᵢδᵢ²`
    pub fn sum_eta_delta2(&self) -> f64 {
        self.sum_eta_delta2
    }

    /// `Σηᵢ²δᵢ²`
    pub fn sum_eta2_delta2(&self) -> f64 {
        self.sum_eta2_delta2
    }

    /// `L = maxᵢ|ηᵢ|`
    pub fn max_abs_eta(&self) -> f64 {
        self.max_abs_eta
    }

    /// `f(ηᵢ)` for every entry.
    pub fn weights(&self, f: &FunctionSpec) -> Result<Vec<f64>> {
        self.etas.iter().map(|&e| f.eval(e)).collect()
    }

    pub fn scale_params(&self, f: &FunctionSpec) -> Result<ScaleParams> {
        let weights = self.weights(f)?;
        let d = weights.iter().fold(0.0_f64, |m, w| m.max(w.abs()));
        let c = f.fprime0();
        Ok(ScaleParams {
            l: self.max_abs_eta,
            d,
            xi: c * (self.sum_eta_delta2 + self.sum_eta),
            s2: self.sum_eta2,
            s2d: self.sum_eta2_delta2,
            c,
        })
    }

    /// Exact mean and variance of `Q_f`, using `Var((Z + δ)²) = 2 + 4δ²`.
    pub fn moments(&self, f: &FunctionSpec) -> Result<Moments> {
        let weights = self.weights(f)?;
        let mean = compensated(weights.iter().zip(&self.deltas).map(|(w, d)| w * (1.0 + d * d)));
        let variance =
            compensated(weights.iter().zip(&self.deltas).map(|(w, d)| w * w * (2.0 + 4.0 * d * d)));
        Ok(Moments { mean, variance })
    }
}
