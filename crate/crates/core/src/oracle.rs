//! Ground truth for `P(Q_f > q)`: plain Monte Carlo, exponentially tilted
//! importance sampling, and closed forms for equal-eigenvalue spectra.
//!
//! Draws are generated in fixed chunks of [`CHUNK`] samples. Chunk `k` uses
//! its own ChaCha8 stream (`set_stream(k)`) under the caller's seed, so the
//! output is bit-identical whatever the number of worker threads. Reductions
//! run over chunk partials in chunk order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, gamma_ur};

use crate::bounds::{legacy_bound, upper_tail_bound, LegacyParams, Method, Tail, TailBoundResult};
use crate::coeffs::{l1_raw, l2_raw, FunctionSpec};
use crate::error::{Error, Result};
use crate::spectrum::Spectrum;

/// Samples per RNG stream.
pub const CHUNK: usize = 1 << 16;

/// Recorded in output metadata.
pub const GENERATOR: &str = "chacha8 (seeded from u64, stream = chunk index, 65536 draws per chunk) + ziggurat standard normals";

const Z95: f64 = 1.959_963_984_540_054;
const MIN_ESS: f64 = 50.0;

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMethod {
    Mc,
    Tilted,
    ClosedForm,
}

impl OracleMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            OracleMethod::Mc => "mc",
            OracleMethod::Tilted => "tilted",
            OracleMethod::ClosedForm => "closed_form",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimate {
    pub p_hat: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n_samples: usize,
    pub method: OracleMethod,
    pub seed: u64,
    /// Effective sample size of the exceedance weights (tilted only).
    pub ess: Option<f64>,
    /// Tilted estimate with fewer than 50 effective exceedances.
    pub low_quality: bool,
}

impl OracleEstimate {
    pub fn closed_form(p: f64) -> Self {
        OracleEstimate {
            p_hat: p,
            se: 0.0,
            ci_lo: p,
            ci_hi: p,
            n_samples: 0,
            method: OracleMethod::ClosedForm,
            seed: 0,
            ess: None,
            low_quality: false,
        }
    }
}

/// Wilson score interval for `k` successes out of `n` at 95%.
pub fn wilson_interval(k: usize, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    ((center - half).clamp(0.0, p), (center + half).clamp(p, 1.0))
}

fn binomial_estimate(k: usize, n: usize, seed: u64) -> OracleEstimate {
    let p = k as f64 / n as f64;
    let (ci_lo, ci_hi) = wilson_interval(k, n);
    OracleEstimate {
        p_hat: p,
        se: (p * (1.0 - p) / n as f64).sqrt(),
        ci_lo,
        ci_hi,
        n_samples: n,
        method: OracleMethod::Mc,
        seed,
        ess: None,
        low_quality: false,
    }
}

/// `n` independent draws of `Q_f`.
pub fn sample_qf(spec: &Spectrum, f: &FunctionSpec, seed: u64, n: usize) -> Result<Vec<f64>> {
    Ok(sample_qf_multi(spec, std::slice::from_ref(f), seed, n)?.remove(0))
}

/// Draws of `Q_f` for several `f` from the same normals: element `j` of every
/// output vector comes from the same `Z` vector.
pub fn sample_qf_multi(
    spec: &Spectrum,
    fs: &[FunctionSpec],
    seed: u64,
    n: usize,
) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    if fs.is_empty() {
        return Ok(Vec::new());
    }
    let weights: Vec<Vec<f64>> = fs.iter().map(|f| spec.weights(f)).collect::<Result<_>>()?;
    let deltas = spec.deltas();
    let k = fs.len();

    let mut outputs: Vec<Vec<f64>> = vec![vec![0.0; n]; k];
    let mut iters: Vec<_> = outputs.iter_mut().map(|o| o.chunks_mut(CHUNK)).collect();
    let n_chunks = n.div_ceil(CHUNK);
    let mut views: Vec<Vec<&mut [f64]>> = Vec::with_capacity(n_chunks);
    for _ in 0..n_chunks {
        views.push(iters.iter_mut().map(|it| it.next().unwrap()).collect());
    }
    views.into_par_iter().enumerate().for_each(|(c, mut outs)| {
        let mut rng = chunk_rng(seed, c);
        let len = outs[0].len();
        let mut acc = vec![0.0; k];
        for j in 0..len {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for (i, &d) in deltas.iter().enumerate() {
                let z: f64 = StandardNormal.sample(&mut rng);
                let x = z + d;
                let x2 = x * x;
                for (a, w) in acc.iter_mut().zip(&weights) {
                    *a += w[i] * x2;
                }
            }
            for (o, a) in outs.iter_mut().zip(&acc) {
                o[j] = *a;
            }
        }
    });
    Ok(outputs)
}

/// Plain Monte Carlo sample kept sorted for tail counts and quantiles.
#[derive(Debug, Clone)]
pub struct McSample {
    sorted: Vec<f64>,
    seed: u64,
}

impl McSample {
    pub fn draw(spec: &Spectrum, f: &FunctionSpec, seed: u64, n: usize) -> Result<Self> {
        Ok(McSample::from_values(sample_qf(spec, f, seed, n)?, seed))
    }

    pub fn from_values(mut values: Vec<f64>, seed: u64) -> Self {
        values.par_sort_unstable_by(f64::total_cmp);
        McSample { sorted: values, seed }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn exceedances(&self, q: f64) -> usize {
        self.sorted.len() - self.sorted.partition_point(|&v| v <= q)
    }

    /// Fraction of draws strictly above `q`, with a Wilson interval.
    pub fn tail(&self, q: f64) -> OracleEstimate {
        binomial_estimate(self.exceedances(q), self.sorted.len(), self.seed)
    }

    /// Fraction of draws strictly below `q`, with a Wilson interval.
    pub fn lower_tail(&self, q: f64) -> OracleEstimate {
        let k = self.sorted.partition_point(|&v| v < q);
        binomial_estimate(k, self.sorted.len(), self.seed)
    }

    /// Empirical quantile `F̂⁻¹(1 - p)`: the largest draw with
    /// `round(p·n)` draws strictly above it.
    pub fn upper_quantile(&self, p: f64) -> f64 {
        let n = self.sorted.len();
        let k = ((p * n as f64).round() as usize).clamp(0, n - 1);
        self.sorted[n - 1 - k]
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted
    }
}

/// Plain Monte Carlo estimate of `P(Q_f > q)`; needs `n ≥ 1000`.
pub fn mc_tail(spec: &Spectrum, f: &FunctionSpec, q: f64, n: usize, seed: u64) -> Result<OracleEstimate> {
    if n < 1000 {
        return Err(Error::InvalidArgument(format!("mc_tail needs at least 1000 samples (got {n})")));
    }
    let draws = sample_qf(spec, f, seed, n)?;
    let k = draws.iter().filter(|&&v| v > q).count();
    Ok(binomial_estimate(k, n, seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Tilt {
    /// Use the optimizing tilt of the upper-tail bound at `q`.
    Auto,
    Value(f64),
}

/// Draws `(Q, log w)` under the measure tilted by `exp(t·Q_f)`.
///
/// Completing the square, `φ(z)·exp(aᵢ(z + δᵢ)²)` with `aᵢ = t·f(ηᵢ)` is a
/// normal with variance `1/(1 - 2aᵢ)` and mean `2aᵢδᵢ/(1 - 2aᵢ)`. The
/// likelihood ratio is `exp(-tQ)·E[exp(tQ)]` with
/// `log E[exp(tQ)] = Σ L1(aᵢ) + δᵢ²·L2(aᵢ)`.
pub fn sample_tilted(
    spec: &Spectrum,
    f: &FunctionSpec,
    t: f64,
    seed: u64,
    n: usize,
) -> Result<Vec<(f64, f64)>> {
    let weights = spec.weights(f)?;
    let d = weights.iter().fold(0.0_f64, |m, w| m.max(w.abs()));
    if !(t >= 0.0 && t * d < 0.5) {
        return Err(Error::TOutOfRange { t, t_star: 0.5 / d });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let deltas = spec.deltas();
    let terms: Vec<(f64, f64, f64)> = weights
        .iter()
        .zip(deltas)
        .map(|(&w, &dl)| {
            let a = t * w;
            let r = 1.0 - 2.0 * a;
            (w, 2.0 * a * dl / r, 1.0 / r.sqrt())
        })
        .collect();
    let log_mgf: f64 = weights
        .iter()
        .zip(deltas)
        .map(|(&w, &dl)| l1_raw(t * w) + dl * dl * l2_raw(t * w))
        .sum();

    let mut out = vec![(0.0, 0.0); n];
    out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
        let mut rng = chunk_rng(seed, c);
        for slot in chunk.iter_mut() {
            let mut q = 0.0;
            for (&(w, shift, sd), &dl) in terms.iter().zip(deltas) {
                let z: f64 = StandardNormal.sample(&mut rng);
                let x = shift + sd * z + dl;
                q += w * x * x;
            }
            *slot = (q, -t * q + log_mgf);
        }
    });
    Ok(out)
}

/// Importance-sampling estimate of `P(Q_f > q)` under exponential tilting.
///
/// Unbiased (not self-normalized); the interval is normal with the empirical
/// standard error. `t = 0` reduces to plain Monte Carlo with unit weights.
pub fn tilted_tail(
    spec: &Spectrum,
    f: &FunctionSpec,
    q: f64,
    n: usize,
    seed: u64,
    tilt: Tilt,
) -> Result<OracleEstimate> {
    let t = resolve_tilt(spec, f, q, tilt)?;
    let draws = sample_tilted(spec, f, t, seed, n)?;
    Ok(weighted_tail(&draws, q, seed))
}

pub(crate) fn resolve_tilt(spec: &Spectrum, f: &FunctionSpec, q: f64, tilt: Tilt) -> Result<f64> {
    match tilt {
        Tilt::Value(t) => Ok(t),
        Tilt::Auto => Ok(upper_tail_bound(spec, f, q)?.t_opt),
    }
}

fn weighted_tail(draws: &[(f64, f64)], q: f64, seed: u64) -> OracleEstimate {
    let n = draws.len();
    let partials: Vec<(f64, f64)> = draws
        .par_chunks(CHUNK)
        .map(|chunk| {
            chunk.iter().fold((0.0, 0.0), |(s1, s2), &(v, lw)| {
                if v > q {
                    let w = lw.exp();
                    (s1 + w, s2 + w * w)
                } else {
                    (s1, s2)
                }
            })
        })
        .collect();
    let (s1, s2) = partials.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let nf = n as f64;
    let p = s1 / nf;
    let var = if n > 1 { ((s2 / nf - p * p) * nf / (nf - 1.0)).max(0.0) } else { 0.0 };
    let se = (var / nf).sqrt();
    let ess = if s2 > 0.0 { s1 * s1 / s2 } else { 0.0 };
    OracleEstimate {
        p_hat: p,
        se,
        ci_lo: (p - Z95 * se).max(0.0),
        ci_hi: p + Z95 * se,
        n_samples: n,
        method: OracleMethod::Tilted,
        seed,
        ess: Some(ess),
        low_quality: ess < MIN_ESS,
    }
}

const SERIES_CAP: usize = 100_000;

/// `P(Q > q)` for `Q = η·Σ_{i=1}^{k} (Zᵢ + δ)²`, i.e. `η` times a noncentral
/// chi-square with `k` degrees of freedom and noncentrality `k·δ²`, via the
/// Poisson mixture of central chi-squares, summed until the bound on the
/// omitted terms drops below `1e-15` relative to the partial sum.
pub fn exact_tail_equal_eigs(n_terms: usize, eta: f64, delta: f64, q: f64) -> Result<f64> {
    if n_terms == 0 {
        return Err(Error::InvalidArgument("n_terms must be at least 1".into()));
    }
    if eta == 0.0 || !eta.is_finite() || !delta.is_finite() || q.is_nan() {
        return Err(Error::InvalidArgument("eta must be nonzero and inputs finite".into()));
    }
    let x = q / eta;
    let lambda = n_terms as f64 * delta * delta;
    if eta > 0.0 {
        noncentral_chi2(n_terms as f64, lambda, x, true)
    } else {
        // Q > q  ⟺  χ'² < q/η
        noncentral_chi2(n_terms as f64, lambda, x, false)
    }
}

/// Survival (`upper = true`) or cdf of the noncentral chi-square.
fn noncentral_chi2(k: f64, lambda: f64, x: f64, upper: bool) -> Result<f64> {
    if x <= 0.0 {
        return Ok(if upper { 1.0 } else { 0.0 });
    }
    let central = |dof: f64| {
        if upper {
            gamma_ur(dof / 2.0, x / 2.0)
        } else {
            gamma_lr(dof / 2.0, x / 2.0)
        }
    };
    if lambda == 0.0 {
        return Ok(central(k));
    }
    let half = lambda / 2.0;
    let mut log_pois = -half;
    let mut acc = 0.0;
    for j in 0..SERIES_CAP {
        if j > 0 {
            log_pois += half.ln() - (j as f64).ln();
        }
        let w = log_pois.exp();
        acc += w * central(k + 2.0 * j as f64);
        // past the mode the Poisson weights fall faster than a geometric
        // series with ratio half/(j + 2), and every central term is ≤ 1
        let jf = j as f64;
        if jf + 2.0 > half {
            let remainder = w * half / (jf + 1.0) / (1.0 - half / (jf + 2.0));
            if remainder < 1e-15 * acc || remainder < f64::MIN_POSITIVE {
                return Ok(acc.clamp(0.0, 1.0));
            }
        }
    }
    Err(Error::SeriesNoConvergence { terms: SERIES_CAP })
}

/// One row of the modified Q–Q diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QqRow {
    pub z: f64,
    /// Empirical quantile `F̂⁻¹(1 - 10⁻ᶻ)`.
    pub q: f64,
    /// Tail bound at `q`.
    pub tail_bound: f64,
    /// `Ω(z) = -log₁₀(tail bound at q)`.
    pub omega: f64,
    pub z_minus_omega: f64,
    /// False when `10⁻ᶻ` is below what the sample can resolve; the other
    /// fields are then NaN.
    pub resolved: bool,
}

fn bound_at(spec: &Spectrum, f: &FunctionSpec, method: Method, q: f64) -> Result<TailBoundResult> {
    match method {
        Method::Optimized => upper_tail_bound(spec, f, q),
        Method::Legacy => {
            if !f.is_identity() {
                return Err(Error::Unsupported(
                    "the legacy bound is only defined for the identity function".into(),
                ));
            }
            Ok(legacy_bound(&LegacyParams::from_spectrum(spec)?, q, Tail::Upper))
        }
    }
}

fn qq_row(z: f64, q: f64, b: &TailBoundResult) -> QqRow {
    let omega = -b.log10_bound();
    QqRow {
        z,
        q,
        tail_bound: b.bound,
        omega,
        z_minus_omega: z - omega,
        resolved: true,
    }
}

fn unresolved(z: f64) -> QqRow {
    QqRow {
        z,
        q: f64::NAN,
        tail_bound: f64::NAN,
        omega: f64::NAN,
        z_minus_omega: f64::NAN,
        resolved: false,
    }
}

/// Rows of `(z, z - Ω(z))` with `Ω(z) = -log₁₀(1 - U(F̂⁻¹(1 - 10⁻ᶻ)))`, where
/// `1 - U` is the selected tail bound and `F̂` the empirical distribution.
///
/// Without tilting, `z` is resolvable when `10⁻ᶻ ≥ 10/n`. With tilting,
/// each `z` gets its own tilted sample aimed at the point where the bound
/// equals `10⁻ᶻ`, and the quantile is read from the weighted sample; it is
/// resolvable when at least 10 draws lie above it.
pub fn qq_data(
    spec: &Spectrum,
    f: &FunctionSpec,
    method: Method,
    z_grid: &[f64],
    n: usize,
    seed: u64,
    tilt: bool,
) -> Result<Vec<QqRow>> {
    if n < 1000 {
        return Err(Error::InvalidArgument(format!("qq needs at least 1000 samples (got {n})")));
    }
    if let Some(z) = z_grid.iter().find(|z| !(z.is_finite() && **z > 0.0)) {
        return Err(Error::InvalidArgument(format!("z values must be positive (got {z})")));
    }
    if !tilt {
        return qq_from_sample(&McSample::draw(spec, f, seed, n)?, spec, f, method, z_grid);
    }
    z_grid
        .iter()
        .map(|&z| {
            let p = 10f64.powf(-z);
            let target = bound_inverse(spec, f, p)?;
            let t = upper_tail_bound(spec, f, target)?.t_opt;
            let mut draws = sample_tilted(spec, f, t, seed, n)?;
            draws.par_sort_unstable_by(|a, b| b.0.total_cmp(&a.0));
            let nf = n as f64;
            let mut acc = 0.0;
            let mut q = f64::NAN;
            let mut above = 0;
            for (i, &(v, lw)) in draws.iter().enumerate() {
                acc += lw.exp() / nf;
                if acc >= p {
                    q = v;
                    above = i;
                    break;
                }
            }
            if q.is_nan() || above < 10 {
                return Ok(unresolved(z));
            }
            Ok(qq_row(z, q, &bound_at(spec, f, method, q)?))
        })
        .collect()
}

/// Q–Q rows from an existing plain Monte Carlo sample of `Q_f`.
pub fn qq_from_sample(
    sample: &McSample,
    spec: &Spectrum,
    f: &FunctionSpec,
    method: Method,
    z_grid: &[f64],
) -> Result<Vec<QqRow>> {
    let n = sample.len() as f64;
    z_grid
        .iter()
        .map(|&z| {
            let p = 10f64.powf(-z);
            if p * n < 10.0 {
                return Ok(unresolved(z));
            }
            let q = sample.upper_quantile(p);
            Ok(qq_row(z, q, &bound_at(spec, f, method, q)?))
        })
        .collect()
}

/// Smallest `q` with optimized upper-tail bound `≤ p`, by bisection.
fn bound_inverse(spec: &Spectrum, f: &FunctionSpec, p: f64) -> Result<f64> {
    let xi = spec.scale_params(f)?.xi;
    let scale = spec.sum_eta2().sqrt().max(spec.max_abs_eta());
    let target = p.ln();
    let mut lo = xi;
    let mut hi = xi + scale;
    while upper_tail_bound(spec, f, hi)?.log_bound > target {
        lo = hi;
        hi = xi + 2.0 * (hi - xi);
        if !hi.is_finite() {
            return Err(Error::InvalidArgument(format!("cannot reach tail probability {p}")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if upper_tail_bound(spec, f, mid)?.log_bound > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}
