//! Chernoff-style tail bounds for Gaussian quadratic forms
//! `Q_f = Σ f(ηᵢ)(Zᵢ + δᵢ)²` with `Zᵢ ~ N(0, 1)`.
//!
//! The bound replaces each cumulant term of `Q_f` with the tightest parabola
//! through the origin that dominates it on `[-L, L]`, then minimizes the
//! resulting Chernoff exponent over the tilt `t`. Everything it needs is a
//! handful of trace sums, so the matrix path never requires an
//! eigendecomposition.
//!
//! Modules:
//! - [`spectrum`]: problem definition, scale parameters and exact moments.
//! - [`coeffs`]: cumulant terms and optimal majorant coefficients.
//! - [`optimize`]: bracketed scalar minimization over the open tilt interval.
//! - [`bounds`]: the optimized bound, the legacy sub-gamma baseline, comparisons.
//! - [`matrixops`]: trace summaries, power iteration, Jacobi eigensolver.
//! - [`oracle`]: Monte Carlo, exponentially tilted sampling, closed forms.
//! - [`io`]: file readers and writers.

// `!(x > 0.0)` style checks are deliberate: they send NaN down the error path.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod coeffs;
mod error;
pub mod io;
pub mod matrixops;
pub mod optimize;
pub mod oracle;
pub mod spectrum;
mod sum;

pub use bounds::{
    compare, legacy_bound, lower_tail_bound, nu_f, upper_tail_bound, ComparisonRow, LegacyParams,
    Method, Regime, Tail, TailBoundResult,
};
pub use coeffs::{
    coeffs_general, coeffs_identity, coeffs_power, l1, l2, t_star, verify_lemma_conditions,
    BoundCoefficients, ConditionReport, FunctionSpec, TabulatedFn,
};
pub use error::{Error, Result};
pub use matrixops::{full_spectrum, spectral_bound, summarize, MatrixSummary, SymMatrix};
pub use optimize::{minimize_scalar, ScalarMinResult};
pub use oracle::{
    exact_tail_equal_eigs, mc_tail, qq_data, sample_qf, tilted_tail, OracleEstimate, OracleMethod,
    QqRow, Tilt,
};
pub use spectrum::{Moments, ScaleParams, Spectrum};
