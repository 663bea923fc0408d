use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("etas has {etas} entries but deltas has {deltas}")]
    LengthMismatch { etas: usize, deltas: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },
    #[error("degenerate spectrum: every eta is zero")]
    DegenerateSpectrum,
    #[error("{func}({x}) is outside the domain x < 1/2")]
    Domain { func: &'static str, x: f64 },
    #[error("t = {t} is outside [0, {t_star})")]
    TOutOfRange { t: f64, t_star: f64 },
    #[error("power must be a positive integer (got {0})")]
    InvalidPower(u32),
    #[error("tabulated f is not monotone non-decreasing at knot {index}")]
    NotMonotone { index: usize },
    #[error("f vanishes at both -L and L (L = {l})")]
    ZeroAtBoundary { l: f64 },
    #[error("f cannot be evaluated at {x}: table covers [{lo}, {hi}]")]
    OutsideTable { x: f64, lo: f64, hi: f64 },
    #[error("invalid tabulated function: {0}")]
    InvalidTable(String),
    #[error("objective is not finite at interior point t = {t}")]
    NonFiniteObjective { t: f64 },
    #[error("minimizer did not converge within {evaluations} evaluations")]
    NoConvergence { evaluations: usize },
    #[error("invalid interval ({lo}, {hi})")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not symmetric at ({i}, {j})")]
    NotSymmetric { i: usize, j: usize },
    #[error("matrix has no nonzero eigenvalue")]
    ZeroMatrix,
    #[error("power iteration stalled: best estimate {best}, enclosure width {width}")]
    SpectralNoConvergence { best: f64, width: f64 },
    #[error("matrix dimension {n} exceeds the cap of {cap}")]
    TooLarge { n: usize, cap: usize },
    #[error("Jacobi iteration did not converge after {sweeps} sweeps")]
    EigenNoConvergence { sweeps: usize },
    #[error("series did not converge after {terms} terms")]
    SeriesNoConvergence { terms: usize },
    #[error("{0}")]
    Unsupported(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
