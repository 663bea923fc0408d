use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "qfbound",
    version,
    about = "Tail bounds for Gaussian quadratic forms Q_f = Σ f(η_i)(Z_i + δ_i)²",
    long_about = None
)]
pub struct Cli {
    /// Worker threads for sampling and grid evaluation. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimized Chernoff bound at one q or over a grid.
    Bound(BoundArgs),
    /// Legacy sub-gamma bound (identity f only).
    Legacy(BoundArgs),
    /// Optimized and legacy bounds side by side.
    Compare(BoundArgs),
    /// Bound next to a Monte Carlo or tilted importance-sampling estimate.
    Oracle(OracleArgs),
    /// Modified Q–Q data: z − Ω(z) with Ω(z) = −log10(bound at the empirical (1 − 10^−z) quantile).
    Qq(QqArgs),
    /// Trace summary of a symmetric matrix.
    MatrixInfo(MatrixInfoArgs),
    /// Write a synthetic spectrum file.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// Spectrum file: CSV with columns eta,delta, or JSON {"eta": [...], "delta": [...]}.
    #[arg(long, required_unless_present = "matrix", conflicts_with = "matrix")]
    pub spectrum: Option<PathBuf>,

    /// Symmetric matrix M: Matrix Market (.mtx) or dense CSV. Q = XᵀMX (or XᵀMᵖX) with X ~ N(μ, I).
    #[arg(long)]
    pub matrix: Option<PathBuf>,

    /// Mean vector μ for --matrix, one value per line (default: zero).
    #[arg(long, requires = "matrix")]
    pub mu: Option<PathBuf>,

    /// Diagonalize the matrix and bound through its spectrum instead of the trace summary.
    #[arg(long, requires = "matrix")]
    pub exact_spectrum: bool,

    /// Relative tolerance of the spectral-norm estimate on the matrix path.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FnArgs {
    /// Function applied to the eigenvalues: identity, power:P, or tabulated:PATH
    /// (CSV with columns x,fx). power:1 is the identity.
    #[arg(long = "f", default_value = "identity")]
    pub f: FnChoice,

    /// f'(0) for a tabulated f (estimated by finite differences when omitted).
    #[arg(long, allow_hyphen_values = true)]
    pub fprime0: Option<f64>,

    /// Grid size per axis for the admissibility check of a tabulated f.
    #[arg(long, default_value_t = 100)]
    pub grid_size: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
#[group(required = true, multiple = false)]
pub struct QueryArgs {
    /// Single threshold q.
    #[arg(long, allow_hyphen_values = true)]
    pub q: Option<f64>,

    /// Grid lo:hi:steps, or lo:hi:steps:log for log spacing.
    #[arg(long, allow_hyphen_values = true)]
    pub q_grid: Option<Grid>,
}

impl QueryArgs {
    pub fn values(&self) -> Vec<f64> {
        match (&self.q, &self.q_grid) {
            (Some(q), _) => vec![*q],
            (None, Some(g)) => g.values(),
            (None, None) => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TailArg {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutArgs {
    /// Output CSV path (a `<out>.meta.json` sidecar is written next to it). Stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BoundArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub function: FnArgs,
    #[command(flatten)]
    pub query: QueryArgs,
    #[arg(long, value_enum, default_value_t = TailArg::Upper)]
    pub tail: TailArg,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SamplingArgs {
    /// Monte Carlo sample size.
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Exponential tilting: off, auto (optimizing t of the bound), or a fixed t.
    #[arg(long, default_value = "off")]
    pub tilt: TiltChoice,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OracleArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub function: FnArgs,
    #[command(flatten)]
    pub query: QueryArgs,
    #[arg(long, value_enum, default_value_t = TailArg::Upper)]
    pub tail: TailArg,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundMethodArg {
    Optimized,
    Legacy,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct QqArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub function: FnArgs,
    /// z values: comma-separated list or lo:hi:steps.
    #[arg(long, default_value = "0.5:4:8")]
    pub z_grid: ZGrid,
    #[arg(long, value_enum, default_value_t = BoundMethodArg::Optimized)]
    pub bound_method: BoundMethodArg,
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MatrixInfoArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub mu: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumKind {
    /// η_i = exp(−rate·i), i = 1..n.
    Expdecay,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value_t = SpectrumKind::Expdecay)]
    pub kind: SpectrumKind,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 0.1)]
    pub rate: f64,
    /// δ values: one number for all entries, or a comma-separated list of n values (default 0).
    #[arg(long, allow_hyphen_values = true)]
    pub deltas: Option<String>,
    /// Output path (.json for JSON, CSV otherwise). Stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FnChoice {
    Identity,
    Power(u32),
    Tabulated(PathBuf),
}

impl FromStr for FnChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "identity" {
            return Ok(FnChoice::Identity);
        }
        if let Some(p) = s.strip_prefix("power:") {
            let p: u32 = p.parse().map_err(|_| format!("invalid power {p:?}"))?;
            if p == 0 {
                return Err("power must be at least 1".into());
            }
            return Ok(if p == 1 { FnChoice::Identity } else { FnChoice::Power(p) });
        }
        if let Some(path) = s.strip_prefix("tabulated:") {
            if path.is_empty() {
                return Err("tabulated: needs a file path".into());
            }
            return Ok(FnChoice::Tabulated(PathBuf::from(path)));
        }
        Err(format!("expected identity, power:P or tabulated:PATH (got {s:?})"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TiltChoice {
    Off,
    Auto,
    Value(f64),
}

impl FromStr for TiltChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "off" => Ok(TiltChoice::Off),
            "auto" => Ok(TiltChoice::Auto),
            _ => s
                .parse::<f64>()
                .ok()
                .filter(|t| t.is_finite() && *t >= 0.0)
                .map(TiltChoice::Value)
                .ok_or_else(|| format!("expected off, auto or a non-negative t (got {s:?})")),
        }
    }
}

/// `lo:hi:steps[:log]`, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
    pub log: bool,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.lo];
        }
        let k = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                let s = i as f64 / k;
                if self.log {
                    (self.lo.ln() + s * (self.hi.ln() - self.lo.ln())).exp()
                } else {
                    self.lo + s * (self.hi - self.lo)
                }
            })
            .collect()
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let log = match parts.as_slice() {
            [_, _, _] => false,
            [_, _, _, "log"] => true,
            _ => return Err(format!("expected lo:hi:steps or lo:hi:steps:log (got {s:?})")),
        };
        let num = |p: &str| -> Result<f64, String> {
            p.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("invalid grid bound {p:?}"))
        };
        let (lo, hi) = (num(parts[0])?, num(parts[1])?);
        let steps: usize = parts[2].parse().map_err(|_| format!("invalid step count {:?}", parts[2]))?;
        if steps == 0 {
            return Err("grid needs at least one step".into());
        }
        if hi < lo {
            return Err(format!("grid upper end {hi} is below lower end {lo}"));
        }
        if log && lo <= 0.0 {
            return Err("log grid needs a positive lower end".into());
        }
        Ok(Grid { lo, hi, steps, log })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZGrid(pub Vec<f64>);

impl FromStr for ZGrid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let values = if s.contains(':') {
            s.parse::<Grid>()?.values()
        } else {
            s.split(',')
                .map(|p| p.trim().parse::<f64>().map_err(|_| format!("invalid z value {p:?}")))
                .collect::<Result<Vec<_>, _>>()?
        };
        if values.iter().any(|z| !(z.is_finite() && *z > 0.0)) {
            return Err("z values must be positive".into());
        }
        Ok(ZGrid(values))
    }
}
