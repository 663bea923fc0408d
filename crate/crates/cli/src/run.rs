use std::path::Path;

use log::info;
use rayon::prelude::*;
use serde_json::{json, Value};

use qfbound::bounds::{tail_bound, LegacyParams};
use qfbound::coeffs::t_star;
use qfbound::io;
use qfbound::matrixops::summarize_with;
use qfbound::oracle::{McSample, GENERATOR};
use qfbound::{
    full_spectrum, legacy_bound, qq_data, tilted_tail, verify_lemma_conditions, FunctionSpec, MatrixSummary,
    Method, OracleEstimate, ScaleParams, Spectrum, SymMatrix, Tail, TailBoundResult, Tilt,
};

use crate::args::{
    BoundArgs, BoundMethodArg, Command, FnArgs, FnChoice, GenerateArgs, InputArgs, MatrixInfoArgs, OracleArgs,
    QqArgs, SpectrumKind, TailArg, TiltChoice,
};
use crate::error::CliError;
use crate::output::{emit, num, Table};

type Result<T> = std::result::Result<T, CliError>;

pub fn run(command: &Command) -> Result<()> {
    match command {
        Command::Bound(a) => bound(a),
        Command::Legacy(a) => legacy(a),
        Command::Compare(a) => compare(a),
        Command::Oracle(a) => oracle(a),
        Command::Qq(a) => qq(a),
        Command::MatrixInfo(a) => matrix_info(a),
        Command::Generate(a) => generate(a),
    }
}

fn with_path<T>(path: &Path, r: qfbound::Result<T>) -> Result<T> {
    r.map_err(|e| match CliError::from(e) {
        CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// The quadratic form as given on the command line.
enum Problem {
    Spectrum(Spectrum),
    Matrix {
        matrix: SymMatrix,
        mu: Vec<f64>,
        summary: MatrixSummary,
    },
}

impl Problem {
    fn load(input: &InputArgs) -> Result<(Problem, &'static str)> {
        if let Some(path) = &input.spectrum {
            return Ok((Problem::Spectrum(with_path(path, io::read_spectrum(path))?), "spectrum"));
        }
        let path = input
            .matrix
            .as_ref()
            .ok_or_else(|| CliError::Input("one of --spectrum or --matrix is required".into()))?;
        let matrix = with_path(path, io::read_matrix(path))?;
        let mu = match &input.mu {
            Some(p) => with_path(p, io::read_vector(p))?,
            None => vec![0.0; matrix.dim()],
        };
        if input.exact_spectrum {
            return Ok((Problem::Spectrum(full_spectrum(&matrix, &mu)?), "matrix_exact_spectrum"));
        }
        if !(input.tol > 0.0 && input.tol < 1.0) {
            return Err(CliError::Input(format!("--tol must lie in (0, 1) (got {})", input.tol)));
        }
        let summary = summarize_with(&matrix, &mu, input.tol, 0)?;
        Ok((Problem::Matrix { matrix, mu, summary }, "matrix_trace"))
    }

    fn scale_params(&self, f: &FunctionSpec) -> Result<ScaleParams> {
        Ok(match self {
            Problem::Spectrum(s) => s.scale_params(f)?,
            Problem::Matrix { summary, .. } => summary.scale_params(f)?,
        })
    }

    fn legacy_params(&self) -> Result<LegacyParams> {
        Ok(match self {
            Problem::Spectrum(s) => LegacyParams::from_spectrum(s)?,
            Problem::Matrix { summary, .. } => LegacyParams::from_summary(summary)?,
        })
    }

    /// Samplers need eigenvalues; a matrix is diagonalized on demand.
    fn into_spectrum(self) -> Result<Spectrum> {
        match self {
            Problem::Spectrum(s) => Ok(s),
            Problem::Matrix { matrix, mu, .. } => Ok(full_spectrum(&matrix, &mu)?),
        }
    }

    fn len(&self) -> usize {
        match self {
            Problem::Spectrum(s) => s.len(),
            Problem::Matrix { matrix, .. } => matrix.dim(),
        }
    }
}

fn tail_of(t: TailArg) -> Tail {
    match t {
        TailArg::Upper => Tail::Upper,
        TailArg::Lower => Tail::Lower,
    }
}

fn load_function(a: &FnArgs) -> Result<FunctionSpec> {
    Ok(match &a.f {
        FnChoice::Identity => FunctionSpec::Identity,
        FnChoice::Power(p) => FunctionSpec::power(*p)?,
        FnChoice::Tabulated(path) => {
            FunctionSpec::Tabulated(with_path(path, io::read_tabulated(path, a.fprime0))?)
        }
    })
}

/// Everything shared by the bound-producing commands.
struct Context {
    problem: Problem,
    source: &'static str,
    f: FunctionSpec,
    params: ScaleParams,
    verification: &'static str,
}

impl Context {
    fn new(input: &InputArgs, fa: &FnArgs, tail: Tail) -> Result<Context> {
        let (problem, source) = Problem::load(input)?;
        let f = load_function(fa)?;
        f.check_admissible()?;
        let params = problem.scale_params(&f)?;
        let verification = verify(&f, &params, tail, fa.grid_size)?;
        info!(
            "n = {}, L = {}, d = {}, xi = {}, f = {}",
            problem.len(),
            params.l,
            params.d,
            params.xi,
            f.label()
        );
        Ok(Context {
            problem,
            source,
            f,
            params,
            verification,
        })
    }

    fn meta(&self, command: &str, config: Value) -> Value {
        let t_star = t_star(&self.f, self.params.l).ok();
        let tilt_limit = t_star.map(|ts| if self.params.d > 0.0 { ts.min(0.5 / self.params.d) } else { ts });
        json!({
            "tool": "qfbound",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "config": config,
            "input": {
                "source": self.source,
                "n": self.problem.len(),
                "matrix_summary": match &self.problem {
                    Problem::Matrix { summary, .. } => serde_json::to_value(summary).ok(),
                    Problem::Spectrum(_) => None,
                },
            },
            "f": self.f.label(),
            "f_verification": self.verification,
            "scale": {
                "L": self.params.l,
                "d": self.params.d,
                "xi": self.params.xi,
                "c": self.params.c,
                "sum_eta2": self.params.s2,
                "sum_eta2_delta2": self.params.s2d,
                "t_star": t_star,
                "t_max": tilt_limit,
            },
        })
    }
}

/// Identity and powers are admissible by proof; a tabulated f (or its
/// reflection for the lower tail) is checked on a grid.
fn verify(f: &FunctionSpec, params: &ScaleParams, tail: Tail, grid: usize) -> Result<&'static str> {
    if !matches!(f, FunctionSpec::Tabulated(_)) {
        return Ok("analytic");
    }
    if grid < 2 {
        return Err(CliError::Input("--grid-size must be at least 2".into()));
    }
    let g = match tail {
        Tail::Upper => f.clone(),
        Tail::Lower => f.reflected(),
    };
    let report = verify_lemma_conditions(&g, params.l, grid)?;
    if let Some(v) = report.first_violation {
        return Err(CliError::Inadmissible(format!(
            "condition {} for {:?} fails at x = {}, t = {} (lhs {} < rhs {})",
            v.condition, v.term, v.x, v.t, v.lhs, v.rhs
        )));
    }
    Ok("grid-verified")
}

fn config<T: serde::Serialize>(args: &T) -> Value {
    serde_json::to_value(args).expect("arguments serialize")
}

fn bounds_at(ctx: &Context, qs: &[f64], tail: Tail) -> Result<Vec<TailBoundResult>> {
    Ok(qs
        .par_iter()
        .map(|&q| tail_bound(&ctx.params, &ctx.f, q, tail))
        .collect::<qfbound::Result<Vec<_>>>()?)
}

fn summary(out: Option<&Path>, rows: usize, ctx: Option<&Context>) {
    if let Some(path) = out {
        match ctx {
            Some(c) => eprintln!(
                "wrote {rows} rows to {} (f = {}, L = {}, xi = {}, f check: {})",
                path.display(),
                c.f.label(),
                c.params.l,
                c.params.xi,
                c.verification
            ),
            None => eprintln!("wrote {rows} rows to {}", path.display()),
        }
    }
}

fn bound(a: &BoundArgs) -> Result<()> {
    let tail = tail_of(a.tail);
    let ctx = Context::new(&a.input, &a.function, tail)?;
    let qs = a.query.values();
    let mut table = Table::new(&["q", "bound_new", "log10_bound", "t_opt", "method"]);
    for r in bounds_at(&ctx, &qs, tail)? {
        table.push(vec![
            num(Some(r.q)),
            num(Some(r.bound)),
            num(Some(r.log10_bound())),
            num(Some(r.t_opt)),
            r.method.as_str().into(),
        ]);
    }
    let out = a.out.out.as_deref();
    emit(out, &table.render(), &ctx.meta("bound", config(a)))?;
    summary(out, table.len(), Some(&ctx));
    Ok(())
}

fn require_identity(f: &FunctionSpec) -> Result<()> {
    if f.is_identity() {
        Ok(())
    } else {
        Err(CliError::Input(format!(
            "the legacy bound is only defined for f = identity (got {})",
            f.label()
        )))
    }
}

fn legacy(a: &BoundArgs) -> Result<()> {
    let tail = tail_of(a.tail);
    let ctx = Context::new(&a.input, &a.function, tail)?;
    require_identity(&ctx.f)?;
    let lp = ctx.problem.legacy_params()?;
    let mut table = Table::new(&["q", "bound_legacy", "log10_bound", "regime", "method"]);
    for q in a.query.values() {
        let r = legacy_bound(&lp, q, tail);
        table.push(vec![
            num(Some(q)),
            num(Some(r.bound)),
            num(Some(r.log10_bound())),
            r.regime.as_str().into(),
            r.method.as_str().into(),
        ]);
    }
    let mut meta = ctx.meta("legacy", config(a));
    meta["legacy"] = json!({ "nu": lp.nu, "b": lp.b, "mean": lp.mean, "threshold": lp.threshold() });
    let out = a.out.out.as_deref();
    emit(out, &table.render(), &meta)?;
    summary(out, table.len(), Some(&ctx));
    Ok(())
}

fn compare(a: &BoundArgs) -> Result<()> {
    let tail = tail_of(a.tail);
    let ctx = Context::new(&a.input, &a.function, tail)?;
    let lp = if ctx.f.is_identity() {
        Some(ctx.problem.legacy_params()?)
    } else {
        None
    };
    let qs = a.query.values();
    let mut table = Table::new(&[
        "q",
        "bound_new",
        "log10_bound",
        "t_opt",
        "bound_legacy",
        "log10_bound_legacy",
        "ratio",
    ]);
    for r in bounds_at(&ctx, &qs, tail)? {
        let l = lp.as_ref().map(|p| legacy_bound(p, r.q, tail));
        table.push(vec![
            num(Some(r.q)),
            num(Some(r.bound)),
            num(Some(r.log10_bound())),
            num(Some(r.t_opt)),
            num(l.map(|l| l.bound)),
            num(l.map(|l| l.log10_bound())),
            num(l.map(|l| (r.log_bound - l.log_bound).exp())),
        ]);
    }
    let mut meta = ctx.meta("compare", config(a));
    if let Some(lp) = lp {
        meta["legacy"] = json!({ "nu": lp.nu, "b": lp.b, "mean": lp.mean, "threshold": lp.threshold() });
    }
    let out = a.out.out.as_deref();
    emit(out, &table.render(), &meta)?;
    summary(out, table.len(), Some(&ctx));
    Ok(())
}

const MIN_SAMPLES: usize = 1000;

fn check_samples(n: usize) -> Result<()> {
    if n < MIN_SAMPLES {
        return Err(CliError::Input(format!("--samples must be at least {MIN_SAMPLES} (got {n})")));
    }
    Ok(())
}

fn oracle(a: &OracleArgs) -> Result<()> {
    let tail = tail_of(a.tail);
    let s = &a.sampling;
    check_samples(s.samples)?;
    if tail == Tail::Lower && s.tilt != TiltChoice::Off {
        return Err(CliError::Input("tilted sampling is available for the upper tail only".into()));
    }
    let ctx = Context::new(&a.input, &a.function, tail)?;
    let lp = if ctx.f.is_identity() {
        Some(ctx.problem.legacy_params()?)
    } else {
        None
    };
    let qs = a.query.values();
    let bounds = bounds_at(&ctx, &qs, tail)?;
    let Context {
        problem,
        source,
        f,
        params,
        verification,
    } = ctx;
    let spec = problem.into_spectrum()?;

    let estimates: Vec<OracleEstimate> = match s.tilt {
        TiltChoice::Off => {
            let sample = McSample::draw(&spec, &f, s.seed, s.samples)?;
            qs.iter()
                .map(|&q| match tail {
                    Tail::Upper => sample.tail(q),
                    Tail::Lower => sample.lower_tail(q),
                })
                .collect()
        }
        TiltChoice::Auto | TiltChoice::Value(_) => {
            let tilt = match s.tilt {
                TiltChoice::Value(t) => Tilt::Value(t),
                _ => Tilt::Auto,
            };
            qs.iter()
                .map(|&q| tilted_tail(&spec, &f, q, s.samples, s.seed, tilt))
                .collect::<qfbound::Result<_>>()?
        }
    };

    let mut table = Table::new(&[
        "q",
        "bound_new",
        "log10_bound",
        "t_opt",
        "bound_legacy",
        "oracle_p",
        "oracle_se",
        "oracle_ci_lo",
        "oracle_ci_hi",
        "method",
        "ess",
        "low_quality",
    ]);
    let mut low = 0;
    for (b, e) in bounds.iter().zip(&estimates) {
        let l = lp.as_ref().map(|p| legacy_bound(p, b.q, tail));
        low += usize::from(e.low_quality);
        table.push(vec![
            num(Some(b.q)),
            num(Some(b.bound)),
            num(Some(b.log10_bound())),
            num(Some(b.t_opt)),
            num(l.map(|l| l.bound)),
            num(Some(e.p_hat)),
            num(Some(e.se)),
            num(Some(e.ci_lo)),
            num(Some(e.ci_hi)),
            e.method.as_str().into(),
            num(e.ess),
            e.low_quality.to_string(),
        ]);
    }
    if low > 0 {
        log::warn!("{low} tilted estimate(s) have fewer than 50 effective exceedances");
    }
    let ctx = Context {
        problem: Problem::Spectrum(spec),
        source,
        f,
        params,
        verification,
    };
    let mut meta = ctx.meta("oracle", config(a));
    meta["generator"] = json!(GENERATOR);
    let out = a.out.out.as_deref();
    emit(out, &table.render(), &meta)?;
    summary(out, table.len(), Some(&ctx));
    Ok(())
}

fn qq(a: &QqArgs) -> Result<()> {
    let s = &a.sampling;
    check_samples(s.samples)?;
    let tilt = match s.tilt {
        TiltChoice::Off => false,
        TiltChoice::Auto => true,
        TiltChoice::Value(_) => {
            return Err(CliError::Input(
                "qq chooses the tilt per z; use --tilt auto or off".into(),
            ))
        }
    };
    let zs = &a.z_grid.0;
    if !tilt {
        let limit = (s.samples as f64 / 10.0).log10();
        if let Some(z) = zs.iter().find(|&&z| z > limit) {
            return Err(CliError::Resolution(format!(
                "z = {z} needs 10^-z >= 10/n; with n = {} the largest resolvable z is {limit:.4} \
                 (raise --samples or use --tilt auto)",
                s.samples
            )));
        }
    }
    let ctx = Context::new(&a.input, &a.function, Tail::Upper)?;
    let method = match a.bound_method {
        BoundMethodArg::Optimized => Method::Optimized,
        BoundMethodArg::Legacy => {
            require_identity(&ctx.f)?;
            Method::Legacy
        }
    };
    let Context {
        problem,
        source,
        f,
        params,
        verification,
    } = ctx;
    let spec = problem.into_spectrum()?;
    let rows = qq_data(&spec, &f, method, zs, s.samples, s.seed, tilt)?;
    if let Some(r) = rows.iter().find(|r| !r.resolved) {
        return Err(CliError::Resolution(format!(
            "too few tilted draws beyond the quantile at z = {}; raise --samples",
            r.z
        )));
    }
    let mut table = Table::new(&["z", "q", "tail_bound", "omega", "z_minus_omega"]);
    for r in &rows {
        table.push(vec![
            num(Some(r.z)),
            num(Some(r.q)),
            num(Some(r.tail_bound)),
            num(Some(r.omega)),
            num(Some(r.z_minus_omega)),
        ]);
    }
    let ctx = Context {
        problem: Problem::Spectrum(spec),
        source,
        f,
        params,
        verification,
    };
    let mut meta = ctx.meta("qq", config(a));
    meta["generator"] = json!(GENERATOR);
    let out = a.out.out.as_deref();
    emit(out, &table.render(), &meta)?;
    summary(out, table.len(), Some(&ctx));
    Ok(())
}

fn matrix_info(a: &MatrixInfoArgs) -> Result<()> {
    let matrix = with_path(&a.matrix, io::read_matrix(&a.matrix))?;
    let mu = match &a.mu {
        Some(p) => with_path(p, io::read_vector(p))?,
        None => vec![0.0; matrix.dim()],
    };
    if !(a.tol > 0.0 && a.tol < 1.0) {
        return Err(CliError::Input(format!("--tol must lie in (0, 1) (got {})", a.tol)));
    }
    let s = summarize_with(&matrix, &mu, a.tol, 0)?;
    let lp = LegacyParams::from_summary(&s)?;
    let mut table = Table::new(&["quantity", "value"]);
    for (k, v) in [
        ("n", s.n as f64),
        ("trace", s.trace),
        ("mu_quad", s.mu_quad),
        ("mean", s.mu_quad + s.trace),
        ("mmu_norm2", s.mmu_norm2),
        ("hs_norm2", s.hs_norm2),
        ("spec_bound", s.spec_bound),
        ("spec_bound_width", s.spec_bound_width),
        ("legacy_nu", lp.nu),
    ] {
        table.push(vec![k.into(), num(Some(v))]);
    }
    let meta = json!({
        "tool": "qfbound",
        "version": env!("CARGO_PKG_VERSION"),
        "command": "matrix-info",
        "config": config(a),
        "summary": s,
    });
    let out = a.out.out.as_deref();
    emit(out, &table.render(), &meta)?;
    summary(out, table.len(), None);
    Ok(())
}

fn generate(a: &GenerateArgs) -> Result<()> {
    let spec = match a.kind {
        SpectrumKind::Expdecay => {
            let base = Spectrum::exponential_decay(a.n, a.rate, 0.0)?;
            let deltas = parse_deltas(a.deltas.as_deref(), a.n)?;
            Spectrum::new(base.etas().to_vec(), deltas)?
        }
    };
    let json_out = a
        .out
        .as_ref()
        .and_then(|p| p.extension())
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let body = if json_out {
        let mut s = serde_json::to_string_pretty(&json!({ "eta": spec.etas(), "delta": spec.deltas() }))
            .expect("spectrum serializes");
        s.push('\n');
        s
    } else {
        let mut buf = Vec::new();
        io::write_spectrum_csv(&spec, &mut buf)?;
        String::from_utf8(buf).expect("ascii output")
    };
    let meta = json!({
        "tool": "qfbound",
        "version": env!("CARGO_PKG_VERSION"),
        "command": "generate",
        "config": config(a),
        "sum_eta": spec.sum_eta(),
    });
    emit(a.out.as_deref(), &body, &meta)?;
    summary(a.out.as_deref(), spec.len(), None);
    Ok(())
}

fn parse_deltas(arg: Option<&str>, n: usize) -> Result<Vec<f64>> {
    let Some(s) = arg else {
        return Ok(vec![0.0; n]);
    };
    let vals = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Input(format!("invalid delta {p:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    match vals.len() {
        1 => Ok(vec![vals[0]; n]),
        k if k == n => Ok(vals),
        k => Err(CliError::Input(format!("--deltas has {k} values but n = {n}"))),
    }
}
