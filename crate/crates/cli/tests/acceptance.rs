//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Run with `cargo test -p qfbound-cli --test acceptance`.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use qfbound::bounds::matrix_tail_bound;
use qfbound::coeffs::coefficients;
use qfbound::oracle::{qq_from_sample, sample_qf_multi, McSample};
use qfbound::{
    full_spectrum, l1, l2, legacy_bound, lower_tail_bound, summarize, t_star, tilted_tail, upper_tail_bound,
    verify_lemma_conditions, FunctionSpec, LegacyParams, Method, QqRow, Spectrum, SymMatrix, Tail, Tilt,
};

const MC_SAMPLES: usize = 10_000_000;
const TILTED_SAMPLES: usize = 1_000_000;
const SEED: u64 = 20_240_601;
const TAIL_LEVELS: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];
const Z_GRID: [f64; 4] = [1.0, 2.0, 3.0, 4.0];
const RUNTIME_LIMIT_SECS: f64 = 300.0;

struct Report {
    failed: Vec<u32>,
}

impl Report {
    fn record(&mut self, id: u32, name: &str, pass: bool, detail: &str) {
        println!("[{}] criterion {id} — {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed.push(id);
        }
    }
}

struct Base {
    name: &'static str,
    spec: Spectrum,
}

fn suite() -> Vec<Base> {
    let eq = |n: usize, delta: f64| Spectrum::new(vec![1.0; n], vec![delta; n]).unwrap();
    vec![
        Base { name: "chi2(1)", spec: eq(1, 0.0) },
        Base { name: "chi2(2)", spec: eq(2, 0.0) },
        Base { name: "chi2(10)", spec: eq(10, 0.0) },
        Base { name: "noncentral(4, delta=0.5)", spec: eq(4, 0.5) },
        Base { name: "noncentral(4, delta=2)", spec: eq(4, 2.0) },
        Base {
            name: "expdecay(200, 0.1)",
            spec: Spectrum::exponential_decay(200, 0.1, 0.0).unwrap(),
        },
        Base {
            name: "mixed-sign",
            spec: Spectrum::new(
                vec![1.0, 0.6, -0.8, -0.3, 0.45, -0.15],
                vec![0.5, 0.0, 1.0, 0.25, 0.0, 2.0],
            )
            .unwrap(),
        },
    ]
}

fn powers() -> Vec<FunctionSpec> {
    vec![
        FunctionSpec::Identity,
        FunctionSpec::Power(2),
        FunctionSpec::Power(3),
        FunctionSpec::Power(4),
    ]
}

/// Output of the Monte Carlo sweep shared by criteria 1, 2, 6 and 7.
struct SweepCase {
    base: &'static str,
    f: String,
    level: f64,
    q: f64,
    bound: f64,
    legacy: Option<f64>,
    ci_lo: f64,
}

struct Sweep {
    cases: Vec<SweepCase>,
    qq: Vec<(&'static str, String, QqRow)>,
    elapsed: f64,
}

fn run_sweep() -> Sweep {
    let start = Instant::now();
    let mut cases = Vec::new();
    let mut qq = Vec::new();
    let fs = powers();
    for (b, base) in suite().into_iter().enumerate() {
        let seed = SEED + b as u64;
        let draws = sample_qf_multi(&base.spec, &fs, seed, MC_SAMPLES).unwrap();
        let legacy = LegacyParams::from_spectrum(&base.spec).unwrap();
        for (f, values) in fs.iter().zip(draws) {
            let sample = McSample::from_values(values, seed);
            for &level in &TAIL_LEVELS {
                let q = sample.upper_quantile(level);
                let est = if level >= 1e-3 {
                    sample.tail(q)
                } else {
                    tilted_tail(&base.spec, f, q, TILTED_SAMPLES, seed + 1000, Tilt::Auto).unwrap()
                };
                let bound = upper_tail_bound(&base.spec, f, q).unwrap().bound;
                cases.push(SweepCase {
                    base: base.name,
                    f: f.label(),
                    level,
                    q,
                    bound,
                    legacy: f.is_identity().then(|| legacy_bound(&legacy, q, Tail::Upper).bound),
                    ci_lo: est.ci_lo,
                });
            }
            for row in qq_from_sample(&sample, &base.spec, f, Method::Optimized, &Z_GRID).unwrap() {
                qq.push((base.name, f.label(), row));
            }
        }
    }
    Sweep {
        cases,
        qq,
        elapsed: start.elapsed().as_secs_f64(),
    }
}

fn criterion_1(r: &mut Report, sweep: &Sweep) {
    let mut checks = 0;
    let mut bad = Vec::new();
    for c in &sweep.cases {
        for (label, v) in [("optimized", Some(c.bound)), ("legacy", c.legacy)] {
            let Some(v) = v else { continue };
            checks += 1;
            if v.is_nan() || v < c.ci_lo {
                bad.push(format!(
                    "{} {} tail {:e}: {label} {v:e} < ci_lo {:e}",
                    c.base, c.f, c.level, c.ci_lo
                ));
            }
        }
    }
    let spectra = suite().len() * powers().len();
    let pass = bad.is_empty() && sweep.elapsed < RUNTIME_LIMIT_SECS;
    let mut detail = format!(
        "{}/{checks} bounds ≥ oracle ci_lo over {spectra} spectra × {} tail levels; sweep {:.1} s (limit {RUNTIME_LIMIT_SECS} s)",
        checks - bad.len(),
        TAIL_LEVELS.len(),
        sweep.elapsed
    );
    if let Some(first) = bad.first() {
        detail.push_str(&format!("; first failure: {first}"));
    }
    r.record(1, "validity against Monte Carlo", pass, &detail);
}

fn criterion_2(r: &mut Report, sweep: &Sweep) {
    let mut checks = 0;
    let mut worst = f64::NEG_INFINITY;
    for base in suite() {
        let s = &base.spec;
        let f = FunctionSpec::Identity;
        let m = s.moments(&f).unwrap();
        let sd = m.variance.sqrt();
        let lp = LegacyParams::from_spectrum(s).unwrap();
        let mut qs: Vec<f64> = (1..=300).map(|k| m.mean + sd * 0.1 * k as f64).collect();
        qs.extend(
            sweep
                .cases
                .iter()
                .filter(|c| c.base == base.name && c.legacy.is_some() && c.q > m.mean)
                .map(|c| c.q),
        );
        for q in qs {
            let new = upper_tail_bound(s, &f, q).unwrap().bound;
            let old = legacy_bound(&lp, q, Tail::Upper).bound;
            worst = worst.max(new - old);
            checks += 1;
        }
    }
    r.record(
        2,
        "dominance over the legacy bound",
        worst <= 1e-12,
        &format!("{checks} (spectrum, q > E[Q]) pairs; max(optimized − legacy) = {worst:e} (tolerance 1e-12)"),
    );
}

fn criterion_3(r: &mut Report) {
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    for &n in &[1usize, 2, 3, 5, 10, 50] {
        for &l in &[0.5, 1.0, 2.5] {
            let s = Spectrum::central(vec![l; n]).unwrap();
            for &k in &[1.5, 3.0, 10.0, 40.0] {
                let q = k * n as f64 * l;
                // minimizing -(n/2)log(1 - 2tL) - qt over t gives t = (1 - nL/q)/(2L)
                let nf = n as f64;
                let log_exact = 0.5 * nf * (q / (nf * l)).ln() + 0.5 * nf - q / (2.0 * l);
                let got = upper_tail_bound(&s, &FunctionSpec::Identity, q).unwrap();
                worst = worst.max(((got.bound - log_exact.exp()) / log_exact.exp()).abs());
                checks += 1;
            }
        }
    }
    // n = 2, L = 1: (e q / 2) e^{-q/2}
    let s = Spectrum::central(vec![1.0, 1.0]).unwrap();
    for &q in &[3.0, 10.0, 25.0] {
        let exact = std::f64::consts::E * q / 2.0 * (-q / 2.0).exp();
        let got = upper_tail_bound(&s, &FunctionSpec::Identity, q).unwrap().bound;
        worst = worst.max(((got - exact) / exact).abs());
        checks += 1;
    }
    let chernoff_ok = worst <= 1e-10;

    let lp = LegacyParams::new(8.0, 1.0, 2.0).unwrap();
    let from_spec = LegacyParams::from_spectrum(&s).unwrap();
    let mut legacy_worst: f64 = 0.0;
    for p in [lp, from_spec] {
        for (q, exact) in [(4.0, (-0.25f64).exp()), (10.0, (0.25f64 - 2.0).exp())] {
            let got = legacy_bound(&p, q, Tail::Upper).bound;
            legacy_worst = legacy_worst.max(((got - exact) / exact).abs());
        }
    }
    let legacy_ok = legacy_worst <= 1e-12;
    r.record(
        3,
        "closed-form agreement",
        chernoff_ok && legacy_ok,
        &format!(
            "chi-square Chernoff: {checks} cases, max rel err {worst:e} (tol 1e-10); legacy branches: max rel err {legacy_worst:e} (tol 1e-12)"
        ),
    );
}

fn ge(lhs: f64, rhs: f64) -> bool {
    lhs >= rhs - 1e-12
}

fn criterion_4(r: &mut Report) {
    let mut failures = Vec::new();

    // lemma conditions on 1000 × 1000 grids
    let mut lemma_points = 0;
    for f in powers() {
        for &l in &[0.5, 1.0, 2.0] {
            let rep = verify_lemma_conditions(&f, l, 1000).unwrap();
            lemma_points += rep.points_checked;
            if !rep.passed {
                failures.push(format!("lemma conditions for {} at L = {l}: {:?}", f.label(), rep.first_violation));
            }
        }
    }

    // the inequalities behind the identity and power specializations, z ∈ (0, 1/2)
    let zs: Vec<f64> = (1..=1000).map(|k| 0.5 * k as f64 / 1001.0).collect();
    let mut ineq_checks = 0;
    for &z in &zs {
        let w = 1.0 - 2.0 * z;
        let lg = -w.ln();
        let mut checks: Vec<(&str, f64, f64)> = vec![
            ("id L1 (1)", z / w + 2.0 * z, lg),
            ("id L1 (2)", lg + (1.0 + 2.0 * z).ln(), 4.0 * z),
            ("id L2 (1)", z / (w * w) + 2.0 * z, 2.0 * z / w),
            ("id L2 (2)", z / w + z / (1.0 + 2.0 * z), 2.0 * z),
        ];
        for p in 2..=4u32 {
            let pf = p as f64;
            checks.push(("pow L1 (1)", pf * z / w, lg));
            checks.push(("pow L2 (1)", pf * z / (w * w), 2.0 * z / w));
        }
        checks.push(("odd pow L1 (2)", lg + (1.0 + 2.0 * z).ln(), 0.0));
        checks.push(("odd pow L2 (2)", z / w + z / (1.0 + 2.0 * z), 2.0 * z));
        for (name, lhs, rhs) in checks {
            ineq_checks += 1;
            if !ge(lhs, rhs) {
                failures.push(format!("{name} fails at z = {z}: {lhs} < {rhs}"));
            }
        }
    }

    // majorant property on [-L, L] and tightness at x = L
    let mut majorant_checks = 0;
    let mut tight_worst: f64 = 0.0;
    for f in powers() {
        for &l in &[0.5, 1.0, 2.0] {
            let ts = t_star(&f, l).unwrap();
            for &frac in &[0.1, 0.5, 0.9, 0.99] {
                let t = frac * ts;
                let c = coefficients(&f, l, t).unwrap();
                for k in 0..1000 {
                    let x = -l + 2.0 * l * k as f64 / 999.0;
                    let u = t * f.eval(x).unwrap();
                    let (a1, a2) = (l1(u).unwrap(), l2(u).unwrap());
                    let m1 = c.alpha * x * x + c.gamma * x;
                    let m2 = c.beta * x * x + c.gamma * x;
                    majorant_checks += 2;
                    if a1 > m1 + 1e-12 || a2 > m2 + 1e-12 {
                        failures.push(format!(
                            "majorant fails for {} L = {l} t = {t} x = {x}: ({a1}, {a2}) vs ({m1}, {m2})",
                            f.label()
                        ));
                    }
                }
                let u = t * f.eval(l).unwrap();
                tight_worst = tight_worst
                    .max((c.alpha * l * l + c.gamma * l - l1(u).unwrap()).abs())
                    .max((c.beta * l * l + c.gamma * l - l2(u).unwrap()).abs());
            }
        }
    }
    if tight_worst > 1e-12 {
        failures.push(format!("tightness at L off by {tight_worst:e}"));
    }

    let mut detail = format!(
        "{lemma_points} lemma grid points, {ineq_checks} z-inequality checks, {majorant_checks} majorant checks; max tightness gap {tight_worst:e} (tol 1e-12)"
    );
    if let Some(first) = failures.first() {
        detail.push_str(&format!("; {} failures, first: {first}", failures.len()));
    }
    r.record(4, "admissibility and majorant grids", failures.is_empty(), &detail);
}

fn random_problem(rng: &mut ChaCha8Rng) -> (SymMatrix, Vec<f64>) {
    let n = rng.random_range(2..=100usize);
    let raw: Vec<f64> = (0..n * n).map(|_| rng.sample(StandardNormal)).collect();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            data[i * n + j] = 0.5 * (raw[i * n + j] + raw[j * n + i]);
        }
    }
    let mu = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    (SymMatrix::new(n, data).unwrap(), mu)
}

fn criterion_5(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    for _ in 0..50 {
        let (m, mu) = random_problem(&mut rng);
        let summary = summarize(&m, &mu).unwrap();
        let spec = full_spectrum(&m, &mu).unwrap();
        for f in [FunctionSpec::Identity, FunctionSpec::Power(2), FunctionSpec::Power(3)] {
            let mom = spec.moments(&f).unwrap();
            let sd = mom.variance.sqrt();
            for &k in &[0.5, 2.0, 5.0, 10.0] {
                for (tail, q) in [(Tail::Upper, mom.mean + k * sd), (Tail::Lower, mom.mean - k * sd)] {
                    let via_trace = matrix_tail_bound(&summary, &f, q, tail).unwrap().bound;
                    let via_eigs = match tail {
                        Tail::Upper => upper_tail_bound(&spec, &f, q),
                        Tail::Lower => lower_tail_bound(&spec, &f, q),
                    }
                    .unwrap()
                    .bound;
                    worst = worst.max(((via_trace - via_eigs) / via_eigs).abs());
                    checks += 1;
                }
            }
        }
    }
    r.record(
        5,
        "trace path matches eigendecomposition",
        worst <= 1e-8,
        &format!("50 random matrices (n ≤ 100), {checks} bounds; max relative difference {worst:e} (tol 1e-8)"),
    );
}

fn criterion_6(r: &mut Report, sweep: &Sweep) {
    let c = sweep
        .cases
        .iter()
        .find(|c| c.base == "expdecay(200, 0.1)" && c.f == "identity" && c.level == 1e-4)
        .expect("sweep covers the default spectrum");
    r.record(
        6,
        "order of magnitude on the default spectrum",
        (1e-3..=1e-1).contains(&c.bound),
        &format!("q at true tail 1e-4 = {:.6}; optimized bound {:e} (required in [1e-3, 1e-1])", c.q, c.bound),
    );
}

fn criterion_7(r: &mut Report, sweep: &Sweep) {
    let n = MC_SAMPLES as f64;
    let mut bad = Vec::new();
    let mut emitted = 0;
    for (base, f, row) in &sweep.qq {
        if !row.resolved {
            continue;
        }
        emitted += 1;
        let p = 10f64.powf(-row.z);
        let se_rel = ((1.0 - p) / (n * p)).sqrt();
        let floor = (1.0 - 4.0 * se_rel).log10();
        if row.z_minus_omega < floor {
            bad.push(format!("{base} {f} z = {}: z − Ω = {} < {floor}", row.z, row.z_minus_omega));
        }
    }
    let gap = |label: &str| {
        sweep
            .qq
            .iter()
            .find(|(b, f, row)| *b == "expdecay(200, 0.1)" && f == label && row.z == 4.0)
            .map(|(_, _, row)| row.z_minus_omega)
            .expect("z = 4 row on the default spectrum")
    };
    let (g1, g3) = (gap("identity"), gap("power:3"));
    let pass = bad.is_empty() && emitted == sweep.qq.len() && g3 > g1;
    let mut detail = format!(
        "{}/{emitted} rows above the 4-se noise floor; default spectrum z = 4: z − Ω = {g1:.4} (p = 1) vs {g3:.4} (p = 3)",
        emitted - bad.len()
    );
    if let Some(first) = bad.first() {
        detail.push_str(&format!("; first failure: {first}"));
    }
    r.record(7, "Q–Q sign and power ordering", pass, &detail);
}

fn qfbound(dir: &Path, threads: usize, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_qfbound"))
        .current_dir(dir)
        .arg("--threads")
        .arg(threads.to_string())
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?} exited with {}: {}", out.status, String::from_utf8_lossy(&out.stderr)))
    }
}

fn criterion_8(r: &mut Report) {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("chi2.csv"), "eta,delta\n1,0\n1,0\n").unwrap();
    fs::write(
        d.join("mixed.csv"),
        "eta,delta\n1.0,0.5\n0.6,0\n-0.8,1\n-0.3,0.25\n0.45,0\n-0.15,2\n",
    )
    .unwrap();
    let mut mtx = String::from("%%MatrixMarket matrix coordinate real symmetric\n6 6 11\n");
    for i in 1..=6 {
        mtx.push_str(&format!("{i} {i} {}\n", 1.0 / i as f64));
        if i > 1 {
            mtx.push_str(&format!("{i} {} -0.25\n", i - 1));
        }
    }
    fs::write(d.join("m.mtx"), mtx).unwrap();
    fs::write(d.join("mu.csv"), "mu\n0.5\n-1\n0\n0.25\n1\n-0.5\n").unwrap();
    qfbound(d, 1, &["generate", "--n", "200", "--rate", "0.1", "--out", "exp.csv"]).unwrap();

    let commands: Vec<Vec<&str>> = vec![
        vec!["generate", "--n", "50", "--rate", "0.2", "--deltas", "0.3"],
        vec!["bound", "--spectrum", "exp.csv", "--q-grid", "10:40:7"],
        vec!["bound", "--spectrum", "mixed.csv", "--f", "power:3", "--tail", "lower", "--q-grid", "-8:-1:5"],
        vec!["legacy", "--spectrum", "chi2.csv", "--q-grid", "1:30:6"],
        vec!["compare", "--spectrum", "chi2.csv", "--q-grid", "3:30:10"],
        vec!["compare", "--spectrum", "exp.csv", "--f", "power:2", "--q-grid", "1:100:5:log"],
        vec!["oracle", "--spectrum", "mixed.csv", "--q-grid", "2:8:4", "--samples", "300000", "--seed", "7"],
        vec!["oracle", "--spectrum", "chi2.csv", "--q", "40", "--tilt", "auto", "--samples", "200000", "--seed", "7"],
        vec!["qq", "--spectrum", "exp.csv", "--z-grid", "1,2,3", "--samples", "200000", "--seed", "3"],
        vec!["qq", "--spectrum", "chi2.csv", "--z-grid", "2,5", "--tilt", "auto", "--samples", "100000", "--seed", "3"],
        vec!["matrix-info", "--matrix", "m.mtx", "--mu", "mu.csv"],
        vec!["compare", "--matrix", "m.mtx", "--mu", "mu.csv", "--q-grid", "1:20:5"],
        vec!["bound", "--matrix", "m.mtx", "--mu", "mu.csv", "--exact-spectrum", "--q-grid", "1:20:5"],
    ];
    // every run gets its own directory so that recorded paths coincide
    let inputs = ["chi2.csv", "mixed.csv", "m.mtx", "mu.csv", "exp.csv"];
    let mut run_dirs = Vec::new();
    for threads in [1usize, 4, 8] {
        for rep in 0..2 {
            let sub = d.join(format!("run_{threads}_{rep}"));
            fs::create_dir(&sub).unwrap();
            for f in inputs {
                fs::copy(d.join(f), sub.join(f)).unwrap();
            }
            run_dirs.push((threads, sub));
        }
    }
    let mut mismatches = Vec::new();
    let mut runs = 0;
    for (k, cmd) in commands.iter().enumerate() {
        let mut outputs = Vec::new();
        let name = format!("out_{k}.csv");
        for (threads, sub) in &run_dirs {
            let mut args = cmd.clone();
            args.extend(["--out", name.as_str()]);
            if let Err(e) = qfbound(sub, *threads, &args) {
                mismatches.push(e);
                continue;
            }
            runs += 1;
            outputs.push((
                fs::read(sub.join(&name)).unwrap(),
                fs::read(sub.join(format!("{name}.meta.json"))).unwrap(),
            ));
        }
        if outputs.windows(2).any(|w| w[0].0 != w[1].0) {
            mismatches.push(format!("CSV differs across runs for {cmd:?}"));
        }
        if outputs.windows(2).any(|w| w[0].1 != w[1].1) {
            mismatches.push(format!("metadata differs across runs for {cmd:?}"));
        }
    }
    let mut detail = format!(
        "{} commands × threads {{1, 4, 8}} × 2 repeats = {runs} runs",
        commands.len()
    );
    if let Some(first) = mismatches.first() {
        detail.push_str(&format!("; {} problems, first: {first}", mismatches.len()));
    } else {
        detail.push_str("; all outputs byte-identical");
    }
    r.record(8, "determinism across thread counts", mismatches.is_empty(), &detail);
}

fn main() {
    // `cargo test` passes harness flags such as `--nocapture`; only a listing
    // request needs special handling.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let mut report = Report { failed: Vec::new() };
    println!("running acceptance suite");
    let sweep = run_sweep();
    criterion_1(&mut report, &sweep);
    criterion_2(&mut report, &sweep);
    criterion_3(&mut report);
    criterion_4(&mut report);
    criterion_5(&mut report);
    criterion_6(&mut report, &sweep);
    criterion_7(&mut report, &sweep);
    criterion_8(&mut report);
    if report.failed.is_empty() {
        println!("acceptance: all 8 criteria passed");
    } else {
        println!("acceptance: failed criteria {:?}", report.failed);
        std::process::exit(1);
    }
}
