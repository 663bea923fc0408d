use approx::assert_relative_eq;
use proptest::prelude::*;

use qfbound::io::{parse_spectrum_csv, parse_tabulated_csv, write_spectrum_csv};
use qfbound::oracle::McSample;
use qfbound::{
    compare, exact_tail_equal_eigs, lower_tail_bound, mc_tail, upper_tail_bound, FunctionSpec, Spectrum,
    TabulatedFn,
};

fn identity_table(lo: f64, hi: f64, n: usize) -> FunctionSpec {
    let pts: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            (x, x)
        })
        .collect();
    FunctionSpec::Tabulated(TabulatedFn::new(&pts, Some(1.0)).unwrap())
}

#[test]
fn tabulated_identity_matches_builtin() {
    let s = Spectrum::new(vec![1.5, -0.5, 0.25], vec![0.3, 1.0, 0.0]).unwrap();
    let tab = identity_table(-2.0, 2.0, 41);
    for &q in &[3.0, 8.0, 20.0] {
        let a = upper_tail_bound(&s, &FunctionSpec::Identity, q).unwrap();
        let b = upper_tail_bound(&s, &tab, q).unwrap();
        assert_relative_eq!(a.log_bound, b.log_bound, max_relative = 1e-9);
    }
    for &q in &[-3.0, -8.0] {
        let a = lower_tail_bound(&s, &FunctionSpec::Identity, q).unwrap();
        let b = lower_tail_bound(&s, &tab, q).unwrap();
        assert_relative_eq!(a.log_bound, b.log_bound, max_relative = 1e-9);
    }
}

#[test]
fn file_round_trip_preserves_bounds() {
    let s = Spectrum::exponential_decay(50, 0.2, 0.4).unwrap();
    let mut buf = Vec::new();
    write_spectrum_csv(&s, &mut buf).unwrap();
    let back = parse_spectrum_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
    let f = FunctionSpec::Identity;
    assert_eq!(s.scale_params(&f).unwrap(), back.scale_params(&f).unwrap());
    assert_eq!(
        upper_tail_bound(&s, &f, 12.0).unwrap(),
        upper_tail_bound(&back, &f, 12.0).unwrap()
    );
}

#[test]
fn tabulated_file_with_estimated_slope() {
    let t = parse_tabulated_csv("x,fx\n-2,-2\n-1,-1\n0,0\n1,1\n2,2\n", None).unwrap();
    assert!(t.fprime0_estimated());
    assert_relative_eq!(t.fprime0(), 1.0, max_relative = 1e-6);
}

#[test]
fn lower_tail_against_monte_carlo() {
    let s = Spectrum::new(vec![1.0, -1.5, 0.5, -0.25], vec![0.0, 0.5, 1.0, 0.0]).unwrap();
    for f in [FunctionSpec::Identity, FunctionSpec::Power(3)] {
        let sample = McSample::draw(&s, &f, 99, 2_000_000).unwrap();
        let mean = s.moments(&f).unwrap().mean;
        for &shift in &[2.0, 5.0, 8.0] {
            let q = mean - shift;
            let est = sample.lower_tail(q);
            let b = lower_tail_bound(&s, &f, q).unwrap();
            assert!(b.bound >= est.ci_lo, "{f:?} q={q}: {b:?} vs {est:?}");
        }
    }
}

#[test]
fn comparison_against_monte_carlo() {
    let s = Spectrum::exponential_decay(40, 0.15, 0.5).unwrap();
    let mean = s.moments(&FunctionSpec::Identity).unwrap().mean;
    let qs: Vec<f64> = (1..=5).map(|k| mean + 3.0 * k as f64).collect();
    let rows = compare(&s, &FunctionSpec::Identity, &qs).unwrap();
    for r in rows {
        let est = mc_tail(&s, &FunctionSpec::Identity, r.q, 500_000, 5).unwrap();
        let legacy = r.legacy.unwrap();
        assert!(r.optimized.bound >= est.ci_lo);
        assert!(legacy.bound >= r.optimized.bound);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bound_dominates_exact_tail(
        n in 1usize..20,
        eta in 0.1f64..3.0,
        delta in 0.0f64..2.0,
        k in 1.05f64..15.0,
    ) {
        let s = Spectrum::new(vec![eta; n], vec![delta; n]).unwrap();
        let mean = s.moments(&FunctionSpec::Identity).unwrap().mean;
        let q = k * mean;
        let exact = exact_tail_equal_eigs(n, eta, delta, q).unwrap();
        let b = upper_tail_bound(&s, &FunctionSpec::Identity, q).unwrap();
        prop_assert!(b.bound >= exact * (1.0 - 1e-12), "bound {} < exact {}", b.bound, exact);
    }

    #[test]
    fn lower_bound_dominates_exact_tail(
        n in 1usize..20,
        eta in 0.1f64..3.0,
        delta in 0.0f64..2.0,
        k in 1.05f64..15.0,
    ) {
        // P(Q < q) with negative eigenvalues is P(-Q > -q), an upper tail of η·χ'²
        let s = Spectrum::new(vec![-eta; n], vec![delta; n]).unwrap();
        let mean = s.moments(&FunctionSpec::Identity).unwrap().mean;
        let q = k * mean;
        let exact = exact_tail_equal_eigs(n, eta, delta, -q).unwrap();
        let b = lower_tail_bound(&s, &FunctionSpec::Identity, q).unwrap();
        prop_assert!(b.bound >= exact * (1.0 - 1e-12), "bound {} < exact {}", b.bound, exact);
    }

    #[test]
    fn power_bound_dominates_exact_tail(
        n in 1usize..10,
        eta in 0.2f64..1.5,
        p in 2u32..5,
        k in 1.05f64..10.0,
    ) {
        let s = Spectrum::central(vec![eta; n]).unwrap();
        let f = FunctionSpec::Power(p);
        let w = eta.powi(p as i32);
        let q = k * n as f64 * w;
        let exact = exact_tail_equal_eigs(n, w, 0.0, q).unwrap();
        let b = upper_tail_bound(&s, &f, q).unwrap();
        prop_assert!(b.bound >= exact * (1.0 - 1e-12));
    }
}
