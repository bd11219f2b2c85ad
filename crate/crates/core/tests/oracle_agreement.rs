//! Every bound evaluator against the independent arbitrary-precision
//! re-implementation in `avgsgd-oracle`.

use std::collections::BTreeMap;

use avgsgd_core::bounds::{derive_constants, evaluate, series_upper_bound, DerivedConstants, TheoremId};
use avgsgd_core::{AssumptionConstants, StepSchedule};
use avgsgd_oracle::{series, Hp, Inputs, Oracle};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

fn to_core(i: &Inputs) -> (AssumptionConstants, StepSchedule) {
    let k = AssumptionConstants {
        c1: i.c1,
        c2: i.c2,
        c1p: i.c1p,
        c2p: i.c2p,
        l_grad_g: i.l_grad,
        lambda_min: i.lambda_min,
        lambda_0: i.lambda0,
        r_lambda0: i.r_lambda0,
        c_lambda0: i.c_lambda0,
        l_sigma: Some(i.l_sigma),
        u0: i.u0,
        v0: i.v0,
        trace_term: Some(i.trace),
        provenance: BTreeMap::new(),
    };
    (k, StepSchedule::new(i.c_gamma, i.alpha).unwrap())
}

fn oracle_value(o: &Oracle, t: TheoremId, n: u64) -> Hp {
    match t {
        TheoremId::SuboptimalityUnbounded => o.lemma1(n),
        TheoremId::IterateUnbounded => o.theorem1(n),
        TheoremId::SuboptimalityBounded => o.lemma2(n),
        TheoremId::IterateBounded => o.theorem2(n),
        TheoremId::AveragedUnbounded => o.theorem3(n),
        TheoremId::AveragedUnboundedLipschitz => o.theorem4(n),
        TheoremId::AveragedBounded => o.theorem5(n),
        TheoremId::AveragedBoundedLipschitz => o.theorem6(n),
    }
}

fn assert_close(what: &str, reference: &Hp, got: f64, tol: f64) {
    let rel = reference.rel_diff(got);
    assert!(rel <= tol, "{what}: oracle {} vs core {got} (rel {rel:e})", reference.to_f64());
}

fn check_derived(o: &Oracle, d: &DerivedConstants, tol: f64) {
    assert_close("a0", &o.a0(), d.a0, tol);
    assert_close("a1", &o.a1(), d.a1, tol);
    assert_close("a2", &o.a2(), d.a2, tol);
    assert_close("sigma2", &o.sigma2(), d.sigma2, tol);
    assert_close("L_delta", &o.l_delta(), d.l_delta, tol);
    assert_close("c1", &o.c1_const(), d.c1, tol);
    assert_close("A", &o.big_a(), d.big_a, tol);
    assert_close("c_n0p", &o.c_n0p(), d.c_n0p, tol);
    assert_close("M0", &o.m0(), d.m0, tol);
    assert_close("A_prime", &o.a_prime(), d.a_prime, tol);
    assert_eq!(o.n0p, d.n0p, "n0p");
    assert_eq!(o.n1p, d.n1p, "n1p");
    let names = ["A_inf", "B_inf", "D_inf", "A_inf_p", "B_inf_p", "D_inf_p"];
    let core = [d.a_inf, d.b_inf, d.d_inf, d.a_inf_p, d.b_inf_p, d.d_inf_p];
    for ((name, r), v) in names.iter().zip(o.series_constants().iter()).zip(core) {
        assert_close(name, r, v, 1e-10);
    }
}

fn check_theorems(o: &Oracle, d: &DerivedConstants, ns: &[u64], tol_sq: f64, tol_root: f64) {
    for t in TheoremId::ALL {
        let Ok(_) = evaluate(t, d, 1) else { continue };
        for &n in ns {
            let core = evaluate(t, d, n).unwrap().total();
            let tol = if t.quantity().is_root() { tol_root } else { tol_sq };
            assert_close(&format!("{t} at n = {n}"), &oracle_value(o, t, n), core, tol);
        }
    }
}

fn fixed_unbounded() -> Inputs {
    Inputs {
        c1: 1.0,
        c2: 0.5,
        c1p: 2.0,
        c2p: 1.5,
        l_grad: 2.0,
        lambda_min: 0.8,
        lambda0: 0.6,
        r_lambda0: 1.5,
        c_lambda0: 0.3,
        l_sigma: 0.7,
        u0: 0.4,
        v0: 1.2,
        trace: 1.1,
        c_gamma: 0.5,
        alpha: 0.75,
    }
}

#[test]
fn lemma1_fixed_instance() {
    // a0 = 1, a1 = 0.25, a2 = 0, sigma^2 = 25/12, u0 = 1, c = 1, alpha = 3/4.
    let i = Inputs {
        c1: 1.0,
        c2: 0.0,
        c1p: 0.0,
        c2p: 0.0,
        l_grad: 1.0,
        lambda_min: 1.0,
        lambda0: 1.0,
        r_lambda0: 1.0,
        c_lambda0: 0.0,
        l_sigma: 0.0,
        u0: 1.0,
        v0: 0.0,
        trace: 0.0,
        c_gamma: 1.0,
        alpha: 0.75,
    };
    let (k, s) = to_core(&i);
    let d = derive_constants(&k, &s).unwrap();
    assert_eq!((d.a0, d.a1, d.a2), (1.0, 0.25, 0.0));
    let o = Oracle::new(i);
    assert_close("lemma1(100)", &o.lemma1(100), evaluate(TheoremId::SuboptimalityUnbounded, &d, 100).unwrap().total(), 1e-12);
}

#[test]
fn squared_bounds_match_at_fixed_instances() {
    let unbounded = fixed_unbounded();
    let bounded = Inputs {
        c2: 0.0,
        c2p: 0.0,
        ..unbounded
    };
    for i in [unbounded, bounded] {
        let (k, s) = to_core(&i);
        let d = derive_constants(&k, &s).unwrap();
        let o = Oracle::new(i);
        check_derived(&o, &d, 1e-12);
        check_theorems(&o, &d, &[1, 2, 10, 1000, 1_000_000], 1e-12, 1e-10);
    }
}

#[test]
fn random_draws_match() {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(0x0a11ce);
    let (mut checked, mut draw) = (0, 0);
    while checked < 50 {
        draw += 1;
        let bounded = draw % 2 == 0;
        let l: f64 = rng.gen_range(1.0..2.0);
        let i = Inputs {
            c1: rng.gen_range(0.1..2.0),
            c2: if bounded { 0.0 } else { rng.gen_range(0.0..1.0) },
            c1p: rng.gen_range(0.0..2.0),
            c2p: if bounded { 0.0 } else { rng.gen_range(0.0..2.0) },
            l_grad: l,
            lambda_min: l * rng.gen_range(0.3..1.0),
            lambda0: l * rng.gen_range(0.3..1.0),
            r_lambda0: if draw % 5 == 0 {
                f64::INFINITY
            } else {
                rng.gen_range(0.5..3.0)
            },
            c_lambda0: rng.gen_range(0.0..1.0),
            l_sigma: rng.gen_range(0.0..1.0),
            u0: rng.gen_range(0.0..2.0),
            v0: rng.gen_range(0.0..2.0),
            trace: rng.gen_range(0.1..2.0),
            c_gamma: rng.gen_range(0.3..1.5),
            alpha: rng.gen_range(0.55..0.9),
        };
        let (k, s) = to_core(&i);
        let d = derive_constants(&k, &s).unwrap();
        if d.fields().iter().any(|(_, v)| !v.is_finite()) {
            continue;
        }
        let o = Oracle::new(i);
        let n = rng.gen_range(1..100_000);
        check_derived(&o, &d, 1e-10);
        check_theorems(&o, &d, &[n], 1e-10, 1e-10);
        checked += 1;
    }
    assert!(draw < 200, "too many draws had non-finite constants");
}

#[test]
fn series_matches_oracle_and_brute_force() {
    for (rate, alpha) in [(1.0, 0.75), (0.1, 0.6), (3.0, 0.9), (0.02, 0.55)] {
        let core = series_upper_bound(rate, alpha, 1.0).unwrap();
        let reference = series(rate, 1.0 - alpha);
        assert!(core >= reference.to_f64(), "not an upper bound at ({rate}, {alpha})");
        assert_close(&format!("series({rate}, {alpha})"), &reference, core, 1e-10);
    }

    // Ten million direct terms never exceed the certified value.
    let mut direct = avgsgd_core::stats::CompensatedSum::default();
    for n in 0..10_000_000u64 {
        direct.add((-(n as f64).powf(0.25)).exp());
    }
    let certified = series_upper_bound(1.0, 0.75, 1.0).unwrap();
    assert!(certified >= direct.value());
    assert!((certified - direct.value()) / direct.value() <= 1e-6);
}
