use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;

use super::*;
use crate::bounds::{BoundCurve, TheoremId};
use crate::problems::{AssumptionConstants, ConstantsOptions, LinearRegression, Provenance, Suboptimality};

/// `g(x, h) = |h - theta|^2 / 2 + x (h - theta)_0` with `x` drawn from
/// `{-noise, +noise}`; `noise = 0` makes the recursion deterministic.
#[derive(Debug)]
struct Toy {
    theta: Vec<f64>,
    noise: f64,
    blow_up: bool,
}

impl Problem for Toy {
    type Observation = f64;

    fn name(&self) -> &'static str {
        "toy"
    }
    fn dimension(&self) -> usize {
        self.theta.len()
    }
    fn new_observation(&self) -> f64 {
        0.0
    }
    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, obs: &mut f64) {
        *obs = if rng.gen::<bool>() { self.noise } else { -self.noise };
    }
    fn loss(&self, x: &f64, h: &[f64]) -> f64 {
        0.5 * dist_sq(h, &self.theta) + x * (h[0] - self.theta[0])
    }
    fn gradient_into(&self, x: &f64, h: &[f64], out: &mut [f64]) -> Result<()> {
        for ((o, a), b) in out.iter_mut().zip(h).zip(&self.theta) {
            *o = if self.blow_up { -1e300 * (a - b + 1.0) } else { a - b };
        }
        out[0] += x;
        Ok(())
    }
    fn optimum(&self) -> &[f64] {
        &self.theta
    }
    fn suboptimality<R: Rng + ?Sized>(&self, h: &[f64], _budget: usize, _rng: &mut R) -> Result<Suboptimality> {
        Ok(Suboptimality::exact(0.5 * dist_sq(h, &self.theta)))
    }
    fn hessian_at_optimum(&self) -> DMatrix<f64> {
        DMatrix::identity(self.theta.len(), self.theta.len())
    }
    fn assumption_constants(&self, _opts: &ConstantsOptions) -> Result<AssumptionConstants> {
        Ok(AssumptionConstants {
            c1: self.noise * self.noise,
            c2: 0.0,
            c1p: self.noise.powi(4),
            c2p: 0.0,
            l_grad_g: 1.0,
            lambda_min: 1.0,
            lambda_0: 1.0,
            r_lambda0: f64::INFINITY,
            c_lambda0: 0.0,
            l_sigma: Some(0.0),
            u0: 0.0,
            v0: 0.0,
            trace_term: Some(self.noise * self.noise),
            provenance: BTreeMap::new(),
        })
    }
}

fn opts(checkpoints: Vec<u64>, replicates: usize, threads: Option<usize>) -> RunOptions {
    RunOptions {
        checkpoints,
        replicates,
        master_seed: 42,
        subopt_budget: 1,
        threads,
    }
}

#[test]
fn replicate_seeds_are_distinct() {
    let mut seeds: Vec<u64> = (0..10_000).map(|i| replicate_seed(7, i)).collect();
    seeds.sort_unstable();
    seeds.dedup();
    assert_eq!(seeds.len(), 10_000);
    assert_ne!(replicate_seed(7, 0), replicate_seed(8, 0));
}

#[test]
fn checkpoint_grid() {
    let all = geometric_checkpoints(10_000_000);
    assert_eq!(all.len(), 29);
    assert_eq!(&all[..6], &[1, 2, 4, 6, 10, 18]);
    assert_eq!(*all.last().unwrap(), 10_000_000);
    assert!(all.windows(2).all(|w| w[0] < w[1]));
    let capped = geometric_checkpoints(1000);
    assert_eq!(*capped.last().unwrap(), 1000);
    assert_eq!(capped.len(), 13);
}

#[test]
fn noiseless_recursion_matches_closed_form() {
    let toy = Toy {
        theta: vec![1.0, -1.0],
        noise: 0.0,
        blow_up: false,
    };
    let schedule = StepSchedule::new(0.5, 0.75).unwrap();
    let theta0 = [3.0, 0.0];
    let curves = run_replicates(&toy, &schedule, &theta0, &opts(vec![1, 5, 50], 3, None)).unwrap();

    // theta_n - theta = prod_k (1 - gamma_k) (theta_0 - theta); the average
    // runs over theta_0, ..., theta_n.
    let mut e = [2.0, 1.0];
    let mut bar_sum = e;
    let mut expected = Vec::new();
    for n in 1..=50u64 {
        let g = schedule.step_size(n).unwrap();
        for v in e.iter_mut() {
            *v *= 1.0 - g;
        }
        bar_sum[0] += e[0];
        bar_sum[1] += e[1];
        if [1, 5, 50].contains(&n) {
            let bar = [bar_sum[0] / (n + 1) as f64, bar_sum[1] / (n + 1) as f64];
            expected.push((e[0] * e[0] + e[1] * e[1], bar[0] * bar[0] + bar[1] * bar[1]));
        }
    }
    for (i, (sgd, avg)) in expected.into_iter().enumerate() {
        assert!((curves.sgd[i].mean() - sgd).abs() <= 1e-12 * sgd.max(1e-300), "{i}");
        assert!((curves.avg[i].mean() - avg).abs() <= 1e-12 * avg.max(1e-300), "{i}");
        assert_eq!(curves.sgd[i].variance(), 0.0);
        let sub = 0.5 * sgd;
        assert!((curves.subopt[i].mean() - sub * sub).abs() <= 1e-12 * sub * sub);
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let p = LinearRegression::new(vec![0.5, -0.5], 1.0, 0.5, 1.0).unwrap();
    let schedule = StepSchedule::new(0.5, 0.75).unwrap();
    let cps = geometric_checkpoints(300);
    let one = run_replicates(&p, &schedule, &[0.0, 0.0], &opts(cps.clone(), 40, Some(1))).unwrap();
    let three = run_replicates(&p, &schedule, &[0.0, 0.0], &opts(cps.clone(), 40, Some(3))).unwrap();
    let global = run_replicates(&p, &schedule, &[0.0, 0.0], &opts(cps, 40, None)).unwrap();
    assert_eq!(one, three);
    assert_eq!(one, global);

    let mut other = opts(one.checkpoints.clone(), 40, Some(1));
    other.master_seed = 43;
    let different = run_replicates(&p, &schedule, &[0.0, 0.0], &other).unwrap();
    assert_ne!(one.sgd, different.sgd);
}

#[test]
fn divergence_is_reported() {
    let toy = Toy {
        theta: vec![0.0],
        noise: 0.0,
        blow_up: true,
    };
    let schedule = StepSchedule::new(1.0, 0.75).unwrap();
    let err = run_replicates(&toy, &schedule, &[0.0], &opts(vec![10], 5, None)).unwrap_err();
    match err {
        Error::Divergence {
            diverged, replicates, ..
        } => {
            assert_eq!((diverged, replicates), (5, 5));
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn invalid_runs_are_rejected() {
    let toy = Toy {
        theta: vec![0.0],
        noise: 1.0,
        blow_up: false,
    };
    let s = StepSchedule::new(1.0, 0.75).unwrap();
    assert!(run_replicates(&toy, &s, &[0.0], &opts(vec![10], 1, None)).is_err());
    assert!(run_replicates(&toy, &s, &[0.0, 1.0], &opts(vec![10], 5, None)).is_err());
    assert!(run_replicates(&toy, &s, &[0.0], &opts(vec![10, 10], 5, None)).is_err());
    assert!(run_replicates(&toy, &s, &[0.0], &opts(vec![], 5, None)).is_err());
    assert!(run_replicates(&toy, &s, &[0.0], &opts(vec![MAX_HORIZON + 1], 5, None)).is_err());
}

fn synthetic_curves(means: &[f64]) -> ErrorCurves {
    let stats = |m: f64| {
        // Two observations with mean m and standard error 0.1.
        let mut s = RunningStats::new();
        s.push(m - 0.1);
        s.push(m + 0.1);
        s
    };
    let v: Vec<RunningStats> = means.iter().map(|&m| stats(m)).collect();
    ErrorCurves {
        checkpoints: (1..=means.len() as u64).collect(),
        sgd: v.clone(),
        avg: v.clone(),
        subopt: v,
        replicates: 2,
        seed: 0,
        diverged: vec![],
    }
}

fn bound(theorem: TheoremId, values: Vec<f64>) -> BoundCurve {
    BoundCurve {
        theorem,
        quantity: theorem.quantity(),
        checkpoints: (1..=values.len() as u64).collect(),
        values,
        provenance: Provenance::Exact,
    }
}

#[test]
fn dominance_uses_upper_confidence_limit() {
    let curves = synthetic_curves(&[1.0, 1.0]);
    let z = 1.6448536269514722;
    // UCL = 1 + 0.1 z
    let ucl = 1.0 + 0.1 * z;
    let b = bound(TheoremId::IterateUnbounded, vec![ucl + 1e-9, ucl - 1e-9]);
    let r = dominance_check(&curves, &b, 0.95).unwrap();
    assert!((r.z - z).abs() < 1e-9);
    assert!(r.rows[0].pass);
    assert!(!r.rows[1].pass);
    assert!(!r.passed);
    assert_eq!(r.rows[0].empirical, 1.0);

    let root = bound(TheoremId::AveragedUnbounded, vec![ucl.sqrt() + 1e-9, 10.0]);
    let r = dominance_check(&curves, &root, 0.95).unwrap();
    assert!(r.passed);
    assert!((r.rows[0].upper_cl - ucl.sqrt()).abs() < 1e-12);
}

#[test]
fn dominance_rejects_mismatched_checkpoints() {
    let curves = synthetic_curves(&[1.0, 1.0]);
    let b = bound(TheoremId::IterateUnbounded, vec![5.0, 5.0, 5.0]);
    assert!(matches!(
        dominance_check(&curves, &b, 0.95),
        Err(Error::CheckpointMismatch)
    ));
    let b = bound(TheoremId::IterateUnbounded, vec![5.0, 5.0]);
    assert!(dominance_check(&curves, &b, 1.0).is_err());
}

#[test]
fn dominance_csv_has_header_and_rows() {
    let curves = synthetic_curves(&[1.0, 2.0]);
    let b = bound(TheoremId::SuboptimalityUnbounded, vec![5.0, 5.0]);
    let r = dominance_check(&curves, &b, 0.95).unwrap();
    let mut buf = Vec::new();
    r.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,empirical,upper_cl,bound,pass,theorem,quantity,confidence");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("1,"));

    let mut buf = Vec::new();
    curves.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("n,mean_sq_sgd,var_sq_sgd,mean_sq_avg,var_sq_avg,mean_sq_subopt,var_sq_subopt,R,seed\n"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn restriction_keeps_late_checkpoints() {
    let curves = synthetic_curves(&[1.0, 2.0, 3.0, 4.0]);
    let late = curves.restricted(3);
    assert_eq!(late.checkpoints, vec![3, 4]);
    assert_eq!(late.sgd[0].mean(), 3.0);
}

#[test]
fn rate_fit_recovers_power_laws() {
    let ns: Vec<u64> = geometric_checkpoints(100_000);
    let values: Vec<f64> = ns.iter().map(|&n| 3.0 * (n as f64).powf(-0.75)).collect();
    let fit = fit_rate(&ns, &values, 0..ns.len()).unwrap();
    assert!((fit.slope + 0.75).abs() < 1e-12);
    assert!(fit.stderr < 1e-10);
    assert!(fit_rate(&ns, &values, 0..3).is_err());
    let mut bad = values.clone();
    bad[2] = 0.0;
    assert!(fit_rate(&ns, &bad, 0..ns.len()).is_err());
}

#[test]
fn cramer_rao_ratio_scales_by_n() {
    let curves = synthetic_curves(&[1.0, 0.5]);
    let r = cramer_rao_ratio(&curves, Some(0.25), 2).unwrap();
    assert!((r - 4.0).abs() < 1e-15);
    assert!(cramer_rao_ratio(&curves, None, 2).is_err());
    assert!(cramer_rao_ratio(&curves, Some(1.0), 3).is_err());
}

#[test]
fn huge_bounds_and_zero_errors_pass() {
    let curves = synthetic_curves(&[1.0, 2.0, 3.0]);
    let b = bound(TheoremId::IterateUnbounded, vec![1e300; 3]);
    assert!(dominance_check(&curves, &b, 0.99).unwrap().passed);

    let mut zeros = curves.clone();
    for s in zeros.sgd.iter_mut() {
        *s = [0.0, 0.0].into_iter().collect();
    }
    let b = bound(TheoremId::IterateUnbounded, vec![0.0; 3]);
    assert!(dominance_check(&zeros, &b, 0.99).unwrap().passed);
}

#[test]
fn constant_curve_has_zero_slope() {
    let ns = geometric_checkpoints(10_000);
    let fit = fit_rate(&ns, &vec![2.5; ns.len()], 0..ns.len()).unwrap();
    assert!(fit.slope.abs() < 1e-14);
}

#[test]
fn cramer_rao_ratio_edge_cases() {
    let trace = 0.8;
    let n = 4u64;
    let mut curves = synthetic_curves(&[1.0, 1.0, 1.0, 1.0]);
    curves.avg[3] = [trace / n as f64; 2].into_iter().collect();
    assert!((cramer_rao_ratio(&curves, Some(trace), n).unwrap() - 1.0).abs() < 1e-15);
    curves.avg[3] = [0.0; 2].into_iter().collect();
    assert_eq!(cramer_rao_ratio(&curves, Some(trace), n).unwrap(), 0.0);
}

#[test]
fn noiseless_start_at_optimum_stays_there() {
    let p = LinearRegression::new(vec![0.3, -0.2, 1.0], 1.0, 0.0, 1.0).unwrap();
    let schedule = StepSchedule::new(0.5, 0.75).unwrap();
    let curves = run_replicates(&p, &schedule, &[0.3, -0.2, 1.0], &opts(geometric_checkpoints(1000), 4, None)).unwrap();
    for i in 0..curves.checkpoints.len() {
        assert_eq!(curves.sgd[i].mean(), 0.0);
        assert_eq!(curves.avg[i].mean(), 0.0);
        assert_eq!(curves.subopt[i].mean(), 0.0);
    }
}
