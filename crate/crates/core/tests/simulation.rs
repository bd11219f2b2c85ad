//! Statistical properties of the Monte-Carlo runner.

use avgsgd_core::verify::{geometric_checkpoints, run_replicates};
use avgsgd_core::{LinearRegression, RunOptions, RunningStats, StepSchedule};

fn linreg_1d() -> (LinearRegression, StepSchedule) {
    (
        LinearRegression::new(vec![0.5], 1.0, 1.0, 2.0).unwrap(),
        StepSchedule::new(1.0, 0.75).unwrap(),
    )
}

fn options(replicates: usize, horizon: u64, seed: u64) -> RunOptions {
    RunOptions {
        checkpoints: geometric_checkpoints(horizon),
        replicates,
        master_seed: seed,
        subopt_budget: 100,
        threads: None,
    }
}

/// Mean and standard error of the replicates in `full` but not in `first`,
/// from the pooled moments.
fn complement(full: &RunningStats, first: &RunningStats) -> (f64, f64) {
    let (n, n1) = (full.count() as f64, first.count() as f64);
    let n2 = n - n1;
    let mean2 = (n * full.mean() - n1 * first.mean()) / n2;
    let m2_full = full.variance() * (n - 1.0);
    let m2_first = first.variance() * (n1 - 1.0);
    let delta = mean2 - first.mean();
    let m2_second = m2_full - m2_first - delta * delta * n1 * n2 / n;
    (mean2, (m2_second / (n2 - 1.0) / n2).sqrt())
}

#[test]
fn master_seeds_agree_within_sampling_error() {
    let (problem, schedule) = linreg_1d();
    let horizon = 10_000;
    let a = run_replicates(&problem, &schedule, &[1.5], &options(10_000, horizon, 1)).unwrap();
    let b = run_replicates(&problem, &schedule, &[1.5], &options(10_000, horizon, 2)).unwrap();
    let i = a.index_of(horizon).unwrap();
    let (x, y) = (a.avg[i], b.avg[i]);
    let combined = x.stderr().hypot(y.stderr());
    assert!(
        (x.mean() - y.mean()).abs() <= 4.0 * combined,
        "{} vs {} (combined stderr {combined})",
        x.mean(),
        y.mean()
    );
    assert_ne!(x.mean(), y.mean());
}

#[test]
fn replicate_halves_are_exchangeable() {
    let (problem, schedule) = linreg_1d();
    let horizon = 10_000;
    let full = run_replicates(&problem, &schedule, &[1.5], &options(4_000, horizon, 7)).unwrap();
    let first = run_replicates(&problem, &schedule, &[1.5], &options(2_000, horizon, 7)).unwrap();
    for (k, &n) in full.checkpoints.iter().enumerate() {
        for (f, h) in [(&full.sgd[k], &first.sgd[k]), (&full.avg[k], &first.avg[k])] {
            let (mean2, se2) = complement(f, h);
            let combined = h.stderr().hypot(se2);
            assert!(
                (h.mean() - mean2).abs() <= 4.0 * combined,
                "n = {n}: halves {} vs {mean2} (combined stderr {combined})",
                h.mean()
            );
        }
    }
}

#[test]
fn complement_recovers_the_second_half() {
    let xs: Vec<f64> = (0..10).map(|i| (i * i) as f64 * 0.3 - 1.0).collect();
    let full: RunningStats = xs.iter().copied().collect();
    let first: RunningStats = xs[..4].iter().copied().collect();
    let second: RunningStats = xs[4..].iter().copied().collect();
    let (m, se) = complement(&full, &first);
    assert!((m - second.mean()).abs() < 1e-12);
    assert!((se - second.stderr()).abs() < 1e-12);
}

#[test]
fn averaging_beats_the_last_iterate_late_in_the_run() {
    let problem = LinearRegression::new(vec![1.0, -1.0, 0.5], 1.0, 1.0, 4.0).unwrap();
    // The acceptance fixture.
    let schedule = StepSchedule::new(0.6, 0.75).unwrap();
    let curves = run_replicates(&problem, &schedule, &[3.0, -1.0, 0.5], &options(1_000, 100_000, 3)).unwrap();
    for (k, &n) in curves.checkpoints.iter().enumerate().filter(|(_, n)| **n >= 1_000) {
        let (avg, sgd) = (curves.avg[k].mean(), curves.sgd[k].mean());
        assert!(avg <= sgd, "n = {n}: averaged {avg} > last iterate {sgd}");
    }
}
