//! Monte-Carlo harness: replicated SGD and averaged-SGD trajectories, pooled
//! error statistics at checkpoints, and statistical comparison with the bound
//! curves.

mod dominance;
mod rates;

use std::io::Write;

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;

use crate::algorithms::{EstimatorState, StepSchedule};
use crate::error::{Error, Result};
use crate::problems::Problem;
use crate::report::{csv_writer, format_float};
use crate::stats::{dist_sq, RunningStats};

pub use dominance::{dominance_check, DominanceReport, DominanceRow};
pub use rates::{cramer_rao_ratio, fit_rate, RateFit};

/// Largest checkpoint a single replicate may run to.
pub const MAX_HORIZON: u64 = 10_000_000;

/// Fraction of replicates allowed to diverge before a run fails.
pub const DIVERGENCE_TOLERANCE: f64 = 0.01;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;
/// Separates the suboptimality-estimation stream from the trajectory stream.
const SUBOPT_STREAM: u64 = 0xd1b5_4a32_d192_ed03;

/// SplitMix64 finalizer; a bijection on `u64`.
fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of replicate `i` under `master`. Distinct replicates always get
/// distinct seeds: `i -> master + i * golden` is injective modulo 2^64 (the
/// multiplier is odd) and the finalizer is a bijection.
pub fn replicate_seed(master: u64, i: u64) -> u64 {
    splitmix64(master.wrapping_add(i.wrapping_mul(GOLDEN_GAMMA)))
}

/// `{ceil(10^(k/4)) : k = 0..=28}` deduplicated and capped at `horizon`.
pub fn geometric_checkpoints(horizon: u64) -> Vec<u64> {
    let mut out: Vec<u64> = (0..=28)
        .map(|k| {
            let v = 10f64.powf(k as f64 / 4.0);
            // Exact powers of ten must not be bumped up by rounding noise.
            if (v - v.round()).abs() < 1e-9 * v {
                v.round() as u64
            } else {
                v.ceil() as u64
            }
        })
        .filter(|&n| n <= horizon)
        .collect();
    out.dedup();
    out
}

/// Knobs for [`run_replicates`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub checkpoints: Vec<u64>,
    pub replicates: usize,
    pub master_seed: u64,
    /// Monte-Carlo budget for problems without an exact suboptimality.
    pub subopt_budget: usize,
    /// Worker threads; `None` uses the global pool. Results do not depend
    /// on this value.
    pub threads: Option<usize>,
}

/// Pooled squared errors at each checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCurves {
    pub checkpoints: Vec<u64>,
    /// `|theta_n - theta|^2`
    pub sgd: Vec<RunningStats>,
    /// `|bar theta_n - theta|^2`
    pub avg: Vec<RunningStats>,
    /// `(G(theta_n) - G(theta))^2`
    pub subopt: Vec<RunningStats>,
    pub replicates: usize,
    pub seed: u64,
    /// Indices of replicates that produced a non-finite iterate.
    pub diverged: Vec<usize>,
}

impl ErrorCurves {
    /// Keeps only checkpoints `>= min_checkpoint`.
    pub fn restricted(&self, min_checkpoint: u64) -> ErrorCurves {
        let keep: Vec<usize> = (0..self.checkpoints.len())
            .filter(|&i| self.checkpoints[i] >= min_checkpoint)
            .collect();
        let pick = |v: &[RunningStats]| keep.iter().map(|&i| v[i]).collect::<Vec<_>>();
        ErrorCurves {
            checkpoints: keep.iter().map(|&i| self.checkpoints[i]).collect(),
            sgd: pick(&self.sgd),
            avg: pick(&self.avg),
            subopt: pick(&self.subopt),
            replicates: self.replicates,
            seed: self.seed,
            diverged: self.diverged.clone(),
        }
    }

    pub fn index_of(&self, checkpoint: u64) -> Option<usize> {
        self.checkpoints.iter().position(|&n| n == checkpoint)
    }

    /// Writes `n, mean_sq_sgd, var_sq_sgd, mean_sq_avg, var_sq_avg,
    /// mean_sq_subopt, var_sq_subopt, R, seed` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv_writer(out);
        w.write_record([
            "n",
            "mean_sq_sgd",
            "var_sq_sgd",
            "mean_sq_avg",
            "var_sq_avg",
            "mean_sq_subopt",
            "var_sq_subopt",
            "R",
            "seed",
        ])?;
        for i in 0..self.checkpoints.len() {
            w.write_record([
                self.checkpoints[i].to_string(),
                format_float(self.sgd[i].mean()),
                format_float(self.sgd[i].variance()),
                format_float(self.avg[i].mean()),
                format_float(self.avg[i].variance()),
                format_float(self.subopt[i].mean()),
                format_float(self.subopt[i].variance()),
                self.replicates.to_string(),
                self.seed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Squared errors of one replicate at each checkpoint, or `None` if it
/// diverged.
type ReplicateRecord = Option<Vec<[f64; 3]>>;

fn run_one<P: Problem>(
    problem: &P,
    schedule: &StepSchedule,
    theta0: &[f64],
    opts: &RunOptions,
    index: usize,
) -> Result<ReplicateRecord> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(replicate_seed(opts.master_seed, index as u64));
    let mut sub_rng = Xoshiro256PlusPlus::seed_from_u64(replicate_seed(opts.master_seed ^ SUBOPT_STREAM, index as u64));
    let theta = problem.optimum();
    let mut state = EstimatorState::new(theta0.to_vec())?;
    let mut obs = problem.new_observation();
    let mut grad = vec![0.0; problem.dimension()];
    let mut record = Vec::with_capacity(opts.checkpoints.len());
    for &checkpoint in &opts.checkpoints {
        while state.n() < checkpoint {
            problem.sample_into(&mut rng, &mut obs);
            match problem.gradient_into(&obs, state.theta(), &mut grad) {
                Ok(()) => {}
                // Probability-zero event: take a zero step.
                Err(Error::DegenerateSample) => grad.iter_mut().for_each(|g| *g = 0.0),
                Err(e) => return Err(e),
            }
            state.advance(&grad, schedule);
        }
        let sgd = dist_sq(state.theta(), theta);
        let avg = dist_sq(state.theta_bar(), theta);
        if !(sgd.is_finite() && avg.is_finite()) {
            return Ok(None);
        }
        let sub = problem.suboptimality(state.theta(), opts.subopt_budget.max(1), &mut sub_rng)?;
        record.push([sgd, avg, sub.value * sub.value]);
    }
    Ok(Some(record))
}

/// Runs `opts.replicates` independent trajectories from `theta0` and pools
/// the squared errors at each checkpoint. Replicate `i` draws from its own
/// generator seeded by [`replicate_seed`], and pooling happens in replicate
/// order, so the result is bit-identical for any thread count.
pub fn run_replicates<P: Problem>(
    problem: &P,
    schedule: &StepSchedule,
    theta0: &[f64],
    opts: &RunOptions,
) -> Result<ErrorCurves> {
    if opts.replicates < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 replicates, got {}", opts.replicates)));
    }
    if theta0.len() != problem.dimension() {
        return Err(Error::DimensionMismatch {
            expected: problem.dimension(),
            got: theta0.len(),
        });
    }
    if opts.checkpoints.is_empty() || opts.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("checkpoints must be non-empty and strictly increasing".into()));
    }
    let last = *opts.checkpoints.last().unwrap();
    if last > MAX_HORIZON {
        return Err(Error::InvalidInput(format!(
            "largest checkpoint {last} exceeds the per-replicate limit {MAX_HORIZON}"
        )));
    }
    let work = || -> Result<Vec<ReplicateRecord>> {
        (0..opts.replicates)
            .into_par_iter()
            .map(|i| run_one(problem, schedule, theta0, opts, i))
            .collect()
    };
    let records = match opts.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::InvalidInput(format!("cannot build thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };

    let k = opts.checkpoints.len();
    let mut sgd = vec![RunningStats::new(); k];
    let mut avg = vec![RunningStats::new(); k];
    let mut subopt = vec![RunningStats::new(); k];
    let mut diverged = Vec::new();
    for (i, rec) in records.iter().enumerate() {
        match rec {
            None => diverged.push(i),
            Some(rows) => {
                for (j, r) in rows.iter().enumerate() {
                    sgd[j].push(r[0]);
                    avg[j].push(r[1]);
                    subopt[j].push(r[2]);
                }
            }
        }
    }
    if diverged.len() as f64 > DIVERGENCE_TOLERANCE * opts.replicates as f64 {
        return Err(Error::Divergence {
            diverged: diverged.len(),
            replicates: opts.replicates,
            first: diverged.iter().take(10).copied().collect(),
        });
    }
    Ok(ErrorCurves {
        checkpoints: opts.checkpoints.clone(),
        sgd,
        avg,
        subopt,
        replicates: opts.replicates,
        seed: opts.master_seed,
        diverged,
    })
}

#[cfg(test)]
mod tests;
