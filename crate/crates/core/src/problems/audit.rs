//! Empirical audit of the structural inequalities behind the bounds, on a grid
//! of points around the optimum:
//!
//! * upper quadratic growth `G(h) - G(theta) <= L/2 |h - theta|^2`;
//! * lower growth `G(h) - G(theta) >= lambda_0/2 |h - theta|^2` inside the
//!   ball of radius `r_lambda0` and `>= lambda_0/2 r_lambda0 |h - theta|` outside;
//! * both gradient-moment inequalities;
//! * `|delta(h)| <= L_delta (G(h) - G(theta))`.
//!
//! Monte-Carlo quantities get three standard errors of slack in the direction
//! that favors the inequality.

use std::fmt;

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

use super::{random_direction, AssumptionConstants, Problem};
use crate::error::{Error, Result};
use crate::stats::{norm, RunningStats};

const SLACK: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuditKind {
    UpperQuadratic,
    LowerGrowth,
    SecondMoment,
    FourthMoment,
    Linearization,
}

impl AuditKind {
    pub const ALL: [AuditKind; 5] = [
        AuditKind::UpperQuadratic,
        AuditKind::LowerGrowth,
        AuditKind::SecondMoment,
        AuditKind::FourthMoment,
        AuditKind::Linearization,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AuditKind::UpperQuadratic => "upper_quadratic",
            AuditKind::LowerGrowth => "lower_growth",
            AuditKind::SecondMoment => "second_moment",
            AuditKind::FourthMoment => "fourth_moment",
            AuditKind::Linearization => "linearization",
        }
    }
}

impl fmt::Display for AuditKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of one inequality over the whole grid. `worst_margin` is the
/// smallest `rhs - lhs` (after slack); the check passes iff it is >= 0.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditCheck {
    pub kind: AuditKind,
    pub worst_margin: f64,
    pub worst_point: Vec<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub checks: Vec<AuditCheck>,
    pub grid_size: usize,
    pub budget: usize,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, kind: AuditKind) -> Option<&AuditCheck> {
        self.checks.iter().find(|c| c.kind == kind)
    }
}

/// The optimum plus 20 points at distances `3 scale k / 20`, `k = 1..=20`,
/// along seeded uniform directions.
pub fn default_grid<P: Problem>(problem: &P, seed: u64) -> Vec<Vec<f64>> {
    let theta = problem.optimum();
    let radius = 3.0 * problem.scale();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut dir = vec![0.0; theta.len()];
    let mut grid = vec![theta.to_vec()];
    for k in 1..=20 {
        random_direction(&mut rng, &mut dir);
        let t = radius * k as f64 / 20.0;
        grid.push(theta.iter().zip(&dir).map(|(a, u)| a + t * u).collect());
    }
    grid
}

fn tolerance(rhs: f64) -> f64 {
    1e-12 * (1.0 + rhs.abs())
}

struct Worst {
    kind: AuditKind,
    margin: f64,
    point: Vec<f64>,
}

impl Worst {
    fn new(kind: AuditKind) -> Self {
        Self {
            kind,
            margin: f64::INFINITY,
            point: Vec::new(),
        }
    }

    fn update(&mut self, margin: f64, h: &[f64]) {
        if margin < self.margin || self.point.is_empty() {
            self.margin = margin;
            self.point = h.to_vec();
        }
    }

    fn finish(self) -> AuditCheck {
        AuditCheck {
            kind: self.kind,
            passed: self.margin >= 0.0,
            worst_margin: self.margin,
            worst_point: self.point,
        }
    }
}

/// Checks every inequality at every grid point with `budget` Monte-Carlo
/// draws per estimated quantity.
pub fn assumption_audit<P: Problem>(
    problem: &P,
    constants: &AssumptionConstants,
    grid: &[Vec<f64>],
    budget: usize,
    seed: u64,
) -> Result<AuditReport> {
    if budget < 2 {
        return Err(Error::InvalidInput("audit budget must be >= 2".into()));
    }
    let d = problem.dimension();
    let theta = problem.optimum();
    let l_delta = constants.l_delta();
    let mut worst: Vec<Worst> = AuditKind::ALL.iter().map(|k| Worst::new(*k)).collect();
    let mut obs = problem.new_observation();
    let mut g = vec![0.0; d];
    for (i, h) in grid.iter().enumerate() {
        super::check_dim(d, h.len())?;
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(crate::verify::replicate_seed(seed, i as u64));
        let dist = crate::stats::dist_sq(h, theta).sqrt();
        let sub = problem.suboptimality(h, budget, &mut rng)?;
        let sub_lo = sub.value - SLACK * sub.stderr;
        let sub_hi = (sub.value + SLACK * sub.stderr).max(0.0);

        let rhs = 0.5 * constants.l_grad_g * dist * dist;
        worst[0].update(rhs - sub_lo + tolerance(rhs), h);

        let r = constants.r_lambda0;
        let lower = if dist <= r {
            0.5 * constants.lambda_0 * dist * dist
        } else {
            0.5 * constants.lambda_0 * r * dist
        };
        worst[1].update(sub_hi - lower + tolerance(lower), h);

        let mut m2 = RunningStats::new();
        let mut m4 = RunningStats::new();
        for _ in 0..budget {
            problem.sample_into(&mut rng, &mut obs);
            let n2 = match problem.gradient_into(&obs, h, &mut g) {
                Ok(()) => g.iter().map(|v| v * v).sum::<f64>(),
                Err(Error::DegenerateSample) => 0.0,
                Err(e) => return Err(e),
            };
            m2.push(n2);
            m4.push(n2 * n2);
        }
        let rhs2 = constants.c1 + constants.c2 * sub_hi;
        worst[2].update(rhs2 - (m2.mean() - SLACK * m2.stderr()) + tolerance(rhs2), h);
        let rhs4 = constants.c1p + constants.c2p * sub_hi * sub_hi;
        worst[3].update(rhs4 - (m4.mean() - SLACK * m4.stderr()) + tolerance(rhs4), h);

        let delta = problem.linearization_remainder(h, budget, &mut rng)?;
        let lhs = (norm(&delta.value) - SLACK * delta.stderr).max(0.0);
        let rhs_delta = crate::bounds::mul0(l_delta, sub_hi);
        worst[4].update(rhs_delta - lhs + tolerance(rhs_delta), h);
    }
    Ok(AuditReport {
        checks: worst.into_iter().map(Worst::finish).collect(),
        grid_size: grid.len(),
        budget,
    })
}
