//! Problem zoo: stochastic objectives `G(h) = E[g(X, h)]` with documented
//! assumption constants, and the empirical audit of the structural
//! inequalities the error bounds rely on.

mod audit;
mod linreg;
mod logistic;
mod median;
pub(crate) mod special;

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{dist_sq, RunningStats};

pub use audit::{assumption_audit, default_grid, AuditCheck, AuditKind, AuditReport};
pub use linreg::{linreg_gradient, LinearRegression, LinregObservation};
pub use logistic::{logistic_gradient, LogisticObservation, LogisticRegression};
pub use median::{geomedian_gradient, GeometricMedian};

/// Where a constant came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    /// Closed form, valid on the whole space.
    Exact,
    /// Estimated on a sampled grid and inflated by the safety factor.
    EmpiricalWithMargin,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Exact => "exact",
            Provenance::EmpiricalWithMargin => "empirical-with-margin",
        })
    }
}

/// Structural constants of one problem instance, plus the
/// initial-error moments `u0 = E[(G(theta_0) - G(theta))^2]` and
/// `v0 = E|theta_0 - theta|^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionConstants {
    pub c1: f64,
    pub c2: f64,
    pub c1p: f64,
    pub c2p: f64,
    pub l_grad_g: f64,
    pub lambda_min: f64,
    pub lambda_0: f64,
    /// `f64::INFINITY` when local strong convexity holds everywhere.
    pub r_lambda0: f64,
    pub c_lambda0: f64,
    pub l_sigma: Option<f64>,
    pub u0: f64,
    pub v0: f64,
    /// `Tr(H^-1 Sigma H^-1)` at the optimum.
    pub trace_term: Option<f64>,
    /// Per-field provenance; fields absent from the map are exact.
    pub provenance: BTreeMap<String, Provenance>,
}

impl AssumptionConstants {
    pub const FIELD_NAMES: [&'static str; 14] = [
        "C1",
        "C2",
        "C1p",
        "C2p",
        "L_grad_G",
        "lambda_min",
        "lambda_0",
        "r_lambda0",
        "C_lambda0",
        "L_Sigma",
        "u0",
        "v0",
        "trace_term",
        "L_delta",
    ];

    pub fn provenance_of(&self, field: &str) -> Provenance {
        self.provenance.get(field).copied().unwrap_or(Provenance::Exact)
    }

    pub fn mark_empirical(&mut self, field: &str) {
        self.provenance
            .insert(field.to_string(), Provenance::EmpiricalWithMargin);
    }

    /// True when any field is empirical.
    pub fn any_empirical(&self) -> bool {
        self.provenance
            .values()
            .any(|p| *p == Provenance::EmpiricalWithMargin)
    }

    /// `C2 = C2' = 0`: uniformly bounded gradient moments.
    pub fn is_bounded_gradient(&self) -> bool {
        self.c2 == 0.0 && self.c2p == 0.0
    }

    /// `min{1, r_lambda0^2}`, equal to 1 for an infinite radius.
    pub fn min_one_r_sq(&self) -> f64 {
        if self.r_lambda0 >= 1.0 {
            1.0
        } else {
            self.r_lambda0 * self.r_lambda0
        }
    }

    /// `L_delta = max{2 C_lambda0 / lambda_0, 2 L / (lambda_0 r_lambda0)}`; the
    /// second branch vanishes for an infinite radius.
    pub fn l_delta(&self) -> f64 {
        let first = 2.0 * self.c_lambda0 / self.lambda_0;
        let second = if self.r_lambda0.is_infinite() {
            0.0
        } else {
            2.0 * self.l_grad_g / (self.lambda_0 * self.r_lambda0)
        };
        first.max(second)
    }

    /// Field values in [`Self::FIELD_NAMES`] order; absent optionals are NaN.
    pub fn values(&self) -> [(&'static str, f64); 14] {
        let v = [
            self.c1,
            self.c2,
            self.c1p,
            self.c2p,
            self.l_grad_g,
            self.lambda_min,
            self.lambda_0,
            self.r_lambda0,
            self.c_lambda0,
            self.l_sigma.unwrap_or(f64::NAN),
            self.u0,
            self.v0,
            self.trace_term.unwrap_or(f64::NAN),
            self.l_delta(),
        ];
        let mut out = [("", 0.0); 14];
        for (i, name) in Self::FIELD_NAMES.iter().enumerate() {
            out[i] = (name, v[i]);
        }
        out
    }

    /// Sign and ordering checks.
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("C1", self.c1),
            ("C2", self.c2),
            ("C1p", self.c1p),
            ("C2p", self.c2p),
            ("C_lambda0", self.c_lambda0),
            ("u0", self.u0),
            ("v0", self.v0),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Assumption(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.lambda_min > 0.0 && self.lambda_min.is_finite()) {
            return Err(Error::Assumption(format!(
                "cannot certify positivity of the Hessian at the optimum (lambda_min = {})",
                self.lambda_min
            )));
        }
        if !(self.lambda_0 > 0.0 && self.lambda_0.is_finite()) {
            return Err(Error::Assumption(format!(
                "cannot certify local strong convexity (lambda_0 = {})",
                self.lambda_0
            )));
        }
        if !(self.l_grad_g > 0.0 && self.l_grad_g.is_finite()) {
            return Err(Error::Assumption(format!("L_grad_G must be positive, got {}", self.l_grad_g)));
        }
        if !(self.r_lambda0 > 0.0) {
            return Err(Error::Assumption(format!("r_lambda0 must be positive, got {}", self.r_lambda0)));
        }
        if self.lambda_min > self.l_grad_g * (1.0 + 1e-12) || self.lambda_0 > self.l_grad_g * (1.0 + 1e-12) {
            return Err(Error::Assumption(format!(
                "eigenvalue ordering violated: lambda_min = {}, lambda_0 = {}, L = {}",
                self.lambda_min, self.lambda_0, self.l_grad_g
            )));
        }
        if let Some(ls) = self.l_sigma {
            if !(ls >= 0.0 && ls.is_finite()) {
                return Err(Error::Assumption(format!("L_Sigma must be >= 0, got {ls}")));
            }
        }
        if let Some(t) = self.trace_term {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::Assumption(format!("trace_term must be >= 0, got {t}")));
            }
        }
        Ok(())
    }
}

/// `G(h) - G(theta)`, exact or Monte-Carlo estimated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Suboptimality {
    pub value: f64,
    pub stderr: f64,
    pub exact: bool,
}

impl Suboptimality {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            stderr: 0.0,
            exact: true,
        }
    }

    fn estimated(stats: &RunningStats) -> Result<Self> {
        let value = stats.mean();
        let stderr = stats.stderr();
        if value < -5.0 * stderr {
            return Err(Error::Assumption(format!(
                "suboptimality estimate {value} is more than 5 stderr ({stderr}) below zero"
            )));
        }
        Ok(Self {
            value,
            stderr,
            exact: false,
        })
    }
}

/// A vector-valued expectation with the standard error of its norm.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorEstimate {
    pub value: Vec<f64>,
    pub stderr: f64,
}

impl VectorEstimate {
    pub fn exact(value: Vec<f64>) -> Self {
        Self { value, stderr: 0.0 }
    }

    /// Mean of the pushed vectors; the stderr is the root-sum of per-coordinate
    /// standard errors.
    pub(crate) fn from_stats(stats: &[RunningStats]) -> Self {
        let value = stats.iter().map(RunningStats::mean).collect();
        let stderr = stats
            .iter()
            .map(|s| {
                let e = s.stderr();
                e * e
            })
            .sum::<f64>()
            .sqrt();
        Self { value, stderr }
    }
}

/// Knobs for the empirical parts of [`constants_for`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantsOptions {
    /// Multiplier applied in the conservative direction to empirical entries.
    pub safety_factor: f64,
    /// Monte-Carlo sample count per grid point.
    pub budget: usize,
    pub seed: u64,
}

impl Default for ConstantsOptions {
    fn default() -> Self {
        Self {
            safety_factor: 2.0,
            budget: 200_000,
            seed: 0x5eed,
        }
    }
}

impl ConstantsOptions {
    pub(crate) fn rng(&self, stream: u64) -> Xoshiro256PlusPlus {
        Xoshiro256PlusPlus::seed_from_u64(crate::verify::replicate_seed(self.seed, stream))
    }
}

/// A stochastic objective `G(h) = E[g(X, h)]` with minimizer `theta`.
pub trait Problem: Send + Sync {
    type Observation: Clone + Send + fmt::Debug;

    fn name(&self) -> &'static str;

    fn dimension(&self) -> usize;

    /// Allocates an observation buffer for [`Problem::sample_into`].
    fn new_observation(&self) -> Self::Observation;

    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, obs: &mut Self::Observation);

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Observation {
        let mut obs = self.new_observation();
        self.sample_into(rng, &mut obs);
        obs
    }

    /// The per-sample loss `g(x, h)`.
    fn loss(&self, obs: &Self::Observation, h: &[f64]) -> f64;

    /// Writes `grad_h g(x, h)` into `out`.
    fn gradient_into(&self, obs: &Self::Observation, h: &[f64], out: &mut [f64]) -> Result<()>;

    fn gradient(&self, obs: &Self::Observation, h: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dimension()];
        self.gradient_into(obs, h, &mut out)?;
        Ok(out)
    }

    /// The minimizer `theta`.
    fn optimum(&self) -> &[f64];

    /// `G(h) - G(theta)`. Problems without a closed form override nothing and
    /// get the plain Monte-Carlo average of `g(X, h) - g(X, theta)`.
    fn suboptimality<R: Rng + ?Sized>(&self, h: &[f64], budget: usize, rng: &mut R) -> Result<Suboptimality> {
        check_dim(self.dimension(), h.len())?;
        if budget == 0 {
            return Err(Error::InvalidInput("suboptimality budget must be >= 1".into()));
        }
        let mut obs = self.new_observation();
        let mut stats = RunningStats::new();
        for _ in 0..budget {
            self.sample_into(rng, &mut obs);
            stats.push(self.loss(&obs, h) - self.loss(&obs, self.optimum()));
        }
        Suboptimality::estimated(&stats)
    }

    /// `grad G(h)`, by Monte-Carlo unless overridden.
    fn mean_gradient<R: Rng + ?Sized>(&self, h: &[f64], budget: usize, rng: &mut R) -> Result<VectorEstimate> {
        check_dim(self.dimension(), h.len())?;
        let d = self.dimension();
        let mut obs = self.new_observation();
        let mut g = vec![0.0; d];
        let mut stats = vec![RunningStats::new(); d];
        for _ in 0..budget.max(2) {
            self.sample_into(rng, &mut obs);
            match self.gradient_into(&obs, h, &mut g) {
                Ok(()) => {}
                Err(Error::DegenerateSample) => g.iter_mut().for_each(|v| *v = 0.0),
                Err(e) => return Err(e),
            }
            for (s, v) in stats.iter_mut().zip(&g) {
                s.push(*v);
            }
        }
        Ok(VectorEstimate::from_stats(&stats))
    }

    /// `H = Hessian of G at theta`.
    fn hessian_at_optimum(&self) -> DMatrix<f64>;

    /// Linearization remainder `delta(h) = grad G(h) - H (h - theta)`.
    fn linearization_remainder<R: Rng + ?Sized>(
        &self,
        h: &[f64],
        budget: usize,
        rng: &mut R,
    ) -> Result<VectorEstimate> {
        let grad = self.mean_gradient(h, budget, rng)?;
        let e: Vec<f64> = h.iter().zip(self.optimum()).map(|(a, b): (&f64, &f64)| a - b).collect();
        let he = self.hessian_at_optimum() * nalgebra::DVector::from_column_slice(&e);
        let value = grad.value.iter().zip(he.iter()).map(|(g, v)| g - v).collect();
        Ok(VectorEstimate {
            value,
            stderr: grad.stderr,
        })
    }

    /// Problem-specific constants with `u0 = v0 = 0`; [`constants_for`] fills
    /// in the initial-error moments.
    fn assumption_constants(&self, opts: &ConstantsOptions) -> Result<AssumptionConstants>;

    /// Length unit for default audit grids.
    fn scale(&self) -> f64 {
        1.0
    }
}

/// Assumption constants for `problem` started at the deterministic point
/// `theta0`: `v0 = |theta0 - theta|^2` and `u0 = (G(theta0) - G(theta))^2`.
/// An estimated suboptimality is inflated by three standard errors and `u0`
/// is then flagged empirical.
pub fn constants_for<P: Problem>(problem: &P, theta0: &[f64], opts: &ConstantsOptions) -> Result<AssumptionConstants> {
    check_dim(problem.dimension(), theta0.len())?;
    let mut constants = problem.assumption_constants(opts)?;
    constants.v0 = dist_sq(theta0, problem.optimum());
    let mut rng = opts.rng(u64::MAX);
    let sub = problem.suboptimality(theta0, opts.budget.max(2), &mut rng)?;
    if sub.exact {
        constants.u0 = sub.value * sub.value;
    } else {
        let upper = sub.value.abs() + 3.0 * sub.stderr;
        constants.u0 = upper * upper;
        constants.mark_empirical("u0");
    }
    constants.validate()?;
    Ok(constants)
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Uniform direction on the unit sphere of `R^d`.
pub(crate) fn random_direction<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    loop {
        for v in out.iter_mut() {
            *v = rng.sample(rand_distr::StandardNormal);
        }
        let n = crate::stats::norm(out);
        if n > 1e-300 {
            out.iter_mut().for_each(|v| *v /= n);
            return;
        }
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    /// Central finite-difference gradient with step `1e-5 * max(1, |h_j|)`.
    pub fn finite_difference(f: impl Fn(&[f64]) -> f64, h: &[f64]) -> Vec<f64> {
        let mut x = h.to_vec();
        (0..h.len())
            .map(|j| {
                let step = 1e-5 * h[j].abs().max(1.0);
                x[j] = h[j] + step;
                let up = f(&x);
                x[j] = h[j] - step;
                let down = f(&x);
                x[j] = h[j];
                (up - down) / (2.0 * step)
            })
            .collect()
    }

    /// Max-norm relative error, guarded against tiny reference gradients.
    pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-3);
        a.iter()
            .zip(b)
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
            / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_constants() -> AssumptionConstants {
        AssumptionConstants {
            c1: 1.0,
            c2: 0.0,
            c1p: 1.0,
            c2p: 0.0,
            l_grad_g: 2.0,
            lambda_min: 1.0,
            lambda_0: 1.0,
            r_lambda0: 2.0,
            c_lambda0: 0.5,
            l_sigma: None,
            u0: 0.0,
            v0: 0.0,
            trace_term: None,
            provenance: BTreeMap::new(),
        }
    }

    #[test]
    fn l_delta_branches() {
        let mut c = sample_constants();
        // max{2*0.5/1, 2*2/(1*2)} = max{1, 2}
        assert_eq!(c.l_delta(), 2.0);
        c.r_lambda0 = f64::INFINITY;
        assert_eq!(c.l_delta(), 1.0);
        assert_eq!(c.min_one_r_sq(), 1.0);
        c.c_lambda0 = 0.0;
        assert_eq!(c.l_delta(), 0.0);
        c.r_lambda0 = 0.5;
        assert_eq!(c.min_one_r_sq(), 0.25);
    }

    #[test]
    fn validation_rejects_bad_orderings() {
        let mut c = sample_constants();
        assert!(c.validate().is_ok());
        c.lambda_min = 3.0;
        assert!(c.validate().is_err());
        let mut c = sample_constants();
        c.lambda_min = 0.0;
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("positivity"), "{err}");
        let mut c = sample_constants();
        c.c1 = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn provenance_defaults_to_exact() {
        let mut c = sample_constants();
        assert_eq!(c.provenance_of("lambda_0"), Provenance::Exact);
        assert!(!c.any_empirical());
        c.mark_empirical("lambda_0");
        assert_eq!(c.provenance_of("lambda_0"), Provenance::EmpiricalWithMargin);
        assert!(c.any_empirical());
        assert_eq!(Provenance::EmpiricalWithMargin.to_string(), "empirical-with-margin");
    }
}
