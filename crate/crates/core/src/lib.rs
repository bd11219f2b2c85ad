//! Online stochastic gradient descent with Polyak-Ruppert averaging, the
//! explicit non-asymptotic L2 error bounds for both estimators, and a
//! Monte-Carlo harness that checks empirical errors against those bounds.
//!
//! The crate is organised in five layers:
//!
//! * [`algorithms`]: the SGD recursion, its running average and the step
//!   schedule `gamma_n = c_gamma n^(-alpha)`.
//! * [`problems`]: stochastic objectives with their assumption constants.
//! * [`bounds`]: closed-form evaluation of every bound and derived constant.
//! * [`verify`]: replicated trajectories, pooled error curves and dominance
//!   checks.
//! * [`report`]: CSV helpers shared by every artifact.

// `!(x > 0.0)` is used deliberately throughout so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithms;
pub mod bounds;
pub mod error;
pub mod problems;
pub mod report;
pub mod stats;
pub mod verify;

pub use algorithms::{averaged_update, step_size, EstimatorState, StepSchedule};
pub use bounds::{
    bound_curve, derive_constants, evaluate, BoundBreakdown, BoundCurve, DerivedConstants, Quantity, TheoremId,
};
pub use error::{Error, Result};
pub use problems::{
    assumption_audit, constants_for, AssumptionConstants, ConstantsOptions, GeometricMedian, LinearRegression,
    LogisticRegression, Problem, Provenance,
};
pub use stats::RunningStats;
pub use verify::{dominance_check, run_replicates, DominanceReport, ErrorCurves, RunOptions};
