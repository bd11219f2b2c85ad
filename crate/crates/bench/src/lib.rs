//! Fixtures shared by the throughput benchmarks.

use avgsgd_core::{
    derive_constants, ConstantsOptions, DerivedConstants, GeometricMedian, LinearRegression, LogisticRegression,
    StepSchedule,
};

pub const DIMENSION: usize = 3;

/// The optimum used by every fixture.
pub fn optimum() -> Vec<f64> {
    vec![1.0, -1.0, 0.5]
}

/// Starting point two units away from the optimum along the first axis.
pub fn start() -> Vec<f64> {
    let mut h = optimum();
    h[0] += 2.0;
    h
}

/// Largest round step constant for which every linreg bound stays finite.
pub fn schedule() -> StepSchedule {
    StepSchedule::new(0.6, 0.75).expect("valid schedule")
}

pub fn linreg() -> LinearRegression {
    LinearRegression::new(optimum(), 1.0, 1.0, 4.0).expect("valid linreg")
}

pub fn logistic() -> LogisticRegression {
    LogisticRegression::new(optimum(), 1.0).expect("valid logistic")
}

pub fn median() -> GeometricMedian {
    GeometricMedian::new(optimum(), 1.0).expect("valid median")
}

/// Derived constants of the linreg fixture, for the bound evaluators.
pub fn linreg_derived() -> DerivedConstants {
    let k = avgsgd_core::constants_for(&linreg(), &start(), &ConstantsOptions::default()).expect("constants");
    derive_constants(&k, &schedule()).expect("derived constants")
}
