//! Closed-form evaluators for every explicit error bound and the composite
//! constants they depend on.

mod curve;
mod derived;
mod series;
mod theorems;

pub use curve::{bound_curve, BoundCurve};
pub use derived::{derive_constants, first_index, thresholds, DerivedConstants, THRESHOLD_CAP};
pub use series::series_upper_bound;
pub use theorems::{
    check_applicable, evaluate, lemma1_bound, lemma2_bound, theorem1_bound, theorem2_bound, theorem3_bound,
    theorem4_bound, theorem5_bound, theorem6_bound, BoundBreakdown, Quantity, TheoremId,
};

/// Product that treats `0 * inf` as 0, so that a vanishing constant such as
/// `L_delta = 0` removes a term even when its prefactor overflowed.
pub fn mul0(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}
