//! Radial profile of `r -> E|Z - r u|` for a standard Gaussian `Z` in `R^d`
//! and a unit vector `u` (the mean of a noncentral chi variable), with its
//! first two derivatives. These give the geometric-median objective, its
//! gradient and its Hessian in closed form.

use statrs::function::gamma::ln_gamma;

/// `e^-z M(a, b, z)` for `a, b > 0`, `z >= 0`, where `M` is Kummer's
/// confluent hypergeometric function.
pub(crate) fn kummer_scaled(a: f64, b: f64, z: f64) -> f64 {
    debug_assert!(a > 0.0 && b > 0.0 && z >= 0.0);
    if z > 500.0 {
        return kummer_scaled_asymptotic(a, b, z);
    }
    // Positive series; each term is carried in log space so that e^-z never
    // underflows on its own.
    let mut ln_term = -z;
    let mut sum = ln_term.exp();
    let mut k = 0.0;
    loop {
        ln_term += ((a + k) / (b + k) * z / (k + 1.0)).ln();
        k += 1.0;
        let term = ln_term.exp();
        sum += term;
        if k > z && term <= 1e-17 * sum {
            return sum;
        }
    }
}

/// Large-`z` expansion
/// `e^-z M(a,b,z) ~ Gamma(b)/Gamma(a) z^(a-b) sum_s (b-a)_s (1-a)_s / (s! z^s)`.
fn kummer_scaled_asymptotic(a: f64, b: f64, z: f64) -> f64 {
    let prefactor = (ln_gamma(b) - ln_gamma(a) + (a - b) * z.ln()).exp();
    let mut term = 1.0;
    let mut sum = 1.0;
    for s in 0..40 {
        let s = s as f64;
        let next = term * (b - a + s) * (1.0 - a + s) / ((s + 1.0) * z);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    prefactor * sum
}

/// `E|Z| = sqrt(2) Gamma((d+1)/2) / Gamma(d/2)`.
pub(crate) fn chi_mean(d: usize) -> f64 {
    let d = d as f64;
    (0.5 * std::f64::consts::LN_2 + ln_gamma(0.5 * (d + 1.0)) - ln_gamma(0.5 * d)).exp()
}

/// `E[1/|Z|] = Gamma((d-1)/2) / (sqrt(2) Gamma(d/2))`, finite for `d >= 2`.
pub(crate) fn inverse_chi_mean(d: usize) -> f64 {
    let d = d as f64;
    (ln_gamma(0.5 * (d - 1.0)) - ln_gamma(0.5 * d) - 0.5 * std::f64::consts::LN_2).exp()
}

/// Values of `f(r) = E|Z - r u|` needed by the median model.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RadialProfile {
    /// `f(r) - f(0)`, computed without cancellation for small `r`.
    pub excess: f64,
    /// `f'(r)`
    pub slope: f64,
    /// `f''(r)`
    pub curvature: f64,
}

pub(crate) fn radial_profile(d: usize, r: f64) -> RadialProfile {
    let k = chi_mean(d);
    let dim = d as f64;
    let b = 0.5 * dim;
    let z = 0.5 * r * r;
    let m1 = kummer_scaled(b + 0.5, b + 1.0, z);
    let m2 = kummer_scaled(b + 0.5, b + 2.0, z);
    let excess = if z < 1.0 {
        // f(r)/K = M(-1/2, b, -z); subtract the leading 1 term by term.
        let mut term = 1.0;
        let mut sum = 0.0;
        let mut j = 0.0;
        loop {
            term *= (-0.5 + j) / (b + j) * (-z) / (j + 1.0);
            j += 1.0;
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
        }
        k * sum
    } else {
        k * (kummer_scaled(b + 0.5, b, z) - 1.0)
    };
    RadialProfile {
        excess,
        slope: k * r / dim * m1,
        curvature: k / dim * (m1 - r * r / (2.0 * (b + 1.0)) * m2),
    }
}
