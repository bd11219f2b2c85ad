//! Certified upper bounds for `sum_{n >= 0} exp(-c n^(1 - alpha))`.

use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::stats::CompensatedSum;

/// Stop summing once a term falls below this fraction of the running sum.
const RELATIVE_CUTOFF: f64 = 1e-15;
/// Hard cap on explicitly summed terms; the integral tail covers the rest.
const MAX_TERMS: u64 = 1 << 21;
/// Relative inflation absorbing floating-point error in the sum and tail.
const ROUNDING_MARGIN: f64 = 1e-12;

/// A certified upper bound on `scale * sum_{n >= 0} exp(-c n^(1 - alpha))`.
///
/// Terms are summed explicitly until one drops below `1e-15` of the running
/// sum. The remainder `sum_{n >= N} f(n)` is bounded by
/// `int_{N - 1/2}^inf f(t) dt`, which is valid because `f` is convex on
/// `t > 0`, and equals `Gamma(1/beta, c (N - 1/2)^beta) / (beta c^(1/beta))`
/// with `beta = 1 - alpha`.
pub fn series_upper_bound(c: f64, alpha: f64, scale: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::DivergentSeries(c));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("series exponent needs alpha in (0, 1), got {alpha}")));
    }
    if !(scale >= 0.0) {
        return Err(Error::InvalidInput(format!("series scale must be >= 0, got {scale}")));
    }
    if scale == 0.0 {
        return Ok(0.0);
    }
    let beta = 1.0 - alpha;
    let mut sum = CompensatedSum::default();
    sum.add(1.0);
    let mut n: u64 = 1;
    while n < MAX_TERMS {
        let term = (-c * (n as f64).powf(beta)).exp();
        sum.add(term);
        n += 1;
        if term < RELATIVE_CUTOFF * sum.value() {
            break;
        }
    }
    let tail = integral_tail(c, beta, n as f64 - 0.5);
    let total = (sum.value() + tail) * (1.0 + ROUNDING_MARGIN) * scale;
    if !total.is_finite() {
        return Err(Error::NonFiniteConstant {
            name: "series",
            value: total,
        });
    }
    Ok(total)
}

/// `int_a^inf exp(-c t^beta) dt = Gamma(s, c a^beta) / (beta c^s)`, `s = 1/beta`,
/// evaluated in log space.
fn integral_tail(c: f64, beta: f64, a: f64) -> f64 {
    let s = 1.0 / beta;
    let x = c * a.powf(beta);
    let q = gamma_ur(s, x);
    if q <= 0.0 {
        return 0.0;
    }
    (ln_gamma(s) + q.ln() - beta.ln() - s * c.ln()).exp()
}
