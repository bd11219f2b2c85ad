//! Composite constants entering the bound statements, computed once per
//! (problem constants, schedule) pair.

use serde::Serialize;

use super::series::series_upper_bound;
use super::mul0;
use crate::algorithms::StepSchedule;
use crate::error::{Error, Result};
use crate::problems::AssumptionConstants;

/// Largest index the threshold searches will consider.
pub const THRESHOLD_CAP: u64 = 1_000_000_000;

/// Every derived constant. Exponential prefactors may overflow to `+inf` for
/// aggressive schedules; evaluators that need such a constant report
/// [`Error::NonFiniteConstant`] instead of returning an infinite bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivedConstants {
    pub constants: AssumptionConstants,
    pub schedule: StepSchedule,
    /// `2 alpha / (2 alpha - 1)`
    pub k2: f64,
    /// `3 alpha / (3 alpha - 1)`
    pub k3: f64,
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub sigma2: f64,
    pub l_delta: f64,
    pub b1: f64,
    pub c1: f64,
    pub big_a: f64,
    pub n0: u64,
    pub n0p: u64,
    pub c_n0p: f64,
    pub m0: f64,
    pub n1: u64,
    pub n1p: u64,
    pub a_prime: f64,
    pub a_inf: f64,
    pub b_inf: f64,
    pub d_inf: f64,
    pub a_inf_p: f64,
    pub b_inf_p: f64,
    pub d_inf_p: f64,
}

/// Smallest `n >= 0` with `pred(n)`, for a predicate that is false up to some
/// index and true from then on. Gallops to bracket the switch, then bisects.
pub fn first_index(name: &'static str, cap: u64, pred: impl Fn(u64) -> bool) -> Result<u64> {
    if pred(0) {
        return Ok(0);
    }
    let mut lo = 0u64; // pred(lo) is false
    let mut hi = 1u64;
    while !pred(hi) {
        if hi >= cap {
            return Err(Error::ThresholdCap {
                name,
                cap,
                detail: format!("condition still false at n = {hi}"),
            });
        }
        lo = hi;
        hi = (hi * 2).min(cap);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// The four step-threshold indices `(n0, n0', n1, n1')`.
pub fn thresholds(constants: &AssumptionConstants, schedule: &StepSchedule) -> Result<(u64, u64, u64, u64)> {
    DerivedBasics::new(constants).thresholds(schedule)
}

struct DerivedBasics {
    a0: f64,
    a1: f64,
    a2: f64,
    b1: f64,
    lambda_min: f64,
}

impl DerivedBasics {
    fn new(k: &AssumptionConstants) -> Self {
        let l = k.l_grad_g;
        let m = k.min_one_r_sq();
        Self {
            a0: k.lambda_0 * k.lambda_0 * m / l,
            a1: (k.lambda_0.powi(4) / (4.0 * l * l)).max(k.c2 * (4.0 * l + 1.0)),
            a2: 0.5 * l * l * k.c2p,
            b1: 0.5 * l * k.c2.max(k.lambda_min * k.lambda_min / (2.0 * l)),
            lambda_min: k.lambda_min,
        }
    }

    fn thresholds(&self, s: &StepSchedule) -> Result<(u64, u64, u64, u64)> {
        let g = |n: u64| s.gamma(n + 1);
        let n0 = first_index("n0 (a0 >= 2 a1 gamma + 2 a2 gamma^2)", THRESHOLD_CAP, |n| {
            let gn = g(n);
            self.a0 >= 2.0 * self.a1 * gn + 2.0 * self.a2 * gn * gn
        })?;
        let n0p = first_index("n0' (a0 gamma <= 1)", THRESHOLD_CAP, |n| self.a0 * g(n) <= 1.0)?;
        let n1 = first_index("n1 (lambda_min >= 2 gamma b1)", THRESHOLD_CAP, |n| {
            self.lambda_min >= 2.0 * g(n) * self.b1
        })?;
        let n1p = first_index("n1' (lambda_min gamma <= 1)", THRESHOLD_CAP, |n| {
            self.lambda_min * g(n) <= 1.0
        })?;
        Ok((n0, n0p, n1, n1p))
    }
}

/// Computes every derived constant for `constants` under `schedule`.
pub fn derive_constants(constants: &AssumptionConstants, schedule: &StepSchedule) -> Result<DerivedConstants> {
    constants.validate()?;
    let basics = DerivedBasics::new(constants);
    let (n0, n0p, n1, n1p) = basics.thresholds(schedule)?;
    let k = constants;
    let c = schedule.c_gamma();
    let alpha = schedule.alpha();
    let beta = 1.0 - alpha;
    let l = k.l_grad_g;
    let lam = k.lambda_min;
    let m = k.min_one_r_sq();
    let k2 = 2.0 * alpha / (2.0 * alpha - 1.0);
    let k3 = 3.0 * alpha / (3.0 * alpha - 1.0);
    let DerivedBasics { a0, a1, a2, b1, .. } = basics;

    let sigma2 = k.c1 * k.c1 * (4.0 * l + 1.0).powi(2) * l / (12.0 * k.lambda_0 * k.lambda_0 * m)
        + 0.5 * c * l * l * k.c1p;
    let sigma = sigma2.sqrt();
    let l_delta = k.l_delta();
    let ld2 = l_delta * l_delta;
    let c2 = c * c;
    let c3 = c2 * c;

    let growth = 2.0 * a1 * c2 * k2 + 2.0 * a2 * c3 * k3;
    let c1 = mul0(growth.exp(), k.u0 + sigma2 * c3 * k3);
    let inner = k.u0 * c
        + c1
        + mul0(4.0 * c1 / (a0 * beta), (-0.25 * a0 * c).exp())
        + 2f64.powf(1.0 + 4.0 * alpha) * sigma2 * c3 / a0 * k3;
    let big_a = mul0(
        (2.0 * b1 * c2 * k2).exp(),
        k.v0 + k2 * c2 * k.c1 + mul0(2.0 * ld2 / lam, inner),
    );

    // gamma_{n0'} with n0' = 0 falls back to gamma_1.
    let gamma_n0p = schedule.gamma(n0p.max(1));
    let c_n0p = mul0(
        sigma2,
        mul0((0.5 * a0 * c * ((n0p + 1) as f64).powf(beta)).exp(), gamma_n0p.powi(3)) + c3 * k3,
    );
    let m0 = (2f64.powf(4.0 * alpha) / a0).max(c);
    let a_prime = mul0(
        (lam * c * ((n1p + 1) as f64).powf(beta)).exp(),
        k.c1 * c2 * k2
            + c_n0p
            + c * k.u0
            + mul0(2.0 * c_n0p / (a0 * beta), (-0.5 * a0 * c).exp())
            + sigma2 * c3 * m0 * k3,
    );

    // An overflowed prefactor propagates as +inf rather than an error.
    let series = |rate: f64, scale: f64| -> Result<f64> {
        if scale == 0.0 || scale.is_infinite() {
            return Ok(scale);
        }
        match series_upper_bound(rate, alpha, scale) {
            Err(Error::NonFiniteConstant { .. }) => Ok(f64::INFINITY),
            other => other,
        }
    };
    let a_inf = series(lam * c / 8.0, big_a.sqrt() / c)?;
    let b_inf = series(
        c * a0 / 8.0,
        mul0(
            (0.5 * growth).exp(),
            k.u0.sqrt() + sigma * c.powf(1.5) * k3.sqrt(),
        ),
    )?;
    let d_inf = series(a0 * c / 16.0, mul0(2f64.sqrt() * c1.sqrt(), l_delta) / (lam * c))?;
    let a_inf_p = series(lam * c / 2.0, a_prime.sqrt() / c)?;
    let b_inf_p = series(a0 * c / 4.0, c_n0p.sqrt() + k.u0.sqrt())?;
    let d_inf_p = series(a0 * c / 8.0, mul0(c_n0p.sqrt(), l_delta) / (lam * c))?;

    Ok(DerivedConstants {
        constants: constants.clone(),
        schedule: *schedule,
        k2,
        k3,
        a0,
        a1,
        a2,
        sigma2,
        l_delta,
        b1,
        c1,
        big_a,
        n0,
        n0p,
        c_n0p,
        m0,
        n1,
        n1p,
        a_prime,
        a_inf,
        b_inf,
        d_inf,
        a_inf_p,
        b_inf_p,
        d_inf_p,
    })
}

impl DerivedConstants {
    /// `(name, value)` pairs for reports; threshold indices are converted to
    /// floating point.
    pub fn fields(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("a0", self.a0),
            ("a1", self.a1),
            ("a2", self.a2),
            ("sigma2", self.sigma2),
            ("L_delta", self.l_delta),
            ("b1", self.b1),
            ("c1", self.c1),
            ("A", self.big_a),
            ("n0", self.n0 as f64),
            ("n0p", self.n0p as f64),
            ("c_n0p", self.c_n0p),
            ("M0", self.m0),
            ("n1", self.n1 as f64),
            ("n1p", self.n1p as f64),
            ("A_prime", self.a_prime),
            ("A_inf", self.a_inf),
            ("B_inf", self.b_inf),
            ("D_inf", self.d_inf),
            ("A_inf_p", self.a_inf_p),
            ("B_inf_p", self.b_inf_p),
            ("D_inf_p", self.d_inf_p),
        ]
    }

    pub(crate) fn require_finite(&self, name: &'static str, value: f64) -> Result<f64> {
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::NonFiniteConstant { name, value })
        }
    }
}
