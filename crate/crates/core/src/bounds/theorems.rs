//! The eight explicit bounds, each returned as a per-term breakdown.
//!
//! Squared bounds (the first four) control `E[(G(theta_n) - G(theta))^2]` or
//! `E|theta_n - theta|^2`; root bounds (the last four) control
//! `sqrt(E|bar theta_n - theta|^2)`. The first entry of every breakdown is the
//! leading term.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::derived::DerivedConstants;
use super::mul0;
use crate::error::{Error, Result};

/// Which bound to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TheoremId {
    /// Squared suboptimality, unbounded gradients.
    SuboptimalityUnbounded,
    /// Squared iterate error, unbounded gradients.
    IterateUnbounded,
    /// Squared suboptimality, bounded gradients.
    SuboptimalityBounded,
    /// Squared iterate error, bounded gradients.
    IterateBounded,
    /// Root averaged error, unbounded gradients.
    AveragedUnbounded,
    /// Root averaged error with the Cramer-Rao leading term, unbounded gradients.
    AveragedUnboundedLipschitz,
    /// Root averaged error, bounded gradients.
    AveragedBounded,
    /// Root averaged error with the Cramer-Rao leading term, bounded gradients.
    AveragedBoundedLipschitz,
}

/// The quantity a bound controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quantity {
    /// `E[(G(theta_n) - G(theta))^2]`
    SquaredSuboptimality,
    /// `E|theta_n - theta|^2`
    SquaredIterateError,
    /// `sqrt(E|bar theta_n - theta|^2)`
    RootAveragedError,
}

impl Quantity {
    /// Root quantities compare against the square root of an upper
    /// confidence limit on a mean of squares.
    pub fn is_root(self) -> bool {
        matches!(self, Quantity::RootAveragedError)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Quantity::SquaredSuboptimality => "mean_sq_subopt",
            Quantity::SquaredIterateError => "mean_sq_sgd",
            Quantity::RootAveragedError => "root_mean_sq_avg",
        }
    }
}

impl TheoremId {
    pub const ALL: [TheoremId; 8] = [
        TheoremId::SuboptimalityUnbounded,
        TheoremId::IterateUnbounded,
        TheoremId::SuboptimalityBounded,
        TheoremId::IterateBounded,
        TheoremId::AveragedUnbounded,
        TheoremId::AveragedUnboundedLipschitz,
        TheoremId::AveragedBounded,
        TheoremId::AveragedBoundedLipschitz,
    ];

    /// Short token used in configs and CSV files.
    pub fn token(self) -> &'static str {
        match self {
            TheoremId::SuboptimalityUnbounded => "lemma1",
            TheoremId::IterateUnbounded => "thm1",
            TheoremId::SuboptimalityBounded => "lemma2",
            TheoremId::IterateBounded => "thm2",
            TheoremId::AveragedUnbounded => "thm3",
            TheoremId::AveragedUnboundedLipschitz => "thm4",
            TheoremId::AveragedBounded => "thm5",
            TheoremId::AveragedBoundedLipschitz => "thm6",
        }
    }

    pub fn quantity(self) -> Quantity {
        match self {
            TheoremId::SuboptimalityUnbounded | TheoremId::SuboptimalityBounded => Quantity::SquaredSuboptimality,
            TheoremId::IterateUnbounded | TheoremId::IterateBounded => Quantity::SquaredIterateError,
            _ => Quantity::RootAveragedError,
        }
    }

    /// True for the bounds that assume `C2 = C2' = 0`.
    pub fn needs_bounded_gradient(self) -> bool {
        matches!(
            self,
            TheoremId::SuboptimalityBounded
                | TheoremId::IterateBounded
                | TheoremId::AveragedBounded
                | TheoremId::AveragedBoundedLipschitz
        )
    }

    /// True for the bounds that need `L_Sigma` and the trace term.
    pub fn needs_lipschitz_covariance(self) -> bool {
        matches!(
            self,
            TheoremId::AveragedUnboundedLipschitz | TheoremId::AveragedBoundedLipschitz
        )
    }

    /// Smallest admissible step index.
    pub fn first_index(self) -> u64 {
        if self.quantity().is_root() {
            0
        } else {
            1
        }
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for TheoremId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TheoremId::ALL
            .iter()
            .copied()
            .find(|t| t.token() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown theorem id {s:?}")))
    }
}

/// A bound at one index, split into its additive terms.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundBreakdown {
    pub theorem: TheoremId,
    pub n: u64,
    /// `(label, value)`; the first entry is the leading term.
    pub terms: Vec<(&'static str, f64)>,
}

impl BoundBreakdown {
    pub fn total(&self) -> f64 {
        self.terms.iter().map(|(_, v)| v).sum()
    }

    pub fn leading(&self) -> f64 {
        self.terms[0].1
    }

    pub fn term(&self, label: &str) -> Option<f64> {
        self.terms.iter().find(|(l, _)| *l == label).map(|(_, v)| *v)
    }
}

/// Checks the theorem's preconditions against the constants.
pub fn check_applicable(theorem: TheoremId, derived: &DerivedConstants) -> Result<()> {
    let k = &derived.constants;
    if theorem.needs_bounded_gradient() && !k.is_bounded_gradient() {
        return Err(Error::Inapplicable {
            theorem: theorem.token(),
            reason: format!("requires C2 = C2' = 0, got C2 = {}, C2' = {}", k.c2, k.c2p),
        });
    }
    if theorem.needs_lipschitz_covariance() && (k.l_sigma.is_none() || k.trace_term.is_none()) {
        return Err(Error::Inapplicable {
            theorem: theorem.token(),
            reason: "requires L_Sigma and Tr(H^-1 Sigma H^-1)".into(),
        });
    }
    Ok(())
}

/// Evaluates `theorem` at `n` with its term breakdown.
pub fn evaluate(theorem: TheoremId, derived: &DerivedConstants, n: u64) -> Result<BoundBreakdown> {
    check_applicable(theorem, derived)?;
    if n < theorem.first_index() {
        return Err(Error::InvalidInput(format!("{theorem} is stated for n >= 1, got n = 0")));
    }
    let e = Eval::new(derived, n);
    let terms = match theorem {
        TheoremId::SuboptimalityUnbounded => e.lemma1()?,
        TheoremId::IterateUnbounded => e.theorem1()?,
        TheoremId::SuboptimalityBounded => e.lemma2()?,
        TheoremId::IterateBounded => e.theorem2()?,
        TheoremId::AveragedUnbounded => e.theorem3()?,
        TheoremId::AveragedUnboundedLipschitz => e.theorem4()?,
        TheoremId::AveragedBounded => e.theorem5()?,
        TheoremId::AveragedBoundedLipschitz => e.theorem6()?,
    };
    debug_assert!(terms.iter().all(|(_, v)| *v >= 0.0));
    Ok(BoundBreakdown { theorem, n, terms })
}

pub fn lemma1_bound(n: u64, derived: &DerivedConstants) -> Result<f64> {
    Ok(evaluate(TheoremId::SuboptimalityUnbounded, derived, n)?.total())
}

pub fn theorem1_bound(n: u64, derived: &DerivedConstants) -> Result<f64> {
    Ok(evaluate(TheoremId::IterateUnbounded, derived, n)?.total())
}

pub fn lemma2_bound(n: u64, derived: &DerivedConstants) -> Result<f64> {
    Ok(evaluate(TheoremId::SuboptimalityBounded, derived, n)?.total())
}

pub fn theorem2_bound(n: u64, derived: &DerivedConstants) -> Result<f64> {
    Ok(evaluate(TheoremId::IterateBounded, derived, n)?.total())
}

pub fn theorem3_bound(n: u64, derived: &DerivedConstants) -> Result<f64> {
    Ok(evaluate(TheoremId::AveragedUnbounded, derived, n)?.total())
}

pub fn theorem4_bound(n: u64, derived: &DerivedConstants) -> Result<f64> {
    Ok(evaluate(TheoremId::AveragedUnboundedLipschitz, derived, n)?.total())
}

pub fn theorem5_bound(n: u64, derived: &DerivedConstants) -> Result<f64> {
    Ok(evaluate(TheoremId::AveragedBounded, derived, n)?.total())
}

pub fn theorem6_bound(n: u64, derived: &DerivedConstants) -> Result<f64> {
    Ok(evaluate(TheoremId::AveragedBoundedLipschitz, derived, n)?.total())
}

/// Shared per-index quantities.
struct Eval<'a> {
    d: &'a DerivedConstants,
    c: f64,
    alpha: f64,
    lam: f64,
    sigma: f64,
    /// `n^(1 - alpha)`
    np: f64,
    /// `n + 1`
    m: f64,
}

impl<'a> Eval<'a> {
    fn new(d: &'a DerivedConstants, n: u64) -> Self {
        let alpha = d.schedule.alpha();
        Self {
            d,
            c: d.schedule.c_gamma(),
            alpha,
            lam: d.constants.lambda_min,
            sigma: d.sigma2.sqrt(),
            np: (n as f64).powf(1.0 - alpha),
            m: n as f64 + 1.0,
        }
    }

    fn finite(&self, name: &'static str, v: f64) -> Result<f64> {
        self.d.require_finite(name, v)
    }

    /// `exp(-rate * c * n^(1 - alpha))`
    fn decay(&self, rate: f64) -> f64 {
        (-rate * self.c * self.np).exp()
    }

    fn n_pow(&self, e: f64) -> f64 {
        (self.m - 1.0).powf(e)
    }

    fn lemma1(&self) -> Result<Vec<(&'static str, f64)>> {
        let d = self.d;
        let (c, a) = (self.c, self.alpha);
        let c1 = if d.constants.u0 == 0.0 && d.sigma2 == 0.0 {
            0.0
        } else {
            self.finite("c1", d.c1)?
        };
        Ok(vec![
            ("noise", 2f64.powf(1.0 + 4.0 * a) * d.sigma2 * c * c / d.a0 * self.n_pow(-2.0 * a)),
            ("init", mul0(c1, self.decay(0.25 * d.a0))),
        ])
    }

    fn theorem1(&self) -> Result<Vec<(&'static str, f64)>> {
        let d = self.d;
        let (c, a, lam) = (self.c, self.alpha, self.lam);
        let ld2 = d.l_delta * d.l_delta;
        let big_a = self.finite("A", d.big_a)?;
        let c1_term = if ld2 == 0.0 {
            0.0
        } else {
            self.finite("c1", d.c1)? * 2.0 * ld2 / (lam * lam) * self.decay(d.a0 / 8.0)
        };
        Ok(vec![
            ("main", 2f64.powf(1.0 + a) * d.constants.c1 * c / lam * self.n_pow(-a)),
            ("init", mul0(big_a, self.decay(0.25 * lam))),
            ("delta_init", c1_term),
            (
                "delta_noise",
                mul0(
                    2f64.powf(2.0 + 8.0 * a) * d.sigma2 * c * c / d.a0,
                    ld2 / (lam * lam) * self.n_pow(-2.0 * a),
                ),
            ),
        ])
    }

    fn lemma2(&self) -> Result<Vec<(&'static str, f64)>> {
        let d = self.d;
        let c_n0p = self.finite("c_n0p", d.c_n0p)?;
        Ok(vec![
            ("noise", d.sigma2 * d.m0 * self.c * self.c * self.n_pow(-2.0 * self.alpha)),
            ("init", mul0(c_n0p, self.decay(0.5 * d.a0))),
        ])
    }

    fn theorem2(&self) -> Result<Vec<(&'static str, f64)>> {
        let d = self.d;
        let (c, a, lam) = (self.c, self.alpha, self.lam);
        let ld2 = d.l_delta * d.l_delta;
        let a_prime = self.finite("A_prime", d.a_prime)?;
        let c_n0p = if ld2 == 0.0 { 0.0 } else { self.finite("c_n0p", d.c_n0p)? };
        Ok(vec![
            ("main", 2f64.powf(a) * d.constants.c1 * c / lam * self.n_pow(-a)),
            ("init", mul0(a_prime, self.decay(lam))),
            ("delta_init", mul0(c_n0p * ld2 / (lam * lam), self.decay(0.25 * d.a0))),
            (
                "delta_noise",
                ld2 * c * c * d.sigma2 * d.m0 / (lam * lam) * self.n_pow(-2.0 * a),
            ),
        ])
    }

    /// Terms of the unbounded-case averaged display before the final division;
    /// `lipschitz` selects the covariance-Lipschitz variant.
    fn averaged_unbounded(&self, lipschitz: bool) -> Result<Vec<(&'static str, f64)>> {
        let d = self.d;
        let k = &d.constants;
        let (c, a, lam, sigma, m) = (self.c, self.alpha, self.lam, self.sigma, self.m);
        let ld = d.l_delta;
        let sqrt_a = self.finite("A", d.big_a)?.sqrt();
        let (c1, a_inf, d_inf, b_inf) = if ld == 0.0 {
            (0.0, self.finite("A_inf", d.a_inf)?, 0.0, d.b_inf)
        } else {
            (
                self.finite("c1", d.c1)?,
                self.finite("A_inf", d.a_inf)?,
                self.finite("D_inf", d.d_inf)?,
                self.finite("B_inf", d.b_inf)?,
            )
        };
        let sqrt_c2_b = if k.c2 == 0.0 {
            0.0
        } else {
            k.c2.sqrt() * self.finite("B_inf", d.b_inf)?.sqrt()
        };
        let log_term = if m > 1.0 { m.ln() / m } else { 0.0 };
        let common_rest = a_inf + d_inf + mul0(ld, b_inf);
        let exp_a = sqrt_a / c * self.decay(lam / 8.0) / m.powf(1.0 - a);
        let exp_c1 = mul0(2f64.sqrt() * c1.sqrt() * ld / c, self.decay(d.a0 / 16.0)) / m.powf(1.0 - a);
        let delta_rate = ld * 2f64.powf(0.5 + 2.0 * a) * sigma * c / (d.a0.sqrt() * (1.0 - a)) * m.powf(-a);
        let log_coef = 2f64.powf(1.0 + 4.0 * a) * sigma * ld / (d.a0.sqrt() * lam);
        if !lipschitz {
            Ok(vec![
                ("leading", k.c1.sqrt() / m.sqrt()),
                ("delta_rate", delta_rate),
                ("step", 2f64.powf(0.5 * (1.0 + a)) * 5.0 * k.c1.sqrt() / (c.sqrt() * lam.sqrt()) * m.powf(-(1.0 - 0.5 * a))),
                (
                    "martingale",
                    k.c2.sqrt() * 2f64.powf(0.25 + a) * sigma.sqrt() * c.sqrt()
                        / (d.a0.powf(0.25) * (1.0 - a).sqrt())
                        * m.powf(-(0.5 + 0.5 * a)),
                ),
                ("log", log_coef * log_term),
                ("rest", (common_rest + sqrt_c2_b + k.v0.sqrt() / c.sqrt()) / m),
                ("exp_init", exp_a),
                ("exp_delta", exp_c1 / lam),
            ])
        } else {
            let l_sigma = k.l_sigma.unwrap_or(0.0);
            let sls = l_sigma.sqrt();
            let trace = k.trace_term.unwrap_or(0.0);
            let rest = common_rest
                + (sls + 1.0 / c.sqrt()) * k.v0.sqrt()
                + sls * c * a_inf
                + sls * c * d_inf
                + 2f64.powf(1.0 + 4.0 * a) * sls * sigma * c * ld * (2.0 * a).sqrt() / d.a0.sqrt()
                    / (lam * (2.0 * a - 1.0).sqrt());
            Ok(vec![
                ("leading", trace.sqrt() / m.sqrt()),
                ("delta_rate", delta_rate / lam),
                (
                    "step",
                    2f64.powf(0.5 * (1.0 + a)) * 5.0 * k.c1.sqrt() / (c.sqrt() * lam.powf(1.5)) * m.powf(-(1.0 - 0.5 * a)),
                ),
                (
                    "covariance",
                    2f64.powf(0.5 + 0.5 * a) * k.c1.sqrt() * sls * c.sqrt() / (lam.powf(1.5) * (1.0 - a).sqrt())
                        * m.powf(-(0.5 + 0.5 * a)),
                ),
                ("log", log_coef / lam * log_term),
                ("rest", rest / (lam * m)),
                ("exp_init", exp_a / lam),
                ("exp_delta", exp_c1 / (lam * lam)),
            ])
        }
    }

    fn theorem3(&self) -> Result<Vec<(&'static str, f64)>> {
        let lam = self.lam;
        Ok(self
            .averaged_unbounded(false)?
            .into_iter()
            .map(|(l, v)| (l, v / lam))
            .collect())
    }

    fn theorem4(&self) -> Result<Vec<(&'static str, f64)>> {
        self.averaged_unbounded(true)
    }

    fn averaged_bounded(&self, lipschitz: bool) -> Result<Vec<(&'static str, f64)>> {
        let d = self.d;
        let k = &d.constants;
        let (c, a, lam, sigma, m) = (self.c, self.alpha, self.lam, self.sigma, self.m);
        let ld = d.l_delta;
        let sqrt_m0 = d.m0.sqrt();
        let sqrt_ap = self.finite("A_prime", d.a_prime)?.sqrt();
        let a_inf_p = self.finite("A_inf_p", d.a_inf_p)?;
        let (sqrt_cn, d_inf_p, b_inf_p) = if ld == 0.0 {
            (0.0, 0.0, 0.0)
        } else {
            (
                self.finite("c_n0p", d.c_n0p)?.sqrt(),
                self.finite("D_inf_p", d.d_inf_p)?,
                self.finite("B_inf_p", d.b_inf_p)?,
            )
        };
        let log_term = if m > 1.0 { m.ln() / m } else { 0.0 };
        let delta_rate = ld * sigma * c * sqrt_m0 / (1.0 - a) * m.powf(-a);
        let log_coef = sigma * ld * sqrt_m0 / lam;
        let exp_a = sqrt_ap / c * self.decay(0.5 * lam) / m.powf(1.0 - a);
        let exp_c = sqrt_cn * ld / c * self.decay(d.a0 / 8.0) / m.powf(1.0 - a);
        if !lipschitz {
            Ok(vec![
                ("leading", k.c1.sqrt() / m.sqrt()),
                ("delta_rate", delta_rate),
                ("step", 2f64.powf(0.5 * a) * 5.0 * k.c1.sqrt() / (c.sqrt() * lam.sqrt()) * m.powf(-(1.0 - 0.5 * a))),
                ("log", log_coef * log_term),
                ("rest", (log_coef + a_inf_p + d_inf_p + ld * b_inf_p) / m),
                ("exp_init", exp_a),
                ("exp_delta", exp_c / lam),
            ])
        } else {
            let sls = k.l_sigma.unwrap_or(0.0).sqrt();
            let trace = k.trace_term.unwrap_or(0.0);
            let rest = (sigma + sls * c * d.k2.sqrt()) * ld * sqrt_m0 / lam
                + a_inf_p
                + d_inf_p
                + ld * b_inf_p
                + sls * k.v0.sqrt()
                + sls * c * a_inf_p
                + sls * c * d_inf_p;
            Ok(vec![
                ("leading", trace.sqrt() / m.sqrt()),
                ("delta_rate", delta_rate / lam),
                (
                    "step",
                    2f64.powf(0.5 * a) * 5.0 * k.c1.sqrt() / c.sqrt() / lam.powf(1.5) * m.powf(-(1.0 - 0.5 * a)),
                ),
                (
                    "covariance",
                    sls * 2f64.powf(0.5 * a) * k.c1.sqrt() / (1.0 - a).sqrt() / lam.powf(1.5) * m.powf(-(0.5 + 0.5 * a)),
                ),
                ("log", log_coef / lam * log_term),
                ("rest", rest / (m * lam)),
                ("exp_init", exp_a / lam),
                ("exp_delta", exp_c / (lam * lam)),
            ])
        }
    }

    fn theorem5(&self) -> Result<Vec<(&'static str, f64)>> {
        let lam = self.lam;
        Ok(self
            .averaged_bounded(false)?
            .into_iter()
            .map(|(l, v)| (l, v / lam))
            .collect())
    }

    fn theorem6(&self) -> Result<Vec<(&'static str, f64)>> {
        self.averaged_bounded(true)
    }
}
