//! Least-squares regression `g((phi, y), h) = (y - phi^T h)^2 / 2` with an
//! isotropic Gaussian design `phi ~ N(0, s^2 I)` and additive noise
//! `y = phi^T theta + eps`, `eps ~ N(0, sigma_eps^2)`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{check_dim, AssumptionConstants, ConstantsOptions, Problem, Suboptimality, VectorEstimate};
use crate::error::{Error, Result};
use crate::stats::{dist_sq, dot};

/// One `(phi, y)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LinregObservation {
    pub phi: Vec<f64>,
    pub y: f64,
}

/// `(phi^T h - y) phi`.
pub fn linreg_gradient(obs: &LinregObservation, h: &[f64]) -> Result<Vec<f64>> {
    check_dim(obs.phi.len(), h.len())?;
    let mut out = vec![0.0; h.len()];
    linreg_gradient_into(obs, h, &mut out);
    Ok(out)
}

fn linreg_gradient_into(obs: &LinregObservation, h: &[f64], out: &mut [f64]) {
    let residual = dot(&obs.phi, h) - obs.y;
    for (o, p) in out.iter_mut().zip(&obs.phi) {
        *o = residual * p;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearRegression {
    theta: Vec<f64>,
    design_sd: f64,
    noise_sd: f64,
    radius: f64,
}

impl LinearRegression {
    /// `radius` is the admissible distance from the optimum over which the
    /// local Lipschitz constant of the gradient covariance is certified.
    pub fn new(theta: Vec<f64>, design_sd: f64, noise_sd: f64, radius: f64) -> Result<Self> {
        if theta.is_empty() || theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidProblem("optimum must be a non-empty finite vector".into()));
        }
        if !(design_sd > 0.0 && design_sd.is_finite()) {
            return Err(Error::InvalidProblem(format!("design scale must be positive, got {design_sd}")));
        }
        if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
            return Err(Error::InvalidProblem(format!("noise sd must be >= 0, got {noise_sd}")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidProblem(format!("admissible radius must be positive, got {radius}")));
        }
        Ok(Self {
            theta,
            design_sd,
            noise_sd,
            radius,
        })
    }

    pub fn design_sd(&self) -> f64 {
        self.design_sd
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }
}

impl Problem for LinearRegression {
    type Observation = LinregObservation;

    fn name(&self) -> &'static str {
        "linreg"
    }

    fn dimension(&self) -> usize {
        self.theta.len()
    }

    fn new_observation(&self) -> LinregObservation {
        LinregObservation {
            phi: vec![0.0; self.dimension()],
            y: 0.0,
        }
    }

    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, obs: &mut LinregObservation) {
        for p in obs.phi.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *p = self.design_sd * z;
        }
        let eps: f64 = rng.sample(StandardNormal);
        obs.y = dot(&obs.phi, &self.theta) + self.noise_sd * eps;
    }

    fn loss(&self, obs: &LinregObservation, h: &[f64]) -> f64 {
        let r = obs.y - dot(&obs.phi, h);
        0.5 * r * r
    }

    fn gradient_into(&self, obs: &LinregObservation, h: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.dimension(), h.len())?;
        check_dim(self.dimension(), out.len())?;
        linreg_gradient_into(obs, h, out);
        Ok(())
    }

    fn optimum(&self) -> &[f64] {
        &self.theta
    }

    /// `s^2 |h - theta|^2 / 2`, exact.
    fn suboptimality<R: Rng + ?Sized>(&self, h: &[f64], _budget: usize, _rng: &mut R) -> Result<Suboptimality> {
        check_dim(self.dimension(), h.len())?;
        let s2 = self.design_sd * self.design_sd;
        Ok(Suboptimality::exact(0.5 * s2 * dist_sq(h, &self.theta)))
    }

    fn mean_gradient<R: Rng + ?Sized>(&self, h: &[f64], _budget: usize, _rng: &mut R) -> Result<VectorEstimate> {
        check_dim(self.dimension(), h.len())?;
        let s2 = self.design_sd * self.design_sd;
        Ok(VectorEstimate::exact(
            h.iter().zip(&self.theta).map(|(a, b)| s2 * (a - b)).collect(),
        ))
    }

    fn hessian_at_optimum(&self) -> DMatrix<f64> {
        let d = self.dimension();
        DMatrix::identity(d, d) * (self.design_sd * self.design_sd)
    }

    fn linearization_remainder<R: Rng + ?Sized>(
        &self,
        h: &[f64],
        _budget: usize,
        _rng: &mut R,
    ) -> Result<VectorEstimate> {
        check_dim(self.dimension(), h.len())?;
        Ok(VectorEstimate::exact(vec![0.0; h.len()]))
    }

    /// Gaussian moment identities give every gradient-moment constant in closed form:
    /// with `e = h - theta`, `t = |e|^2`,
    /// `E|grad|^2 = s^4 (d+2) t + d sigma^2 s^2`, and
    /// `E|grad|^4 = 3 s^8 (d+4)(d+6) t^2 + 6 sigma^2 s^6 (d+2)(d+4) t + 3 sigma^4 s^4 d(d+2)`;
    /// the middle term is split by `s^2 t <= (1 + s^4 t^2)/2`.
    /// `Sigma(h) = s^4 (t I + 2 e e^T) + sigma^2 s^2 I` is only locally
    /// Lipschitz, with constant `6 s^4 R` on the ball of radius `R`.
    fn assumption_constants(&self, _opts: &ConstantsOptions) -> Result<AssumptionConstants> {
        let d = self.dimension() as f64;
        let s2 = self.design_sd * self.design_sd;
        let s4 = s2 * s2;
        let v = self.noise_sd * self.noise_sd;
        let k = 12.0 * v * s4 * (d + 2.0) * (d + 4.0);
        let mut provenance = BTreeMap::new();
        provenance.insert(
            "L_Sigma".to_string(),
            super::Provenance::EmpiricalWithMargin,
        );
        Ok(AssumptionConstants {
            c1: d * v * s2,
            c2: 2.0 * (d + 2.0) * s2,
            c1p: 3.0 * v * v * s4 * d * (d + 2.0) + 0.25 * k,
            c2p: 12.0 * s4 * (d + 4.0) * (d + 6.0) + k,
            l_grad_g: s2,
            lambda_min: s2,
            lambda_0: s2,
            r_lambda0: f64::INFINITY,
            c_lambda0: 0.0,
            l_sigma: Some(6.0 * s4 * self.radius),
            u0: 0.0,
            v0: 0.0,
            trace_term: Some(d * v / s2),
            provenance,
        })
    }
}
