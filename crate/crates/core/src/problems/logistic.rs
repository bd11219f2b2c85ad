//! Well-specified logistic regression `g((phi, y), h) = log(1 + exp(-y phi^T h))`
//! with `phi` uniform on the ball of radius `B` in `R^d` and
//! `P(y = +1 | phi) = s(phi^T theta)`, `s` the standard sigmoid.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

use super::{
    check_dim, random_direction, AssumptionConstants, ConstantsOptions, Problem, Suboptimality, VectorEstimate,
};
use crate::error::{Error, Result};
use crate::stats::{dot, norm, RunningStats};

/// One `(phi, y)` pair with `y in {-1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticObservation {
    pub phi: Vec<f64>,
    pub y: f64,
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^t)` without overflow.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// `-y phi s(-y phi^T h)`.
pub fn logistic_gradient(obs: &LogisticObservation, h: &[f64]) -> Result<Vec<f64>> {
    check_dim(obs.phi.len(), h.len())?;
    let mut out = vec![0.0; h.len()];
    logistic_gradient_into(obs, h, &mut out);
    Ok(out)
}

fn logistic_gradient_into(obs: &LogisticObservation, h: &[f64], out: &mut [f64]) {
    let weight = -obs.y * sigmoid(-obs.y * dot(&obs.phi, h));
    for (o, p) in out.iter_mut().zip(&obs.phi) {
        *o = weight * p;
    }
}

/// Monte-Carlo sample count for the stored Hessian at the optimum.
const HESSIAN_SAMPLES: usize = 1_000_000;
const HESSIAN_SEED: u64 = 0x4e55_1a11;

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    theta: Vec<f64>,
    bound: f64,
    hessian: DMatrix<f64>,
}

impl LogisticRegression {
    pub fn new(theta: Vec<f64>, bound: f64) -> Result<Self> {
        if theta.is_empty() || theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidProblem("optimum must be a non-empty finite vector".into()));
        }
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(Error::InvalidProblem(format!("design bound must be positive, got {bound}")));
        }
        let mut p = Self {
            theta,
            bound,
            hessian: DMatrix::zeros(0, 0),
        };
        p.hessian = p.estimate_hessian();
        Ok(p)
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    fn sample_phi<R: Rng + ?Sized>(&self, rng: &mut R, phi: &mut [f64]) {
        random_direction(rng, phi);
        let radius = self.bound * rng.gen::<f64>().powf(1.0 / phi.len() as f64);
        phi.iter_mut().for_each(|v| *v *= radius);
    }

    /// `E[s'(phi^T theta) phi phi^T]`, symmetrized.
    fn estimate_hessian(&self) -> DMatrix<f64> {
        let d = self.dimension();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(HESSIAN_SEED);
        let mut phi = vec![0.0; d];
        let mut acc = DMatrix::<f64>::zeros(d, d);
        for _ in 0..HESSIAN_SAMPLES {
            self.sample_phi(&mut rng, &mut phi);
            let s = sigmoid(dot(&phi, &self.theta));
            let w = s * (1.0 - s);
            for i in 0..d {
                for j in 0..=i {
                    acc[(i, j)] += w * phi[i] * phi[j];
                }
            }
        }
        for i in 0..d {
            for j in 0..i {
                acc[(j, i)] = acc[(i, j)];
            }
        }
        acc / HESSIAN_SAMPLES as f64
    }

    /// `E[phi phi^T] = B^2/(d+2) I` for the uniform ball.
    fn design_second_moment(&self) -> f64 {
        self.bound * self.bound / (self.dimension() as f64 + 2.0)
    }

    /// Averages `f(phi)` over `budget` design draws, with `f` writing a vector.
    fn average<R: Rng + ?Sized>(
        &self,
        budget: usize,
        rng: &mut R,
        mut f: impl FnMut(&[f64], &mut [f64]),
    ) -> VectorEstimate {
        let d = self.dimension();
        let mut phi = vec![0.0; d];
        let mut out = vec![0.0; d];
        let mut stats = vec![RunningStats::new(); d];
        for _ in 0..budget.max(2) {
            self.sample_phi(rng, &mut phi);
            f(&phi, &mut out);
            for (s, v) in stats.iter_mut().zip(&out) {
                s.push(*v);
            }
        }
        VectorEstimate::from_stats(&stats)
    }
}

impl Problem for LogisticRegression {
    type Observation = LogisticObservation;

    fn name(&self) -> &'static str {
        "logistic"
    }

    fn dimension(&self) -> usize {
        self.theta.len()
    }

    fn new_observation(&self) -> LogisticObservation {
        LogisticObservation {
            phi: vec![0.0; self.dimension()],
            y: 1.0,
        }
    }

    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, obs: &mut LogisticObservation) {
        self.sample_phi(rng, &mut obs.phi);
        let p = sigmoid(dot(&obs.phi, &self.theta));
        obs.y = if rng.gen::<f64>() < p { 1.0 } else { -1.0 };
    }

    fn loss(&self, obs: &LogisticObservation, h: &[f64]) -> f64 {
        softplus(-obs.y * dot(&obs.phi, h))
    }

    fn gradient_into(&self, obs: &LogisticObservation, h: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.dimension(), h.len())?;
        check_dim(self.dimension(), out.len())?;
        logistic_gradient_into(obs, h, out);
        Ok(())
    }

    fn optimum(&self) -> &[f64] {
        &self.theta
    }

    /// Monte-Carlo over `phi` with the label integrated out exactly.
    fn suboptimality<R: Rng + ?Sized>(&self, h: &[f64], budget: usize, rng: &mut R) -> Result<Suboptimality> {
        check_dim(self.dimension(), h.len())?;
        if budget == 0 {
            return Err(Error::InvalidInput("suboptimality budget must be >= 1".into()));
        }
        let mut phi = vec![0.0; self.dimension()];
        let mut stats = RunningStats::new();
        for _ in 0..budget.max(2) {
            self.sample_phi(rng, &mut phi);
            let t_star = dot(&phi, &self.theta);
            let t = dot(&phi, h);
            let p = sigmoid(t_star);
            let gap = p * (softplus(-t) - softplus(-t_star)) + (1.0 - p) * (softplus(t) - softplus(t_star));
            stats.push(gap);
        }
        Suboptimality::estimated(&stats)
    }

    /// `E[(s(phi^T h) - s(phi^T theta)) phi]`.
    fn mean_gradient<R: Rng + ?Sized>(&self, h: &[f64], budget: usize, rng: &mut R) -> Result<VectorEstimate> {
        check_dim(self.dimension(), h.len())?;
        Ok(self.average(budget, rng, |phi, out| {
            let w = sigmoid(dot(phi, h)) - sigmoid(dot(phi, &self.theta));
            for (o, p) in out.iter_mut().zip(phi) {
                *o = w * p;
            }
        }))
    }

    fn hessian_at_optimum(&self) -> DMatrix<f64> {
        self.hessian.clone()
    }

    /// `E[(s(phi^T h) - s(phi^T theta) - s'(phi^T theta) phi^T (h - theta)) phi]`,
    /// so the same draws serve the gradient and its linear part.
    fn linearization_remainder<R: Rng + ?Sized>(
        &self,
        h: &[f64],
        budget: usize,
        rng: &mut R,
    ) -> Result<VectorEstimate> {
        check_dim(self.dimension(), h.len())?;
        Ok(self.average(budget, rng, |phi, out| {
            let t_star = dot(phi, &self.theta);
            let s = sigmoid(t_star);
            let w = sigmoid(dot(phi, h)) - s - s * (1.0 - s) * (dot(phi, h) - t_star);
            for (o, p) in out.iter_mut().zip(phi) {
                *o = w * p;
            }
        }))
    }

    /// Exact: `|grad g| <= |phi| <= B`, so `C1 = B^2`, `C1' = B^4`, `C2 = C2' = 0`;
    /// `s' <= 1/4` gives `L = B^2/4`. Since `|phi^T h| <= B |h|`, the Hessian
    /// `E[s'(phi^T h) phi phi^T]` is at least `s'(B |h|) B^2/(d+2)`, which gives
    /// `lambda_min` at `theta` and `lambda_0` on the unit ball around it.
    /// Taylor's bound with `sup |s''| = 1/(6 sqrt 3)` gives
    /// `C_lambda0 = B^3/(12 sqrt 3 (d+2))`, and `|d s^2/dt| <= 8/27` gives
    /// `L_Sigma = 8 B^3/27`.
    ///
    /// Empirical: `Sigma(theta) = H` for a well-specified model, so the trace
    /// term is `Tr(H^-1)` of the sampled Hessian times the safety factor.
    fn assumption_constants(&self, opts: &ConstantsOptions) -> Result<AssumptionConstants> {
        let b = self.bound;
        let d = self.dimension() as f64;
        let m2 = self.design_second_moment();
        let ds = |t: f64| {
            let s = sigmoid(t);
            s * (1.0 - s)
        };
        let theta_norm = norm(&self.theta);
        let inverse = self
            .hessian
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Assumption("sampled Hessian at the optimum is singular".into()))?;
        let mut constants = AssumptionConstants {
            c1: b * b,
            c2: 0.0,
            c1p: b.powi(4),
            c2p: 0.0,
            l_grad_g: 0.25 * b * b,
            lambda_min: ds(b * theta_norm) * m2,
            lambda_0: ds(b * (theta_norm + 1.0)) * m2,
            r_lambda0: 1.0,
            c_lambda0: b.powi(3) / (12.0 * 3f64.sqrt() * (d + 2.0)),
            l_sigma: Some(8.0 * b.powi(3) / 27.0),
            u0: 0.0,
            v0: 0.0,
            trace_term: Some(inverse.trace() * opts.safety_factor),
            provenance: Default::default(),
        };
        constants.mark_empirical("trace_term");
        Ok(constants)
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::{finite_difference, rel_err};
    use super::*;

    fn obs(phi: Vec<f64>, y: f64) -> LogisticObservation {
        LogisticObservation { phi, y }
    }

    #[test]
    fn gradient_examples() {
        let o = obs(vec![1.0, -2.0], 1.0);
        let g = logistic_gradient(&o, &[0.0, 0.0]).unwrap();
        assert_eq!(g, vec![-0.5, 1.0]);
        let o = obs(vec![1.0, 1.0], -1.0);
        let g = logistic_gradient(&o, &[-400.0, -400.0]).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-300));
        // Large margins of either sign stay finite.
        for t in [-700.0, 700.0] {
            let o = obs(vec![1.0], 1.0);
            let g = logistic_gradient(&o, &[t]).unwrap();
            assert!(g[0].is_finite());
            let p = LogisticRegression::new(vec![0.0], 1.0).unwrap();
            assert!(p.loss(&o, &[t]).is_finite());
        }
    }

    #[test]
    fn gradient_matches_finite_differences_and_is_bounded() {
        let p = LogisticRegression::new(vec![0.5, -0.5, 0.25], 2.0).unwrap();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(17);
        for _ in 0..100 {
            let o = p.sample(&mut rng);
            assert!(norm(&o.phi) <= 2.0);
            let h: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let g = p.gradient(&o, &h).unwrap();
            assert!(norm(&g) <= 2.0);
            let fd = finite_difference(|x| p.loss(&o, x), &h);
            assert!(rel_err(&g, &fd) <= 1e-6, "{g:?} vs {fd:?}");
        }
    }

    #[test]
    fn constants_match_examples() {
        let p = LogisticRegression::new(vec![0.3, 0.1], 2.0).unwrap();
        let c = p.assumption_constants(&ConstantsOptions::default()).unwrap();
        assert_eq!((c.c1, c.c1p, c.l_grad_g), (4.0, 16.0, 1.0));
        assert!(c.is_bounded_gradient());
        c.validate().unwrap();
        // The certified lambda_min never exceeds the sampled Hessian's.
        let eig = p.hessian_at_optimum().symmetric_eigen().eigenvalues.min();
        assert!(c.lambda_min <= eig);
    }

    /// Sampled maxima of `|grad g|^2` and of the Hessian weight stay below the
    /// stated constants.
    #[test]
    fn sampled_maxima_respect_constants() {
        let p = LogisticRegression::new(vec![1.0, -1.0], 2.0).unwrap();
        let c = p.assumption_constants(&ConstantsOptions::default()).unwrap();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(23);
        let mut worst_grad = 0.0f64;
        let mut worst_curv = 0.0f64;
        for _ in 0..200_000 {
            let o = p.sample(&mut rng);
            let h = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let g = p.gradient(&o, &h).unwrap();
            worst_grad = worst_grad.max(g.iter().map(|v| v * v).sum());
            let s = sigmoid(dot(&o.phi, &h));
            worst_curv = worst_curv.max(s * (1.0 - s) * dot(&o.phi, &o.phi));
        }
        assert!(worst_grad <= c.c1);
        assert!(worst_curv <= c.l_grad_g);
    }

    #[test]
    fn zero_optimum_hessian_is_isotropic() {
        let p = LogisticRegression::new(vec![0.0; 3], 1.0).unwrap();
        let want = 0.25 / 5.0;
        let h = p.hessian_at_optimum();
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { want } else { 0.0 };
                assert!((h[(i, j)] - target).abs() < 3e-4, "{i},{j}: {}", h[(i, j)]);
            }
        }
    }

    #[test]
    fn suboptimality_at_optimum_is_zero() {
        let p = LogisticRegression::new(vec![0.5, 0.5], 1.0).unwrap();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(1);
        let s = p.suboptimality(&[0.5, 0.5], 1000, &mut rng).unwrap();
        assert!(s.value.abs() <= 3.0 * s.stderr + 1e-15);
        let s = p.suboptimality(&[1.5, 0.5], 20_000, &mut rng).unwrap();
        assert!(s.value > 0.0 && !s.exact);
    }
}
