//! Geometric median of `X ~ N(mu, tau^2 I)` in `R^d`, `d >= 2`, with the
//! shifted loss `g(x, h) = |x - h| - |x|`. The objective is radial around
//! `mu`, so `G`, its gradient and its Hessian follow from the noncentral chi
//! mean profile `f(r) = E|Z - r u|`:
//! `G(h) - G(mu) = tau (f(rho) - f(0))` with `rho = |h - mu| / tau`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::special::{chi_mean, inverse_chi_mean, radial_profile};
use super::{check_dim, AssumptionConstants, ConstantsOptions, Problem, Suboptimality, VectorEstimate};
use crate::error::{Error, Result};
use crate::stats::{dist_sq, norm};

/// `(h - x) / |h - x|`, or [`Error::DegenerateSample`] when `h = x`.
pub fn geomedian_gradient(x: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    check_dim(x.len(), h.len())?;
    let mut out = vec![0.0; h.len()];
    geomedian_gradient_into(x, h, &mut out)?;
    Ok(out)
}

fn geomedian_gradient_into(x: &[f64], h: &[f64], out: &mut [f64]) -> Result<()> {
    for ((o, a), b) in out.iter_mut().zip(h).zip(x) {
        *o = a - b;
    }
    let n = norm(out);
    if n == 0.0 {
        return Err(Error::DegenerateSample);
    }
    out.iter_mut().for_each(|v| *v /= n);
    Ok(())
}

/// Points per unit radius when scanning `rho in (0, 1]` for the local
/// curvature constants.
const RADIAL_GRID: usize = 4000;

#[derive(Debug, Clone, PartialEq)]
pub struct GeometricMedian {
    mu: Vec<f64>,
    tau: f64,
}

impl GeometricMedian {
    pub fn new(mu: Vec<f64>, tau: f64) -> Result<Self> {
        if mu.len() < 2 {
            return Err(Error::InvalidProblem(
                "the Gaussian geometric-median model needs d >= 2 (the Hessian is unbounded for d = 1)".into(),
            ));
        }
        if mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidProblem("center must be finite".into()));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidProblem(format!("tau must be positive, got {tau}")));
        }
        Ok(Self { mu, tau })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    fn rho(&self, h: &[f64]) -> f64 {
        dist_sq(h, &self.mu).sqrt() / self.tau
    }
}

impl Problem for GeometricMedian {
    type Observation = Vec<f64>;

    fn name(&self) -> &'static str {
        "median"
    }

    fn dimension(&self) -> usize {
        self.mu.len()
    }

    fn new_observation(&self) -> Vec<f64> {
        vec![0.0; self.dimension()]
    }

    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, obs: &mut Vec<f64>) {
        for (x, m) in obs.iter_mut().zip(&self.mu) {
            let z: f64 = rng.sample(StandardNormal);
            *x = m + self.tau * z;
        }
    }

    fn loss(&self, x: &Vec<f64>, h: &[f64]) -> f64 {
        dist_sq(x, h).sqrt() - norm(x)
    }

    fn gradient_into(&self, x: &Vec<f64>, h: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.dimension(), h.len())?;
        check_dim(self.dimension(), out.len())?;
        geomedian_gradient_into(x, h, out)
    }

    fn optimum(&self) -> &[f64] {
        &self.mu
    }

    /// Exact, from the noncentral chi mean.
    fn suboptimality<R: Rng + ?Sized>(&self, h: &[f64], _budget: usize, _rng: &mut R) -> Result<Suboptimality> {
        check_dim(self.dimension(), h.len())?;
        let rho = self.rho(h);
        let value = self.tau * radial_profile(self.dimension(), rho).excess;
        Ok(Suboptimality::exact(value.max(0.0)))
    }

    /// `grad G(h) = f'(rho) (h - mu) / |h - mu|`.
    fn mean_gradient<R: Rng + ?Sized>(&self, h: &[f64], _budget: usize, _rng: &mut R) -> Result<VectorEstimate> {
        check_dim(self.dimension(), h.len())?;
        let rho = self.rho(h);
        if rho == 0.0 {
            return Ok(VectorEstimate::exact(vec![0.0; h.len()]));
        }
        let slope = radial_profile(self.dimension(), rho).slope;
        let dist = rho * self.tau;
        Ok(VectorEstimate::exact(
            h.iter().zip(&self.mu).map(|(a, m)| slope * (a - m) / dist).collect(),
        ))
    }

    fn hessian_at_optimum(&self) -> DMatrix<f64> {
        let d = self.dimension();
        DMatrix::identity(d, d) * (chi_mean(d) / (d as f64 * self.tau))
    }

    /// `delta(h) = (f'(rho) - f''(0) rho) (h - mu) / |h - mu|`.
    fn linearization_remainder<R: Rng + ?Sized>(
        &self,
        h: &[f64],
        _budget: usize,
        _rng: &mut R,
    ) -> Result<VectorEstimate> {
        check_dim(self.dimension(), h.len())?;
        let d = self.dimension();
        let rho = self.rho(h);
        if rho == 0.0 {
            return Ok(VectorEstimate::exact(vec![0.0; d]));
        }
        let radial = radial_profile(d, rho).slope - chi_mean(d) / d as f64 * rho;
        let dist = rho * self.tau;
        Ok(VectorEstimate::exact(
            h.iter().zip(&self.mu).map(|(a, m)| radial * (a - m) / dist).collect(),
        ))
    }

    /// Exact: unit-norm gradients give `C1 = C1' = 1`, `C2 = C2' = 0`. The
    /// Hessian `E[(I - u u^T)/|X - h|]` has norm at most `E[1/|X - h|]`, which
    /// is largest at `h = mu` for a centered Gaussian, so
    /// `L = E[1/|Z|]/tau`; the same bound doubled is a Lipschitz constant for
    /// `h -> E[u u^T]`. At the optimum `H = f''(0)/tau I` and
    /// `Sigma = I/d`, so `Tr(H^-1 Sigma H^-1) = 1/lambda_min^2`.
    ///
    /// Empirical: with `r_lambda0 = tau`, `lambda_0` and `C_lambda0` come from a
    /// dense scan of the exact radial profile over `rho in (0, 1]`, then the
    /// safety factor is applied.
    fn assumption_constants(&self, opts: &ConstantsOptions) -> Result<AssumptionConstants> {
        if !(opts.safety_factor >= 1.0) {
            return Err(Error::InvalidInput(format!(
                "safety factor must be >= 1, got {}",
                opts.safety_factor
            )));
        }
        let d = self.dimension();
        let tau = self.tau;
        let curvature0 = chi_mean(d) / d as f64;
        let lambda_min = curvature0 / tau;
        let mut min_eig = curvature0;
        let mut c_ratio = 0.0f64;
        for i in 1..=RADIAL_GRID {
            let rho = i as f64 / RADIAL_GRID as f64;
            let p = radial_profile(d, rho);
            min_eig = min_eig.min(p.curvature).min(p.slope / rho);
            c_ratio = c_ratio.max((p.slope - curvature0 * rho).abs() / (rho * rho));
        }
        let mut constants = AssumptionConstants {
            c1: 1.0,
            c2: 0.0,
            c1p: 1.0,
            c2p: 0.0,
            l_grad_g: inverse_chi_mean(d) / tau,
            lambda_min,
            lambda_0: min_eig / tau / opts.safety_factor,
            r_lambda0: tau,
            c_lambda0: c_ratio / (tau * tau) * opts.safety_factor,
            l_sigma: Some(2.0 * inverse_chi_mean(d) / tau),
            u0: 0.0,
            v0: 0.0,
            trace_term: Some(1.0 / (lambda_min * lambda_min)),
            provenance: Default::default(),
        };
        constants.mark_empirical("lambda_0");
        constants.mark_empirical("C_lambda0");
        Ok(constants)
    }

    fn scale(&self) -> f64 {
        self.tau
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::{finite_difference, rel_err};
    use super::*;
    use crate::stats::RunningStats;
    use rand::SeedableRng;
    use rand_xoshiro::Xoshiro256PlusPlus;

    #[test]
    fn gradient_examples() {
        let g = geomedian_gradient(&[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
        assert!(matches!(
            geomedian_gradient(&[1.0, 2.0], &[1.0, 2.0]),
            Err(Error::DegenerateSample)
        ));
    }

    #[test]
    fn gradients_are_unit_and_match_finite_differences() {
        let p = GeometricMedian::new(vec![0.0; 4], 1.0).unwrap();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(3);
        for _ in 0..100 {
            let x = p.sample(&mut rng);
            let h: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let g = p.gradient(&x, &h).unwrap();
            assert!((norm(&g) - 1.0).abs() < 1e-12);
            let fd = finite_difference(|v| p.loss(&x, v), &h);
            assert!(rel_err(&g, &fd) <= 1e-6, "{g:?} vs {fd:?}");
        }
    }

    #[test]
    fn suboptimality_matches_brute_force_in_two_dimensions() {
        let p = GeometricMedian::new(vec![0.0, 0.0], 1.0).unwrap();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(21);
        let exact = p.suboptimality(&[1.0, 0.0], 1, &mut rng).unwrap();
        assert!(exact.exact);
        let mut stats = RunningStats::new();
        let mut x = p.new_observation();
        for _ in 0..10_000_000 {
            p.sample_into(&mut rng, &mut x);
            stats.push(p.loss(&x, &[1.0, 0.0]));
        }
        assert!(
            (stats.mean() - exact.value).abs() <= 3.0 * (stats.stderr() + exact.stderr),
            "{} vs {} (stderr {})",
            stats.mean(),
            exact.value,
            stats.stderr()
        );
        assert_eq!(p.suboptimality(&[0.0, 0.0], 1, &mut rng).unwrap().value, 0.0);
    }

    #[test]
    fn exact_mean_gradient_matches_simulation() {
        let p = GeometricMedian::new(vec![1.0, -1.0, 0.5], 2.0).unwrap();
        let h = [2.0, 0.0, 0.0];
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(4);
        let exact = p.mean_gradient(&h, 0, &mut rng).unwrap();
        let mut stats = [RunningStats::new(); 3];
        let mut x = p.new_observation();
        for _ in 0..1_000_000 {
            p.sample_into(&mut rng, &mut x);
            let g = p.gradient(&x, &h).unwrap();
            for (s, v) in stats.iter_mut().zip(g) {
                s.push(v);
            }
        }
        for (s, e) in stats.iter().zip(&exact.value) {
            assert!((s.mean() - e).abs() < 4.0 * s.stderr());
        }
    }

    #[test]
    fn constants_are_consistent() {
        let p = GeometricMedian::new(vec![0.0; 3], 1.0).unwrap();
        let c = p.assumption_constants(&ConstantsOptions::default()).unwrap();
        assert_eq!((c.c1, c.c2, c.c1p, c.c2p), (1.0, 0.0, 1.0, 0.0));
        assert!(c.is_bounded_gradient());
        c.validate().unwrap();
        // For d = 3, lambda_min = E|Z|/3 = (2/3) sqrt(2/pi) = (2/3) E[1/|Z|].
        assert!((c.lambda_min - 2.0 / 3.0 * (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-14);
        assert!((c.l_grad_g - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-14);
        assert!(c.lambda_0 < c.lambda_min);
        assert_eq!(
            c.provenance_of("lambda_0"),
            super::super::Provenance::EmpiricalWithMargin
        );
    }

    /// Gradient norms are identically one, so the sampled maximum of both
    /// moments over many draws equals the stated constants.
    #[test]
    fn sampled_gradient_moments_are_one() {
        let p = GeometricMedian::new(vec![0.0; 3], 1.0).unwrap();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(9);
        let mut x = p.new_observation();
        let mut g = vec![0.0; 3];
        let h = [0.3, -0.2, 1.0];
        let mut worst = 0.0f64;
        for _ in 0..1_000_000 {
            p.sample_into(&mut rng, &mut x);
            p.gradient_into(&x, &h, &mut g).unwrap();
            let n2: f64 = g.iter().map(|v| v * v).sum();
            worst = worst.max((n2 - 1.0).abs()).max((n2 * n2 - 1.0).abs());
        }
        assert!(worst < 1e-12);
    }

    #[test]
    fn rejects_one_dimension() {
        assert!(GeometricMedian::new(vec![0.0], 1.0).is_err());
    }
}
