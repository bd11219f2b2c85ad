//! Plain stochastic gradient recursion, its running (Polyak-Ruppert) average
//! and the polynomial step schedule `gamma_n = c_gamma * n^(-alpha)`.
//!
//! All operations are deterministic state transitions; randomness lives in the
//! gradient samples supplied by the caller.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Polynomially decaying learning rate `gamma_n = c_gamma * n^(-alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    c_gamma: f64,
    alpha: f64,
}

impl StepSchedule {
    /// Requires `c_gamma > 0` and `alpha` strictly inside `(1/2, 1)`.
    pub fn new(c_gamma: f64, alpha: f64) -> Result<Self> {
        if !(c_gamma.is_finite() && c_gamma > 0.0) {
            return Err(Error::InvalidSchedule(format!(
                "c_gamma must be finite and positive, got {c_gamma}"
            )));
        }
        if !(alpha > 0.5 && alpha < 1.0) {
            return Err(Error::InvalidSchedule(format!(
                "alpha must lie strictly inside (1/2, 1), got {alpha}"
            )));
        }
        Ok(Self { c_gamma, alpha })
    }

    pub fn c_gamma(&self) -> f64 {
        self.c_gamma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `gamma_n` for `n >= 1`. The recursion never uses `gamma_0`.
    pub fn step_size(&self, n: u64) -> Result<f64> {
        if n == 0 {
            return Err(Error::ZeroStepIndex);
        }
        Ok(self.gamma(n))
    }

    /// Unchecked variant for hot loops; `n` must be at least 1.
    #[inline]
    pub(crate) fn gamma(&self, n: u64) -> f64 {
        debug_assert!(n >= 1);
        self.c_gamma * (n as f64).powf(-self.alpha)
    }
}

/// Free-function form of [`StepSchedule::step_size`].
pub fn step_size(schedule: &StepSchedule, n: u64) -> Result<f64> {
    schedule.step_size(n)
}

/// Current SGD iterate, its running average and the iteration count.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    theta: Vec<f64>,
    theta_bar: Vec<f64>,
    n: u64,
}

impl EstimatorState {
    /// Starts at `theta0` with `theta_bar = theta0` and `n = 0`.
    pub fn new(theta0: Vec<f64>) -> Result<Self> {
        if theta0.is_empty() {
            return Err(Error::InvalidInput("initial point must have dimension >= 1".into()));
        }
        if let Some(i) = theta0.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "initial point has a non-finite component at index {i}"
            )));
        }
        Ok(Self {
            theta_bar: theta0.clone(),
            theta: theta0,
            n: 0,
        })
    }

    /// Starts at the origin of `R^dim`.
    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim])
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_bar(&self) -> &[f64] {
        &self.theta_bar
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn dimension(&self) -> usize {
        self.theta.len()
    }

    /// One SGD step `theta_{n+1} = theta_n - gamma_{n+1} * g`, followed by the
    /// running-average update. `gradient_sample` must have been evaluated at
    /// the current iterate `theta_n`.
    ///
    /// The state is left untouched when an error is returned.
    pub fn sgd_step(&mut self, gradient_sample: &[f64], schedule: &StepSchedule) -> Result<()> {
        check_dim(self.theta.len(), gradient_sample.len())?;
        if let Some(index) = gradient_sample.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { index });
        }
        self.advance(gradient_sample, schedule);
        Ok(())
    }

    /// Unchecked step used by the Monte-Carlo runner after it has validated
    /// the gradient itself.
    #[inline]
    pub(crate) fn advance(&mut self, gradient_sample: &[f64], schedule: &StepSchedule) {
        let gamma = schedule.gamma(self.n + 1);
        for (t, g) in self.theta.iter_mut().zip(gradient_sample) {
            *t -= gamma * g;
        }
        averaged_update_in_place(&mut self.theta_bar, &self.theta, self.n);
        self.n += 1;
    }

    /// Value-returning form of [`EstimatorState::sgd_step`].
    pub fn stepped(mut self, gradient_sample: &[f64], schedule: &StepSchedule) -> Result<Self> {
        self.sgd_step(gradient_sample, schedule)?;
        Ok(self)
    }
}

/// `theta_bar_{n+1} = theta_bar_n + (theta_{n+1} - theta_bar_n) / (n + 2)`,
/// where `n` is the index before the update.
pub fn averaged_update(prev_bar: &[f64], new_theta: &[f64], n: u64) -> Result<Vec<f64>> {
    check_dim(prev_bar.len(), new_theta.len())?;
    let mut out = prev_bar.to_vec();
    averaged_update_in_place(&mut out, new_theta, n);
    Ok(out)
}

#[inline]
fn averaged_update_in_place(bar: &mut [f64], new_theta: &[f64], n: u64) {
    let weight = 1.0 / (n as f64 + 2.0);
    for (b, t) in bar.iter_mut().zip(new_theta) {
        *b += (t - *b) * weight;
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}
