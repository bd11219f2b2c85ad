//! Empirical convergence rates and the Cramer-Rao efficiency ratio.

use std::ops::Range;

use super::ErrorCurves;
use crate::error::{Error, Result};

/// Least-squares slope of `log(value)` against `log(n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub stderr: f64,
}

/// Fits `log(values[i]) = a + slope log(checkpoints[i])` over `window`.
pub fn fit_rate(checkpoints: &[u64], values: &[f64], window: Range<usize>) -> Result<RateFit> {
    if checkpoints.len() != values.len() || window.end > values.len() {
        return Err(Error::InvalidInput("window exceeds the curve".into()));
    }
    let k = window.len();
    if k < 4 {
        return Err(Error::InvalidInput(format!("rate fit needs >= 4 checkpoints, got {k}")));
    }
    let mut xs = Vec::with_capacity(k);
    let mut ys = Vec::with_capacity(k);
    for i in window {
        let (n, v) = (checkpoints[i], values[i]);
        if !(v > 0.0 && v.is_finite()) || n == 0 {
            return Err(Error::InvalidInput(format!("rate fit needs positive values, got {v} at n = {n}")));
        }
        xs.push((n as f64).ln());
        ys.push(v.ln());
    }
    let kf = k as f64;
    let mx = xs.iter().sum::<f64>() / kf;
    let my = ys.iter().sum::<f64>() / kf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("rate fit needs distinct checkpoints".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let stderr = (rss / (kf - 2.0) / sxx).sqrt();
    Ok(RateFit { slope, stderr })
}

/// `n * mean(|bar theta_n - theta|^2) / Tr(H^-1 Sigma H^-1)` at `checkpoint`.
pub fn cramer_rao_ratio(curves: &ErrorCurves, trace_term: Option<f64>, checkpoint: u64) -> Result<f64> {
    let trace = trace_term.ok_or_else(|| Error::InvalidInput("trace term is not available".into()))?;
    if !(trace > 0.0) {
        return Err(Error::InvalidInput(format!("trace term must be positive, got {trace}")));
    }
    let i = curves
        .index_of(checkpoint)
        .ok_or_else(|| Error::InvalidInput(format!("no checkpoint at n = {checkpoint}")))?;
    Ok(checkpoint as f64 * curves.avg[i].mean() / trace)
}
