//! One-sided comparison of empirical error curves with bound curves.

use std::io::Write;

use statrs::distribution::{ContinuousCDF, Normal};

use super::ErrorCurves;
use crate::bounds::{BoundCurve, Quantity, TheoremId};
use crate::error::{Error, Result};
use crate::report::{csv_writer, format_float};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominanceRow {
    pub n: u64,
    /// Sample mean, or its square root for root bounds.
    pub empirical: f64,
    /// `mean + z stderr`, or its square root for root bounds.
    pub upper_cl: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceReport {
    pub theorem: TheoremId,
    pub quantity: Quantity,
    pub confidence: f64,
    pub z: f64,
    pub rows: Vec<DominanceRow>,
    pub passed: bool,
}

/// Tests at every checkpoint whether the one-sided upper confidence limit of
/// the matching empirical quantity lies below the bound.
pub fn dominance_check(curves: &ErrorCurves, bound: &BoundCurve, confidence: f64) -> Result<DominanceReport> {
    if !(confidence > 0.5 && confidence < 1.0) {
        return Err(Error::InvalidInput(format!("confidence must lie in (1/2, 1), got {confidence}")));
    }
    if curves.checkpoints != bound.checkpoints {
        return Err(Error::CheckpointMismatch);
    }
    let z = Normal::new(0.0, 1.0)
        .map_err(|e| Error::InvalidInput(e.to_string()))?
        .inverse_cdf(confidence);
    let stats = match bound.quantity {
        Quantity::SquaredSuboptimality => &curves.subopt,
        Quantity::SquaredIterateError => &curves.sgd,
        Quantity::RootAveragedError => &curves.avg,
    };
    let rows: Vec<DominanceRow> = curves
        .checkpoints
        .iter()
        .zip(stats)
        .zip(&bound.values)
        .map(|((&n, s), &b)| {
            let mean = s.mean();
            let ucl = mean + z * s.stderr();
            let (empirical, upper_cl) = if bound.quantity.is_root() {
                (mean.max(0.0).sqrt(), ucl.max(0.0).sqrt())
            } else {
                (mean, ucl)
            };
            DominanceRow {
                n,
                empirical,
                upper_cl,
                bound: b,
                pass: upper_cl <= b,
            }
        })
        .collect();
    let passed = rows.iter().all(|r| r.pass);
    Ok(DominanceReport {
        theorem: bound.theorem,
        quantity: bound.quantity,
        confidence,
        z,
        rows,
        passed,
    })
}

impl DominanceReport {
    /// Writes `n, empirical, upper_cl, bound, pass, theorem, quantity,
    /// confidence` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv_writer(out);
        w.write_record(["n", "empirical", "upper_cl", "bound", "pass", "theorem", "quantity", "confidence"])?;
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                format_float(r.empirical),
                format_float(r.upper_cl),
                format_float(r.bound),
                r.pass.to_string(),
                self.theorem.token().to_string(),
                self.quantity.as_str().to_string(),
                format_float(self.confidence),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `n, empirical, upper_cl, bound` rows for external plotting.
    pub fn write_plot_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv_writer(out);
        w.write_record(["n", "empirical", "upper_cl", "bound"])?;
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                format_float(r.empirical),
                format_float(r.upper_cl),
                format_float(r.bound),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
