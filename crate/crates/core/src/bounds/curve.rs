//! Bound values at a list of checkpoints.

use std::io::Write;

use super::derived::DerivedConstants;
use super::theorems::{check_applicable, evaluate, Quantity, TheoremId};
use crate::error::{Error, Result};
use crate::problems::Provenance;
use crate::report::{csv_writer, format_float};

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCurve {
    pub theorem: TheoremId,
    pub quantity: Quantity,
    pub checkpoints: Vec<u64>,
    pub values: Vec<f64>,
    /// Empirical as soon as any input constant is.
    pub provenance: Provenance,
}

/// Evaluates `theorem` at every checkpoint.
pub fn bound_curve(theorem: TheoremId, checkpoints: &[u64], derived: &DerivedConstants) -> Result<BoundCurve> {
    check_applicable(theorem, derived)?;
    let values = checkpoints
        .iter()
        .map(|&n| {
            let v = evaluate(theorem, derived, n)?.total();
            if v.is_finite() && v >= 0.0 {
                Ok(v)
            } else {
                Err(Error::NonFiniteConstant {
                    name: "bound value",
                    value: v,
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let provenance = if derived.constants.any_empirical() {
        Provenance::EmpiricalWithMargin
    } else {
        Provenance::Exact
    };
    Ok(BoundCurve {
        theorem,
        quantity: theorem.quantity(),
        checkpoints: checkpoints.to_vec(),
        values,
        provenance,
    })
}

impl BoundCurve {
    /// A copy with every value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> BoundCurve {
        BoundCurve {
            values: self.values.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    /// Writes `n,value,theorem,provenance` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv_writer(out);
        w.write_record(["n", "value", "theorem", "provenance"])?;
        let theorem = self.theorem.token();
        let provenance = self.provenance.to_string();
        for (n, v) in self.checkpoints.iter().zip(&self.values) {
            w.write_record([n.to_string(), format_float(*v), theorem.to_string(), provenance.clone()])?;
        }
        w.flush()?;
        Ok(())
    }
}
