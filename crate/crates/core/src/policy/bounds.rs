use super::lambda::lambda_cell;
use crate::error::{Error, Result};
use crate::model::{Cell, MteCurve, PropensityFn};
use crate::welfare::CostSpec;

/// Interval containing the optimal subsidy under positive selection, from
/// the sign of `Λ` at the probes: `Λ(z) ≥ 0` puts the optimum above `z`,
/// `Λ(z) ≤ 0` below it. Each probe's take-up must lie in the identified
/// part of the MTE.
pub fn bound_optimal(
    mte: &MteCurve,
    g: &PropensityFn,
    cost: &CostSpec,
    cell: &Cell,
    space: [f64; 2],
    probes: &[f64],
) -> Result<(f64, f64)> {
    let [lo, hi] = space;
    let m = mte.at(&cell.x)?;
    let p = g.at_cell(cell)?;
    let mut signs = Vec::with_capacity(probes.len());
    for &z in probes {
        if !(z >= lo && z <= hi) {
            return Err(Error::Domain(format!("probe {z} outside the action space [{lo}, {hi}]")));
        }
        let u = p.value(z);
        if !m.is_identified(u) {
            return Err(Error::Domain(format!("MTE is not identified at u = {u} (probe z = {z})")));
        }
        signs.push((z, lambda_cell(&m, &p, cost, cell, z)?));
    }
    signs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let lower = signs.iter().filter(|s| s.1 >= 0.0).map(|s| s.0).fold(lo, f64::max);
    let upper = signs.iter().filter(|s| s.1 <= 0.0).map(|s| s.0).fold(hi, f64::min);
    let first_neg = signs.iter().find(|s| s.1 < 0.0);
    if let (Some(n), Some(q)) = (first_neg, signs.iter().rev().find(|s| s.1 > 0.0)) {
        if q.0 > n.0 {
            return Err(Error::Crossing(format!(
                "Λ({}) = {} < 0 but Λ({}) = {} > 0; positive selection fails",
                n.0, n.1, q.0, q.1
            )));
        }
    }
    if lower > upper {
        return Err(Error::Crossing(format!("bounds [{lower}, {upper}] are inverted")));
    }
    Ok((lower, upper))
}
