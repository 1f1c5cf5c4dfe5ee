use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cost::CostSpec;
use super::rule::SubsidyRule;
use crate::error::{Error, Result};
use crate::model::{Cell, CellMte, CellPropensity, MteCurve, PropensityFn};

/// Per-cell welfare components, per member of the cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellWelfare {
    pub cell: String,
    pub weight: f64,
    pub z: f64,
    pub takeup: f64,
    pub gross: f64,
    pub cost: f64,
}

impl CellWelfare {
    pub fn net(&self) -> f64 {
        self.gross - self.cost
    }
}

/// `S(π)` decomposed into the MTE-integral term, the baseline `E[Y₀]` and
/// the expected cost. When the baseline is unknown, `net` is measured
/// relative to `E[Y₀]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelfareReport {
    pub gross: f64,
    pub baseline: Option<f64>,
    pub cost: f64,
    pub net: f64,
    pub per_cell: Vec<CellWelfare>,
    pub warnings: Vec<String>,
}

/// `g(x, w, π(x, w))` for the `i`-th cell of the rule.
pub fn takeup_under_rule(g: &PropensityFn, rule: &SubsidyRule, i: usize) -> Result<f64> {
    let cell = rule
        .cells
        .get(i)
        .ok_or_else(|| Error::MissingCell(format!("rule has no cell {i}")))?;
    let p = g.at_cell(cell)?;
    let z = rule.z(i);
    p.check_in_domain(z)?;
    Ok(p.value(z))
}

/// Welfare components of assigning `z` to one cell.
pub fn cell_welfare(mte: &CellMte, g: &CellPropensity, cost: &CostSpec, cell: &Cell, z: f64) -> Result<CellWelfare> {
    g.check_in_domain(z)?;
    let u = g.value(z).clamp(0.0, 1.0);
    Ok(CellWelfare {
        cell: cell.name(),
        weight: cell.weight,
        z,
        takeup: u,
        gross: mte.integral(0.0, u)?,
        cost: cost.expected(cell, z, u)?,
    })
}

pub fn welfare_of_rule(
    mte: &MteCurve,
    g: &PropensityFn,
    cost: &CostSpec,
    rule: &SubsidyRule,
    baseline: Option<f64>,
) -> Result<WelfareReport> {
    rule.validate()?;
    cost.validate()?;
    let rows: Vec<(CellWelfare, Option<String>)> = (0..rule.len())
        .into_par_iter()
        .map(|i| {
            let cell = &rule.cells[i];
            let m = mte.at(&cell.x)?;
            let p = g.at_cell(cell)?;
            let cw = cell_welfare(&m, &p, cost, cell, rule.z(i))?;
            let warn = (!m.interval_identified(0.0, cw.takeup)).then(|| {
                format!("MTE for {} is extrapolated beyond its identified set on [0, {}]", cw.cell, cw.takeup)
            });
            Ok((cw, warn))
        })
        .collect::<Result<_>>()?;
    let gross = rows.iter().map(|(c, _)| c.weight * c.gross).sum::<f64>();
    let cost_total = rows.iter().map(|(c, _)| c.weight * c.cost).sum::<f64>();
    let (per_cell, warnings): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    Ok(WelfareReport {
        gross,
        baseline,
        cost: cost_total,
        net: baseline.unwrap_or(0.0) + gross - cost_total,
        per_cell,
        warnings: warnings.into_iter().flatten().collect(),
    })
}
