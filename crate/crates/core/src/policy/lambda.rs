use crate::error::{Error, Result};
use crate::model::{Cell, CellMte, CellPropensity, MteCurve, PropensityFn};
use crate::numerics::linspace;
use crate::welfare::CostSpec;

/// Marginal benefit of subsidy at `z` for one cell:
/// `MTE(g) − c₁ + c₀ − (c₁'·g + c₀'·(1−g)) / g'`, which is
/// `MTE(g) − z − g/g'` under the voucher cost.
pub fn lambda_eval(mte: &MteCurve, g: &PropensityFn, cost: &CostSpec, cell: &Cell, z: f64) -> Result<f64> {
    lambda_cell(&mte.at(&cell.x)?, &g.at_cell(cell)?, cost, cell, z)
}

pub fn lambda_cell(m: &CellMte, p: &CellPropensity, cost: &CostSpec, cell: &Cell, z: f64) -> Result<f64> {
    p.check_in_domain(z)?;
    let dg = p.derivative(z);
    if !(dg > 0.0) {
        return Err(Error::Assumption(format!(
            "propensity derivative {dg} at z = {z} is not positive for {}",
            cell.name()
        )));
    }
    let u = p.value(z).clamp(0.0, 1.0);
    let level = m.value(u) - cost.cost(cell, z, 1)? + cost.cost(cell, z, 0)?;
    let slope = (cost.d_cost_dz(cell, z, 1)? * u + cost.d_cost_dz(cell, z, 0)? * (1.0 - u)) / dg;
    Ok(level - slope)
}

/// Largest finite `|MTE(g(z))|` over the action space, used to scale
/// tolerances.
pub fn welfare_scale(m: &CellMte, p: &CellPropensity, lo: f64, hi: f64) -> f64 {
    linspace(lo, hi, 257)
        .into_iter()
        .map(|z| m.value(p.value(z).clamp(0.0, 1.0)).abs())
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max)
}

/// Root tolerance for `Λ`: `1e-9` times the welfare scale.
pub fn lambda_tol(m: &CellMte, p: &CellPropensity, lo: f64, hi: f64) -> f64 {
    1e-9 * welfare_scale(m, p, lo, hi).max(1e-6)
}
