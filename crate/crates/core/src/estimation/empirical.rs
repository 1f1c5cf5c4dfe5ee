use serde::Serialize;

use crate::error::{Error, OffSupportCell, Result};
use crate::model::dataset::same_point;
use crate::model::Dataset;
use crate::welfare::{CostSpec, SubsidyRule};

#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalCell {
    pub cell: String,
    pub weight: f64,
    pub matched: usize,
    pub mean_y: f64,
    pub mean_cost: f64,
}

/// Welfare of a rule read off the data on the support:
/// `E[Y^π] = Σ weight · E[Y | x, w, Z = π]` minus the matched mean cost.
#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalWelfare {
    pub net: f64,
    pub std_error: f64,
    pub cells: Vec<EmpiricalCell>,
}

pub fn empirical_welfare(data: &Dataset, rule: &SubsidyRule, cost: &CostSpec, match_tol: f64) -> Result<EmpiricalWelfare> {
    data.validate()?;
    rule.validate()?;
    if !(match_tol >= 0.0) {
        return Err(Error::InvalidParams(format!("match tolerance {match_tol} must be nonnegative")));
    }
    let mut off = Vec::new();
    let mut cells = Vec::new();
    let (mut net, mut var) = (0.0, 0.0);
    for (cell, &z) in rule.cells.iter().zip(&rule.assignment) {
        let in_cell: Vec<usize> = (0..data.len())
            .filter(|&i| same_point(data.x_row(i), &cell.x) && same_point(data.w_row(i), &cell.w))
            .collect();
        let matched: Vec<usize> = in_cell.iter().copied().filter(|&i| (data.z[i] - z).abs() <= match_tol).collect();
        if matched.is_empty() {
            let nearest = in_cell
                .iter()
                .map(|&i| data.z[i])
                .min_by(|a, b| (a - z).abs().total_cmp(&(b - z).abs()));
            off.push(OffSupportCell { cell: cell.name(), assigned: z, nearest_observed: nearest });
            continue;
        }
        let n = matched.len() as f64;
        let vals: Vec<(f64, f64)> = matched
            .iter()
            .map(|&i| Ok((data.y[i], cost.cost(cell, z, data.d[i])?)))
            .collect::<Result<_>>()?;
        let mean_y = vals.iter().map(|v| v.0).sum::<f64>() / n;
        let mean_cost = vals.iter().map(|v| v.1).sum::<f64>() / n;
        let mean = mean_y - mean_cost;
        let s2 = if n > 1.0 {
            vals.iter().map(|v| (v.0 - v.1 - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        net += cell.weight * mean;
        var += cell.weight * cell.weight * s2 / n;
        cells.push(EmpiricalCell { cell: cell.name(), weight: cell.weight, matched: matched.len(), mean_y, mean_cost });
    }
    if !off.is_empty() {
        return Err(Error::OffSupport { cells: off });
    }
    Ok(EmpiricalWelfare { net, std_error: var.sqrt(), cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{simulate_normal, Cell, ScalarDist, SelectionParams, VectorDist};

    fn two_arm() -> Dataset {
        let p = SelectionParams::benchmark();
        let x = VectorDist::Cells { points: vec![vec![0.0], vec![1.0]], weights: vec![0.5, 0.5] };
        let z = ScalarDist::Discrete { values: vec![0.0, 900.0], weights: vec![0.5, 0.5] };
        simulate_normal(&p, 40_000, &x, &VectorDist::empty(), &z, 12).unwrap()
    }

    fn cells() -> Vec<Cell> {
        vec![Cell::new(vec![1.0], vec![], 0.5), Cell::new(vec![0.0], vec![], 0.5)]
    }

    #[test]
    fn arm_means_recombine() {
        let data = two_arm();
        let rule = SubsidyRule::new(cells(), vec![900.0, 0.0], [0.0, 900.0]).unwrap();
        let ew = empirical_welfare(&data, &rule, &CostSpec::Voucher, 1e-9).unwrap();
        let arm = |x: f64, z: f64| {
            let rows: Vec<usize> = (0..data.len()).filter(|&i| data.x[i] == x && data.z[i] == z).collect();
            let n = rows.len() as f64;
            rows.iter().map(|&i| data.y[i] - z * f64::from(data.d[i])).sum::<f64>() / n
        };
        let want = 0.5 * arm(1.0, 900.0) + 0.5 * arm(0.0, 0.0);
        assert!((ew.net - want).abs() < 1e-9 * want.abs().max(1.0));
    }

    #[test]
    fn unobserved_assignment_is_off_support() {
        let data = two_arm();
        let rule = SubsidyRule::new(cells(), vec![450.0, 0.0], [0.0, 900.0]).unwrap();
        match empirical_welfare(&data, &rule, &CostSpec::Voucher, 1.0) {
            Err(Error::OffSupport { cells }) => {
                assert_eq!(cells.len(), 1);
                assert!(cells[0].nearest_observed.is_some());
            }
            other => panic!("{other:?}"),
        }
    }
}
