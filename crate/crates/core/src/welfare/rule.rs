use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Cell;

/// Deterministic cell-wise subsidy assignment `π: (x, w) ↦ z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsidyRule {
    pub cells: Vec<Cell>,
    pub assignment: Vec<f64>,
    pub action_space: [f64; 2],
}

impl SubsidyRule {
    pub fn new(cells: Vec<Cell>, assignment: Vec<f64>, action_space: [f64; 2]) -> Result<Self> {
        let rule = Self { cells, assignment, action_space };
        rule.validate()?;
        Ok(rule)
    }

    /// Same subsidy for every cell.
    pub fn constant(cells: Vec<Cell>, z: f64, action_space: [f64; 2]) -> Result<Self> {
        let assignment = vec![z; cells.len()];
        Self::new(cells, assignment, action_space)
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.action_space;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidParams(format!("action space [{lo}, {hi}] is not a closed interval")));
        }
        if self.cells.is_empty() {
            return Err(Error::InvalidParams("rule has no cells".into()));
        }
        if self.cells.len() != self.assignment.len() {
            return Err(Error::InvalidParams(format!(
                "{} cells but {} assignments",
                self.cells.len(),
                self.assignment.len()
            )));
        }
        validate_weights(&self.cells)?;
        for (c, &z) in self.cells.iter().zip(&self.assignment) {
            if !(z >= lo && z <= hi) {
                return Err(Error::InvalidParams(format!(
                    "assignment {z} for {} is outside [{lo}, {hi}]",
                    c.name()
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn z(&self, i: usize) -> f64 {
        self.assignment[i]
    }
}

/// Nonnegative weights summing to one within 1e-12.
pub fn validate_weights(cells: &[Cell]) -> Result<()> {
    if cells.iter().any(|c| !(c.weight >= 0.0)) {
        return Err(Error::InvalidParams("cell weights must be nonnegative".into()));
    }
    let total: f64 = cells.iter().map(|c| c.weight).sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParams(format!("cell weights sum to {total}, not 1")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cells() -> Vec<Cell> {
        vec![Cell::new(vec![], vec![0.0], 0.5), Cell::new(vec![], vec![1.0], 0.5)]
    }

    #[test]
    fn accepts_valid_rule() {
        let r = SubsidyRule::new(cells(), vec![1.0, 0.4], [0.0, 1.0]).unwrap();
        assert_eq!(r.z(1), 0.4);
    }

    #[test]
    fn rejects_out_of_range_and_bad_weights() {
        assert!(SubsidyRule::new(cells(), vec![1.2, 0.4], [0.0, 1.0]).is_err());
        let mut c = cells();
        c[0].weight = 0.6;
        assert!(SubsidyRule::new(c, vec![1.0, 0.4], [0.0, 1.0]).is_err());
        assert!(SubsidyRule::new(cells(), vec![1.0], [0.0, 1.0]).is_err());
        assert!(SubsidyRule::new(cells(), vec![0.0, 0.0], [1.0, 0.0]).is_err());
    }
}
