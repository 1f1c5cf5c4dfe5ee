use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::dataset::same_point;
use crate::model::Cell;
use crate::numerics::Grid;

/// Tabulated cost `c(x, w, ·, d)` for one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostCell {
    #[serde(default)]
    pub x: Vec<f64>,
    #[serde(default)]
    pub w: Vec<f64>,
    /// Cost paid for non-takers, as a function of `z`.
    pub d0: Grid,
    /// Cost paid for takers, as a function of `z`.
    pub d1: Grid,
}

/// Cost of assigning subsidy `z` to a cell whose members then choose `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostSpec {
    #[default]
    Zero,
    /// `amount` per member of every cell with a nonzero assignment,
    /// whether or not they take up.
    ConstantPerEligible { amount: f64 },
    /// `c = z·d`: paid only on take-up.
    Voucher,
    /// Per-cell tables; a cell with empty `x` and `w` applies everywhere.
    GeneralTable { cells: Vec<CostCell> },
}

impl CostSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::ConstantPerEligible { amount } if !amount.is_finite() => {
                Err(Error::InvalidParams("constant cost must be finite".into()))
            }
            Self::GeneralTable { cells } if cells.is_empty() => {
                Err(Error::InvalidParams("cost table has no cells".into()))
            }
            _ => Ok(()),
        }
    }

    fn table<'a>(cells: &'a [CostCell], cell: &Cell) -> Result<&'a CostCell> {
        cells
            .iter()
            .find(|c| same_point(&c.x, &cell.x) && same_point(&c.w, &cell.w))
            .or_else(|| cells.iter().find(|c| c.x.is_empty() && c.w.is_empty()))
            .ok_or_else(|| Error::MissingCell(format!("no cost table for {}", cell.name())))
    }

    /// `c(x, w, z, d)`.
    pub fn cost(&self, cell: &Cell, z: f64, d: u8) -> Result<f64> {
        Ok(match self {
            Self::Zero => 0.0,
            Self::ConstantPerEligible { amount } => {
                if z != 0.0 {
                    *amount
                } else {
                    0.0
                }
            }
            Self::Voucher => {
                if d == 1 {
                    z
                } else {
                    0.0
                }
            }
            Self::GeneralTable { cells } => {
                let t = Self::table(cells, cell)?;
                if d == 1 {
                    t.d1.interpolate(z)
                } else {
                    t.d0.interpolate(z)
                }
            }
        })
    }

    /// `∂c/∂z`; numerical for tables, zero almost everywhere for the
    /// constant cost.
    pub fn d_cost_dz(&self, cell: &Cell, z: f64, d: u8) -> Result<f64> {
        Ok(match self {
            Self::Zero | Self::ConstantPerEligible { .. } => 0.0,
            Self::Voucher => f64::from(d),
            Self::GeneralTable { cells } => {
                let t = Self::table(cells, cell)?;
                if d == 1 {
                    t.d1.slope(z)
                } else {
                    t.d0.slope(z)
                }
            }
        })
    }

    /// Expected cost per member when a share `u` takes up.
    pub fn expected(&self, cell: &Cell, z: f64, u: f64) -> Result<f64> {
        Ok(self.cost(cell, z, 1)? * u + self.cost(cell, z, 0)? * (1.0 - u))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn voucher_is_exact() {
        let c = Cell::new(vec![], vec![], 1.0);
        assert_eq!(CostSpec::Voucher.cost(&c, 0.37, 1).unwrap(), 0.37);
        assert_eq!(CostSpec::Voucher.cost(&c, 0.37, 0).unwrap(), 0.0);
        assert_eq!(CostSpec::Voucher.cost(&c, -2.0, 1).unwrap(), -2.0);
        assert_eq!(CostSpec::Voucher.expected(&c, 900.0, 0.5).unwrap(), 450.0);
    }

    #[test]
    fn constant_ignores_takeup() {
        let c = Cell::new(vec![], vec![], 1.0);
        let k = CostSpec::ConstantPerEligible { amount: 774.0 };
        assert_eq!(k.expected(&c, 1.0, 0.2).unwrap(), 774.0);
        assert_eq!(k.expected(&c, 0.0, 0.2).unwrap(), 0.0);
    }

    #[test]
    fn table_lookup_and_slope() {
        let d1 = Grid::new(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 4.0]).unwrap();
        let d0 = Grid::new(vec![0.0, 2.0], vec![1.0, 1.0]).unwrap();
        let k = CostSpec::GeneralTable { cells: vec![CostCell { x: vec![1.0], w: vec![], d0, d1 }] };
        let c = Cell::new(vec![1.0], vec![], 1.0);
        assert_eq!(k.cost(&c, 0.5, 1).unwrap(), 1.0);
        assert_eq!(k.cost(&c, 0.5, 0).unwrap(), 1.0);
        assert!((k.d_cost_dz(&c, 1.0, 1).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(k.d_cost_dz(&c, 1.0, 0).unwrap(), 0.0);
        assert!(k.cost(&Cell::new(vec![0.0], vec![], 1.0), 0.5, 1).is_err());
    }
}
