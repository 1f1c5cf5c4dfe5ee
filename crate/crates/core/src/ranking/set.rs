use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::LivFit;
use crate::model::dataset::same_point;
use crate::model::{MteCurve, Shape};

/// Knot values of the MTE for one covariate cell; `None` is unpinned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetCell {
    #[serde(default)]
    pub x: Vec<f64>,
    pub pinned: Vec<Option<f64>>,
}

/// Piecewise-linear MTE curves on `u_grid` that agree with the pinned
/// knots, satisfy the shape restriction, and stay in the box `bounds` at
/// unpinned knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentifiedMteSet {
    pub u_grid: Vec<f64>,
    pub cells: Vec<SetCell>,
    #[serde(default)]
    pub shape: Shape,
    #[serde(default)]
    pub bounds: Option<[f64; 2]>,
}

impl IdentifiedMteSet {
    pub fn validate(&self) -> Result<()> {
        let u = &self.u_grid;
        if u.len() < 2 || u[0] != 0.0 || u[u.len() - 1] != 1.0 || u.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParams("u grid must increase strictly from 0 to 1".into()));
        }
        if self.cells.is_empty() {
            return Err(Error::InvalidParams("identified set has no cells".into()));
        }
        for c in &self.cells {
            if c.pinned.len() != u.len() {
                return Err(Error::InvalidParams(format!(
                    "cell {:?} has {} knot entries for {} grid points",
                    c.x,
                    c.pinned.len(),
                    u.len()
                )));
            }
            if c.pinned.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParams("pinned values must be finite".into()));
            }
        }
        if let Some([lo, hi]) = self.bounds {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidParams(format!("bounds [{lo}, {hi}] are not an interval")));
            }
        }
        Ok(())
    }

    /// Box on unpinned knots: the configured bounds, else `±10·max|pinned|`
    /// (or `±1` with nothing pinned).
    pub fn effective_bounds(&self) -> [f64; 2] {
        self.bounds.unwrap_or_else(|| {
            let m = self.cells.iter().flat_map(|c| c.pinned.iter().flatten()).fold(0.0f64, |s, v| s.max(v.abs()));
            let s = if m > 0.0 { 10.0 * m } else { 1.0 };
            [-s, s]
        })
    }

    pub fn cell(&self, x: &[f64]) -> Result<&SetCell> {
        self.cells
            .iter()
            .find(|c| same_point(&c.x, x))
            .ok_or_else(|| Error::MissingCell(format!("identified set has no cell for x = {x:?}")))
    }

    /// Every knot pinned to the values of a known curve.
    pub fn from_curve(mte: &MteCurve, xs: &[Vec<f64>], u_grid: Vec<f64>) -> Result<Self> {
        let mut cells = Vec::with_capacity(xs.len());
        for x in xs {
            let m = mte.at(x)?;
            let pinned = u_grid.iter().map(|&u| Some(m.value(u))).collect::<Vec<_>>();
            if pinned.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::Domain("curve is not finite on the whole grid".into()));
            }
            cells.push(SetCell { x: x.clone(), pinned });
        }
        let set = Self { u_grid, cells, shape: mte.shape, bounds: None };
        set.validate()?;
        Ok(set)
    }

    /// Pins the LIV estimates at identified knots; the LIV grid must span
    /// `[0, 1]`.
    pub fn from_liv(fit: &LivFit, shape: Shape, bounds: Option<[f64; 2]>) -> Result<Self> {
        let u_grid = fit
            .cells
            .first()
            .map(|c| c.u.clone())
            .ok_or_else(|| Error::EmptySet("LIV fit has no cells".into()))?;
        let cells = fit.cells.iter().map(|c| SetCell { x: c.x.clone(), pinned: c.estimate.clone() }).collect();
        let set = Self { u_grid, cells, shape, bounds };
        set.validate()?;
        Ok(set)
    }
}
