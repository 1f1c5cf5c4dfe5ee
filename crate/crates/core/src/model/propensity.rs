use serde::{Deserialize, Serialize};

use super::dataset::same_point;
use super::params::affine;
use crate::error::{Error, Result};
use crate::numerics::linalg::dot;
use crate::numerics::normal::{norm_cdf, norm_pdf, norm_quantile};
use crate::numerics::{find_root_bracketed, Grid};

/// Observable cell `(x, w)` with its population weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cell {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default)]
    pub x: Vec<f64>,
    #[serde(default)]
    pub w: Vec<f64>,
    pub weight: f64,
}

impl Cell {
    pub fn new(x: Vec<f64>, w: Vec<f64>, weight: f64) -> Self {
        Self { label: None, x, w, weight }
    }

    pub fn labeled(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn name(&self) -> String {
        match &self.label {
            Some(l) => l.clone(),
            None => {
                let fmt = |v: &[f64]| v.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(",");
                format!("x=[{}];w=[{}]", fmt(&self.x), fmt(&self.w))
            }
        }
    }
}

/// Grid propensity for one `(x, w)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropensityCell {
    #[serde(default)]
    pub x: Vec<f64>,
    #[serde(default)]
    pub w: Vec<f64>,
    pub curve: Grid,
}

/// Take-up probability `g(x, w, z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PropensityFn {
    /// `Φ(xᵀβ_D + wᵀβ_W + γz)`; `beta_d` has a leading intercept.
    ProbitIndex {
        #[serde(rename = "betaD")]
        beta_d: Vec<f64>,
        #[serde(default, rename = "betaW")]
        beta_w: Vec<f64>,
        gamma: f64,
    },
    /// `a + xᵀβ_x + wᵀβ_w + γz`, valid where it lies in `[0, 1]`.
    Linear {
        intercept: f64,
        #[serde(default)]
        beta_x: Vec<f64>,
        #[serde(default)]
        beta_w: Vec<f64>,
        gamma: f64,
    },
    Grid { cells: Vec<PropensityCell> },
}

impl PropensityFn {
    pub fn probit(beta_d: Vec<f64>, gamma: f64) -> Self {
        Self::ProbitIndex { beta_d, beta_w: Vec::new(), gamma }
    }

    pub fn at<'a>(&'a self, x: &[f64], w: &[f64]) -> Result<CellPropensity<'a>> {
        let dim_err = |what: &str, want: usize, got: usize| {
            Error::InvalidParams(format!("propensity expects {want} {what}, got {got}"))
        };
        match self {
            Self::ProbitIndex { beta_d, beta_w, gamma } => {
                if beta_d.len() != x.len() + 1 {
                    return Err(dim_err("covariates", beta_d.len().saturating_sub(1), x.len()));
                }
                if !beta_w.is_empty() && beta_w.len() != w.len() {
                    return Err(dim_err("instruments", beta_w.len(), w.len()));
                }
                let idx = affine(beta_d, x) + if beta_w.is_empty() { 0.0 } else { dot(beta_w, w) };
                Ok(CellPropensity::Probit { index0: idx, gamma: *gamma })
            }
            Self::Linear { intercept, beta_x, beta_w, gamma } => {
                if beta_x.len() != x.len() && !(beta_x.is_empty()) {
                    return Err(dim_err("covariates", beta_x.len(), x.len()));
                }
                if beta_w.len() != w.len() && !(beta_w.is_empty()) {
                    return Err(dim_err("instruments", beta_w.len(), w.len()));
                }
                let a = intercept + dot(beta_x, x) + dot(beta_w, w);
                Ok(CellPropensity::Linear { a, gamma: *gamma })
            }
            Self::Grid { cells } => cells
                .iter()
                .find(|c| same_point(&c.x, x) && same_point(&c.w, w))
                .map(|c| CellPropensity::Grid(&c.curve))
                .ok_or_else(|| Error::MissingCell(format!("no propensity grid for x={x:?}, w={w:?}"))),
        }
    }

    pub fn at_cell<'a>(&'a self, cell: &Cell) -> Result<CellPropensity<'a>> {
        self.at(&cell.x, &cell.w)
    }
}

/// The map `z ↦ g(x, w, z)` for a fixed cell.
#[derive(Debug, Clone, Copy)]
pub enum CellPropensity<'a> {
    Probit { index0: f64, gamma: f64 },
    Linear { a: f64, gamma: f64 },
    Grid(&'a Grid),
}

impl CellPropensity<'_> {
    pub fn value(&self, z: f64) -> f64 {
        match self {
            Self::Probit { index0, gamma } => norm_cdf(index0 + gamma * z),
            Self::Linear { a, gamma } => a + gamma * z,
            Self::Grid(g) => g.interpolate(z),
        }
    }

    /// `∂g/∂z`: closed form for the index models, central difference with
    /// step equal to the minimum knot spacing for grids.
    pub fn derivative(&self, z: f64) -> f64 {
        match self {
            Self::Probit { index0, gamma } => gamma * norm_pdf(index0 + gamma * z),
            Self::Linear { gamma, .. } => *gamma,
            Self::Grid(g) => g.slope(z),
        }
    }

    /// Range of `z` on which the map is defined as a probability.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            Self::Probit { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Self::Linear { a, gamma } => {
                let (p, q) = (-a / gamma, (1.0 - a) / gamma);
                (p.min(q), p.max(q))
            }
            Self::Grid(g) => (g.first(), g.last()),
        }
    }

    pub fn check_in_domain(&self, z: f64) -> Result<()> {
        let (lo, hi) = self.domain();
        let slack = 1e-12 * (1.0 + z.abs());
        if !z.is_finite() || z < lo - slack || z > hi + slack {
            return Err(Error::Domain(format!("subsidy {z} outside the propensity domain [{lo}, {hi}]")));
        }
        Ok(())
    }

    /// `g⁻¹(u)`: the subsidy inducing take-up `u`.
    pub fn inverse(&self, u: f64) -> Result<f64> {
        match self {
            Self::Probit { index0, gamma } => Ok((norm_quantile(u)? - index0) / gamma),
            Self::Linear { a, gamma } => Ok((u - a) / gamma),
            Self::Grid(g) => {
                let v = g.values();
                if u < v[0] || u > v[v.len() - 1] {
                    return Err(Error::Domain(format!("take-up {u} outside the grid image")));
                }
                find_root_bracketed(|z| g.interpolate(z) - u, g.first(), g.last(), 1e-13)
            }
        }
    }

    /// Strict monotonicity on `n` evenly spaced points of `[lo, hi]`.
    pub fn check_increasing(&self, lo: f64, hi: f64, n: usize) -> Result<()> {
        let pts = crate::numerics::linspace(lo, hi, n);
        for w in pts.windows(2) {
            if self.value(w[1]) <= self.value(w[0]) {
                return Err(Error::Assumption(format!(
                    "propensity not strictly increasing between z = {} and {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }

    /// Weak concavity on `[lo, hi]` via second differences on 1001 points.
    pub fn check_concave(&self, lo: f64, hi: f64) -> Result<()> {
        if let Self::Linear { .. } = self {
            return Ok(());
        }
        let pts = crate::numerics::linspace(lo, hi, 1001);
        let vals: Vec<f64> = pts.iter().map(|&z| self.value(z)).collect();
        for (i, w) in vals.windows(3).enumerate() {
            let d2 = w[2] - 2.0 * w[1] + w[0];
            if d2 > 1e-9 {
                return Err(Error::Assumption(format!(
                    "propensity is not concave near z = {} (second difference {d2:.3e})",
                    pts[i + 1]
                )));
            }
        }
        Ok(())
    }
}
