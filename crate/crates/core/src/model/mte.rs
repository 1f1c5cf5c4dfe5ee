use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::dataset::same_point;
use super::params::{affine, SelectionParams};
use crate::error::{Error, Result};
use crate::numerics::normal::{norm_pdf, norm_quantile};
use crate::numerics::{quad_integrate, Grid, DEFAULT_QUAD_TOL};

/// Declared monotonicity of an MTE curve in `u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    #[default]
    None,
    Decreasing,
    Increasing,
}

pub type MteFn = dyn Fn(&[f64], f64) -> f64 + Send + Sync;

/// Closure-backed curve, for constructed test instances.
#[derive(Clone)]
pub struct CustomMte(pub Arc<MteFn>);

impl fmt::Debug for CustomMte {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomMte(..)")
    }
}

/// Tabulated curve for one covariate cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridCell {
    pub x: Vec<f64>,
    pub curve: Grid,
    /// Closed u-intervals where the values are backed by data.
    pub identified: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MteForm {
    /// `xᵀ(β₁−β₀) − slope·Φ⁻¹(u)`; `level_coef` has a leading intercept.
    NormalParametric { level_coef: Vec<f64>, slope: f64 },
    /// `xᵀ(β₁−β₀) + Σₖ cₖ uᵏ`.
    PolyLambdaPrime { level_coef: Vec<f64>, lambda_prime: Vec<f64> },
    Grid { cells: Vec<GridCell> },
    #[serde(skip)]
    Custom(CustomMte),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MteCurve {
    pub form: MteForm,
    #[serde(default)]
    pub shape: Shape,
}

impl MteCurve {
    pub fn new(form: MteForm, shape: Shape) -> Self {
        Self { form, shape }
    }

    pub fn normal(level_coef: Vec<f64>, slope: f64) -> Self {
        let shape = if slope > 0.0 {
            Shape::Decreasing
        } else if slope < 0.0 {
            Shape::Increasing
        } else {
            Shape::None
        };
        Self::new(MteForm::NormalParametric { level_coef, slope }, shape)
    }

    pub fn from_params(p: &SelectionParams) -> Self {
        let level = p.beta1.iter().zip(&p.beta0).map(|(a, b)| a - b).collect();
        Self::normal(level, p.mte_slope())
    }

    /// Curve that does not depend on `x`.
    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static, shape: Shape) -> Self {
        Self::new(MteForm::Custom(CustomMte(Arc::new(move |_, u| f(u)))), shape)
    }

    pub fn custom_x(f: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static, shape: Shape) -> Self {
        Self::new(MteForm::Custom(CustomMte(Arc::new(f))), shape)
    }

    /// Single-cell grid curve with every knot identified.
    pub fn single_grid(x: Vec<f64>, curve: Grid, shape: Shape) -> Self {
        let identified = vec![[curve.first(), curve.last()]];
        Self::new(MteForm::Grid { cells: vec![GridCell { x, curve, identified }] }, shape)
    }

    /// Binds the covariate cell.
    pub fn at<'a>(&'a self, x: &[f64]) -> Result<CellMte<'a>> {
        Ok(match &self.form {
            MteForm::NormalParametric { level_coef, slope } => {
                check_dim(level_coef, x)?;
                CellMte::Normal { level: affine(level_coef, x), slope: *slope }
            }
            MteForm::PolyLambdaPrime { level_coef, lambda_prime } => {
                check_dim(level_coef, x)?;
                CellMte::Poly { level: affine(level_coef, x), coef: lambda_prime }
            }
            MteForm::Grid { cells } => {
                let cell = cells
                    .iter()
                    .find(|c| same_point(&c.x, x))
                    .or(if cells.len() == 1 && cells[0].x.is_empty() { Some(&cells[0]) } else { None })
                    .ok_or_else(|| Error::MissingCell(format!("no MTE grid for covariates {x:?}")))?;
                CellMte::Grid(cell)
            }
            MteForm::Custom(f) => CellMte::Custom { f: f.0.as_ref(), x: x.to_vec() },
        })
    }

    /// Verifies the declared shape on a 1001-point grid of `[0, 1]`.
    pub fn check_shape(&self, x: &[f64]) -> Result<()> {
        let cell = self.at(x)?;
        let vals: Vec<f64> = (0..=1000).map(|i| cell.value(i as f64 / 1000.0)).collect();
        let scale = vals.iter().filter(|v| v.is_finite()).fold(1.0f64, |s, v| s.max(v.abs()));
        let tol = 1e-12 * scale;
        let broken = match self.shape {
            Shape::None => return Ok(()),
            Shape::Decreasing => vals.windows(2).position(|w| w[1] > w[0] + tol),
            Shape::Increasing => vals.windows(2).position(|w| w[1] < w[0] - tol),
        };
        match broken {
            Some(i) => Err(Error::Assumption(format!(
                "MTE declared {:?} but changes direction near u = {}",
                self.shape,
                i as f64 / 1000.0
            ))),
            None => Ok(()),
        }
    }
}

fn check_dim(coef: &[f64], x: &[f64]) -> Result<()> {
    if coef.len() != x.len() + 1 {
        return Err(Error::InvalidParams(format!(
            "curve expects {} covariates, got {}",
            coef.len().saturating_sub(1),
            x.len()
        )));
    }
    Ok(())
}

/// An MTE curve restricted to one covariate cell.
#[derive(Clone)]
pub enum CellMte<'a> {
    Normal { level: f64, slope: f64 },
    Poly { level: f64, coef: &'a [f64] },
    Grid(&'a GridCell),
    Custom { f: &'a MteFn, x: Vec<f64> },
}

impl CellMte<'_> {
    /// Value at `u`; the normal form diverges to ±∞ at the end points.
    pub fn value(&self, u: f64) -> f64 {
        match self {
            Self::Normal { level, slope } => {
                if *slope == 0.0 {
                    *level
                } else if u <= 0.0 {
                    level + slope * f64::INFINITY
                } else if u >= 1.0 {
                    level - slope * f64::INFINITY
                } else {
                    level - slope * norm_quantile(u).unwrap_or(f64::NAN)
                }
            }
            Self::Poly { level, coef } => level + coef.iter().rev().fold(0.0, |acc, c| acc * u + c),
            Self::Grid(cell) => cell.curve.interpolate(u),
            Self::Custom { f, x } => f(x, u),
        }
    }

    /// `∫ₐᵇ MTE(u) du` for `0 ≤ a ≤ b ≤ 1`; exact except for custom curves.
    pub fn integral(&self, a: f64, b: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
            return Err(Error::Domain(format!("MTE integral limits [{a}, {b}] outside [0, 1]")));
        }
        if b < a {
            return Ok(-self.integral(b, a)?);
        }
        Ok(match self {
            Self::Normal { level, slope } => {
                let dens = |u: f64| if u <= 0.0 || u >= 1.0 { 0.0 } else { norm_pdf(norm_quantile(u).unwrap()) };
                level * (b - a) + slope * (dens(b) - dens(a))
            }
            Self::Poly { level, coef } => {
                let anti = |u: f64| {
                    coef.iter().enumerate().rev().fold(0.0, |acc, (k, c)| acc * u + c / (k + 1) as f64) * u
                };
                level * (b - a) + anti(b) - anti(a)
            }
            Self::Grid(cell) => cell.curve.integrate(a, b),
            Self::Custom { f, x } => quad_integrate(|u| f(x, u), a, b, DEFAULT_QUAD_TOL)?,
        })
    }

    /// False only for grid curves evaluated outside their identified set.
    pub fn is_identified(&self, u: f64) -> bool {
        match self {
            Self::Grid(cell) => cell.identified.iter().any(|[lo, hi]| u >= lo - 1e-12 && u <= hi + 1e-12),
            _ => true,
        }
    }

    /// True when `[a, b]` lies inside a single identified interval.
    pub fn interval_identified(&self, a: f64, b: f64) -> bool {
        match self {
            Self::Grid(cell) => cell.identified.iter().any(|[lo, hi]| a >= lo - 1e-12 && b <= hi + 1e-12),
            _ => true,
        }
    }
}

/// `xᵀ(β₁−β₀) − (ρ₁σ₁−ρ₀σ₀)Φ⁻¹(u)` for the normal selection model.
pub fn true_mte(params: &SelectionParams, x: &[f64], u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::Domain(format!("true MTE requires 0 < u < 1, got {u}")));
    }
    if x.len() != params.x_dim() {
        return Err(Error::InvalidParams(format!("expected {} covariates", params.x_dim())));
    }
    Ok(params.level(x) - params.mte_slope() * norm_quantile(u)?)
}

/// Roy model: selection on gains alone gives `MTE(u) = F_Δ⁻¹(u)`, which is
/// increasing in `u`.
pub fn roy_mte(delta_quantile: impl Fn(f64) -> f64, u: f64) -> f64 {
    delta_quantile(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_is_level() {
        let p = SelectionParams::benchmark();
        assert!((true_mte(&p, &[1.0], 0.5).unwrap() - 985.853).abs() < 1e-9);
        assert!(true_mte(&p, &[1.0], 0.0).is_err());
        assert!(true_mte(&p, &[1.0], 1.0).is_err());
    }

    #[test]
    fn benchmark_curve_is_decreasing() {
        let c = MteCurve::from_params(&SelectionParams::benchmark());
        assert_eq!(c.shape, Shape::Decreasing);
        c.check_shape(&[1.0]).unwrap();
        c.check_shape(&[0.0]).unwrap();
    }

    #[test]
    fn normal_integral_matches_quadrature() {
        let c = MteCurve::normal(vec![1.0, 2.0], 1.5);
        let cell = c.at(&[0.5]).unwrap();
        let exact = cell.integral(0.1, 0.8).unwrap();
        let num = quad_integrate(|u| cell.value(u), 0.1, 0.8, 1e-12).unwrap();
        assert!((exact - num).abs() < 1e-9);
        // ∫₀¹ Φ⁻¹ = 0
        assert!((cell.integral(0.0, 1.0).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn poly_integral_exact() {
        let c = MteCurve::new(
            MteForm::PolyLambdaPrime { level_coef: vec![4.0], lambda_prime: vec![0.0, -2.0] },
            Shape::Decreasing,
        );
        let cell = c.at(&[]).unwrap();
        assert!((cell.integral(0.0, 0.5).unwrap() - 1.75).abs() < 1e-15);
        assert!((cell.value(0.25) - 3.5).abs() < 1e-15);
    }

    #[test]
    fn grid_flags_extrapolation() {
        let g = Grid::new(vec![0.0, 0.5, 1.0], vec![2.0, 1.0, 0.0]).unwrap();
        let c = MteCurve::new(
            MteForm::Grid { cells: vec![GridCell { x: vec![1.0], curve: g, identified: vec![[0.2, 0.6]] }] },
            Shape::Decreasing,
        );
        let cell = c.at(&[1.0]).unwrap();
        assert!(cell.is_identified(0.3));
        assert!(!cell.is_identified(0.7));
        assert!(c.at(&[0.0]).is_err());
    }

    #[test]
    fn shape_violation_detected() {
        let c = MteCurve::custom(|u| (std::f64::consts::PI * u).sin(), Shape::Decreasing);
        assert!(matches!(c.check_shape(&[]), Err(Error::Assumption(_))));
    }

    #[test]
    fn roy_examples() {
        assert_eq!(roy_mte(|u| u, 0.3), 0.3);
        assert!((roy_mte(|u| norm_quantile(u).unwrap(), 0.975) - 1.959_963_984_540_054).abs() < 1e-9);
        assert_eq!(roy_mte(|_| 2.5, 0.1), 2.5);
    }
}
