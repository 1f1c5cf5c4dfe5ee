use serde::Serialize;

use super::choice::{fit_choice_probit, ChoiceFit};
use crate::error::{Error, Result};
use crate::model::{Dataset, MteCurve, MteForm, PropensityFn, Shape};
use crate::numerics::normal::norm_cdf;
use crate::numerics::{ols_fit, Matrix};

/// Partially linear fit `Y = xβ₀ + P̂·x(β₁−β₀) + λ(P̂|θ)` with a polynomial
/// `λ(p) = Σ_{k=2}^{degree} θₖ pᵏ`. The constant and linear parts of λ are
/// absorbed by the intercept and the intercept·P̂ term, so λ′ is known
/// only up to a constant that is folded into the MTE level.
#[derive(Debug, Clone, Serialize)]
pub struct SemiparametricFit {
    pub beta0: Vec<f64>,
    pub beta1: Vec<f64>,
    /// `θ₂, …, θ_degree`.
    pub theta: Vec<f64>,
    pub degree: usize,
    pub propensity: PropensityFn,
}

impl SemiparametricFit {
    /// `x'(β̂₁−β̂₀) + λ′(u|θ̂)`.
    pub fn mte(&self) -> MteCurve {
        let level = self.beta1.iter().zip(&self.beta0).map(|(a, b)| a - b).collect();
        let mut lp = vec![0.0];
        lp.extend(self.theta.iter().enumerate().map(|(j, t)| (j + 2) as f64 * t));
        MteCurve::new(MteForm::PolyLambdaPrime { level_coef: level, lambda_prime: lp }, Shape::None)
    }
}

pub fn semiparametric_two_stage(data: &Dataset, degree: usize) -> Result<SemiparametricFit> {
    let choice = fit_choice_probit(data)?;
    semiparametric_with_choice(data, &choice, degree)
}

pub fn semiparametric_with_choice(data: &Dataset, choice: &ChoiceFit, degree: usize) -> Result<SemiparametricFit> {
    if !(2..=5).contains(&degree) {
        return Err(Error::InvalidParams(format!("polynomial degree {degree} outside [2, 5]")));
    }
    let k = data.x_dim;
    let cols = 2 * (k + 1) + degree - 1;
    let mut v = Vec::with_capacity(data.len() * cols);
    for i in 0..data.len() {
        let p = norm_cdf(choice.index(data, i));
        let x = data.x_row(i);
        v.push(1.0);
        v.extend_from_slice(x);
        v.push(p);
        v.extend(x.iter().map(|a| a * p));
        v.extend((2..=degree).map(|e| p.powi(e as i32)));
    }
    let design = Matrix::from_row_major(data.len(), cols, v)?;
    let coef = ols_fit(&design, &data.y).map_err(|e| match e {
        Error::RankDeficient { column } => Error::Collinear(format!(
            "design column {column} is collinear (polynomial in the propensity against covariates)"
        )),
        e => e,
    })?;
    let beta0 = coef[..=k].to_vec();
    let beta1 = beta0.iter().zip(&coef[k + 1..2 * (k + 1)]).map(|(a, b)| a + b).collect();
    Ok(SemiparametricFit {
        beta0,
        beta1,
        theta: coef[2 * (k + 1)..].to_vec(),
        degree,
        propensity: choice.propensity.clone(),
    })
}
