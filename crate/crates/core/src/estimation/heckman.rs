use std::collections::BTreeMap;

use serde::Serialize;

use super::choice::{fit_choice_probit, ChoiceFit};
use crate::error::{Error, Result};
use crate::model::{Dataset, MteCurve, SelectionParams};
use crate::numerics::normal::{mills_ratio, norm_cdf};
use crate::numerics::{ols_fit, Matrix};

const PROB_FLOOR: f64 = 1e-10;

/// Two-step estimates of the normal selection model.
#[derive(Debug, Clone, Serialize)]
pub struct HeckmanFit {
    pub beta_d: Vec<f64>,
    pub beta_w: Vec<f64>,
    pub gamma: f64,
    pub beta1: Vec<f64>,
    pub beta0: Vec<f64>,
    /// Mills-ratio coefficients `ρ₁σ₁` and `ρ₀σ₀`.
    pub rho1_sigma1: f64,
    pub rho0_sigma0: f64,
    pub rho1: f64,
    pub rho0: f64,
    pub sigma1: f64,
    pub sigma0: f64,
    pub n: usize,
    pub excluded: usize,
    pub warnings: Vec<String>,
}

impl HeckmanFit {
    /// Parameter vector with `ρ₀₁ = 0`; `beta_w` must be empty.
    pub fn to_params(&self) -> Result<SelectionParams> {
        if !self.beta_w.is_empty() {
            return Err(Error::InvalidParams("the normal model has no instrument coefficients".into()));
        }
        Ok(SelectionParams {
            beta1: self.beta1.clone(),
            beta0: self.beta0.clone(),
            beta_d: self.beta_d.clone(),
            gamma: self.gamma,
            sigma1: self.sigma1,
            sigma0: self.sigma0,
            rho1: self.rho1,
            rho0: self.rho0,
            rho01: 0.0,
        })
    }

    /// Named estimates in the layout `choice.*`, `y1.*`, `y0.*`, `rho*`,
    /// `sigma*`. `x_names` labels the covariates (default `x1`, `x2`, …).
    pub fn table(&self, x_names: &[String]) -> BTreeMap<String, f64> {
        let name = |j: usize| x_names.get(j).cloned().unwrap_or_else(|| format!("x{}", j + 1));
        let mut t = BTreeMap::new();
        for (prefix, coef) in [("choice", &self.beta_d), ("y1", &self.beta1), ("y0", &self.beta0)] {
            t.insert(format!("{prefix}.intercept"), coef[0]);
            for (j, c) in coef[1..].iter().enumerate() {
                t.insert(format!("{prefix}.{}", name(j)), *c);
            }
        }
        for (j, c) in self.beta_w.iter().enumerate() {
            t.insert(format!("choice.w{}", j + 1), *c);
        }
        t.insert("choice.subsidy".into(), self.gamma);
        t.insert("rho1".into(), self.rho1);
        t.insert("rho0".into(), self.rho0);
        t.insert("sigma1".into(), self.sigma1);
        t.insert("sigma0".into(), self.sigma0);
        t.insert("rho1_sigma1".into(), self.rho1_sigma1);
        t.insert("rho0_sigma0".into(), self.rho0_sigma0);
        t
    }
}

struct Arm {
    coef: Vec<f64>,
    mills: f64,
    sigma: f64,
    rho: f64,
    clipped: bool,
}

/// Outcome regression for one treatment arm: `y` on `[1, x, λ]` with
/// `λ = φ/Φ` for takers and `−φ/(1−Φ)` for non-takers.
fn arm(data: &Dataset, rows: &[(usize, f64)], taker: bool) -> Result<Arm> {
    let k = data.x_dim;
    let mut v = Vec::with_capacity(rows.len() * (k + 2));
    let mut y = Vec::with_capacity(rows.len());
    let mut lam = Vec::with_capacity(rows.len());
    for &(i, idx) in rows {
        let l = if taker { mills_ratio(idx) } else { -mills_ratio(-idx) };
        v.push(1.0);
        v.extend_from_slice(data.x_row(i));
        v.push(l);
        y.push(data.y[i]);
        lam.push((l, idx));
    }
    let design = Matrix::from_row_major(rows.len(), k + 2, v)?;
    let coef = ols_fit(&design, &y)?;
    let mills = coef[k + 1];
    let nf = rows.len() as f64;
    let mut rss = 0.0;
    let mut corr = 0.0;
    for (r, &(l, idx)) in lam.iter().enumerate() {
        let fitted: f64 = design.row(r).iter().zip(&coef).map(|(a, b)| a * b).sum();
        rss += (y[r] - fitted).powi(2);
        // Var(U | selected) = σ² − (ρσ)² · δ with δ = λ(λ + idx) for takers
        // and λ(λ − idx) with λ = φ/(1−Φ) for non-takers
        corr += if taker { l * (l + idx) } else { -l * (-l - idx) };
    }
    let var = rss / nf + mills * mills * corr / nf;
    let sigma = var.max(f64::MIN_POSITIVE).sqrt();
    let raw = mills / sigma;
    let rho = raw.clamp(-1.0, 1.0);
    Ok(Arm { coef: coef[..=k].to_vec(), mills, sigma, rho, clipped: raw != rho })
}

pub fn heckman_two_step(data: &Dataset) -> Result<HeckmanFit> {
    let choice = fit_choice_probit(data)?;
    heckman_with_choice(data, choice)
}

/// Second step given an already fitted choice equation.
pub fn heckman_with_choice(data: &Dataset, choice: ChoiceFit) -> Result<HeckmanFit> {
    let mut warnings = choice.warnings.clone();
    let (mut takers, mut others) = (Vec::new(), Vec::new());
    let mut excluded = 0;
    for i in 0..data.len() {
        let idx = choice.index(data, i);
        let p = norm_cdf(idx);
        if data.d[i] == 1 {
            if p < PROB_FLOOR {
                excluded += 1;
            } else {
                takers.push((i, idx));
            }
        } else if 1.0 - p < PROB_FLOOR {
            excluded += 1;
        } else {
            others.push((i, idx));
        }
    }
    if excluded > 0 {
        let msg = format!("{excluded} records with fitted probabilities within {PROB_FLOOR:e} of 0 or 1 excluded");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let a1 = arm(data, &takers, true)?;
    let a0 = arm(data, &others, false)?;
    for (name, a) in [("rho1", &a1), ("rho0", &a0)] {
        if a.clipped {
            let msg = format!("{name} estimate clipped to {}", a.rho);
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }
    Ok(HeckmanFit {
        beta_d: choice.beta_d,
        beta_w: choice.beta_w,
        gamma: choice.gamma,
        beta1: a1.coef,
        beta0: a0.coef,
        rho1_sigma1: a1.mills,
        rho0_sigma0: a0.mills,
        rho1: a1.rho,
        rho0: a0.rho,
        sigma1: a1.sigma,
        sigma0: a0.sigma,
        n: data.len(),
        excluded,
        warnings,
    })
}

/// `x'(β̂₁−β̂₀) − (ρ̂₁σ̂₁ − ρ̂₀σ̂₀)Φ⁻¹(u)`, flagged decreasing iff the slope
/// is positive.
pub fn mte_from_heckman(fit: &HeckmanFit) -> MteCurve {
    let level = fit.beta1.iter().zip(&fit.beta0).map(|(a, b)| a - b).collect();
    MteCurve::normal(level, fit.rho1 * fit.sigma1 - fit.rho0 * fit.sigma0)
}
