use serde::Serialize;

use crate::error::Result;
use crate::model::{Dataset, PropensityFn};
use crate::numerics::{probit_fit, Matrix, ProbitFit};

/// Probit choice equation on `[1, x, w, z]`.
#[derive(Debug, Clone, Serialize)]
pub struct ChoiceFit {
    pub propensity: PropensityFn,
    pub beta_d: Vec<f64>,
    pub beta_w: Vec<f64>,
    pub gamma: f64,
    pub std_errors: Vec<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

impl ChoiceFit {
    /// `xᵀβ_D + wᵀβ_W + γz` for record `i`.
    pub fn index(&self, data: &Dataset, i: usize) -> f64 {
        let x = data.x_row(i);
        let w = data.w_row(i);
        self.beta_d[0]
            + x.iter().zip(&self.beta_d[1..]).map(|(a, b)| a * b).sum::<f64>()
            + w.iter().zip(&self.beta_w).map(|(a, b)| a * b).sum::<f64>()
            + self.gamma * data.z[i]
    }
}

pub(crate) fn choice_design(data: &Dataset) -> Result<Matrix> {
    let (k, m) = (data.x_dim, data.w_dim);
    let cols = 2 + k + m;
    let mut v = Vec::with_capacity(data.len() * cols);
    for i in 0..data.len() {
        v.push(1.0);
        v.extend_from_slice(data.x_row(i));
        v.extend_from_slice(data.w_row(i));
        v.push(data.z[i]);
    }
    Matrix::from_row_major(data.len(), cols, v)
}

pub fn fit_choice_probit(data: &Dataset) -> Result<ChoiceFit> {
    data.validate()?;
    let design = choice_design(data)?;
    let ProbitFit { coefficients: c, log_likelihood, iterations, std_errors, .. } = probit_fit(&design, &data.d)?;
    let (k, m) = (data.x_dim, data.w_dim);
    let beta_d = c[..=k].to_vec();
    let beta_w = c[k + 1..k + 1 + m].to_vec();
    let gamma = c[k + 1 + m];
    let se_gamma = std_errors[k + 1 + m];
    let mut warnings = Vec::new();
    if !(gamma > 2.0 * se_gamma) {
        let msg = format!(
            "subsidy coefficient {gamma:.4e} (s.e. {se_gamma:.2e}) is not significantly positive; the propensity may not be invertible in z"
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let propensity = PropensityFn::ProbitIndex { beta_d: beta_d.clone(), beta_w: beta_w.clone(), gamma };
    Ok(ChoiceFit { propensity, beta_d, beta_w, gamma, std_errors, log_likelihood, iterations, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{simulate_normal, ScalarDist, SelectionParams, VectorDist};

    fn medical() -> VectorDist {
        VectorDist::Cells { points: vec![vec![0.0], vec![1.0]], weights: vec![0.5, 0.5] }
    }

    #[test]
    fn recovers_benchmark_choice() {
        let p = SelectionParams::benchmark();
        let z = ScalarDist::Uniform { lo: 0.0, hi: 900.0 };
        let data = simulate_normal(&p, 200_000, &medical(), &VectorDist::empty(), &z, 4).unwrap();
        let fit = fit_choice_probit(&data).unwrap();
        let truth = [p.beta_d[0], p.beta_d[1], p.gamma];
        let est = [fit.beta_d[0], fit.beta_d[1], fit.gamma];
        for j in 0..3 {
            assert!((est[j] - truth[j]).abs() < 4.0 * fit.std_errors[j], "{j}: {} vs {}", est[j], truth[j]);
        }
        assert!(fit.warnings.is_empty());
    }

    #[test]
    fn zero_gamma_warns() {
        let mut p = SelectionParams::benchmark();
        p.gamma = 1e-12;
        let z = ScalarDist::Uniform { lo: 0.0, hi: 1.0 };
        let data = simulate_normal(&p, 20_000, &medical(), &VectorDist::empty(), &z, 9).unwrap();
        let fit = fit_choice_probit(&data).unwrap();
        assert_eq!(fit.warnings.len(), 1);
    }
}
