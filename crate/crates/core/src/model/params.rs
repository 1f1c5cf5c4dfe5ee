use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::linalg::{cholesky_psd, dot};

/// Normal selection model.
///
/// `(U1, U0, ε) ~ N(0, Σ)` and `D = 1{xᵀβ_D + zγ + ε ≥ 0}`. The
/// correlations `rho1`, `rho0` are with the choice shock `ε`, so the
/// resistance is `Ũ_D = −ε` and the MTE is `xᵀ(β₁−β₀) − (ρ₁σ₁−ρ₀σ₀)Φ⁻¹(u)`.
/// Coefficient vectors start with the intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionParams {
    pub beta1: Vec<f64>,
    pub beta0: Vec<f64>,
    #[serde(rename = "betaD")]
    pub beta_d: Vec<f64>,
    pub gamma: f64,
    pub sigma1: f64,
    pub sigma0: f64,
    pub rho1: f64,
    pub rho0: f64,
    pub rho01: f64,
}

impl SelectionParams {
    /// Estimates reported for the medical-major targeting exercise.
    /// Covariate vector is `[medical]`; `rho01` is not reported there and
    /// is set to zero.
    pub fn benchmark() -> Self {
        Self {
            beta1: vec![660.1336, 2677.209],
            beta0: vec![607.5856, 1743.9040],
            beta_d: vec![-0.9359, 0.2965],
            gamma: 0.0017,
            sigma1: 3399.0894,
            sigma0: 2596.7705,
            rho1: 0.3802,
            rho0: -0.0889,
            rho01: 0.0,
        }
    }

    pub fn x_dim(&self) -> usize {
        self.beta1.len().saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.beta1.len();
        if k == 0 || self.beta0.len() != k || self.beta_d.len() != k {
            return Err(Error::InvalidParams(
                "beta1, beta0 and betaD need the same nonzero length (intercept first)".into(),
            ));
        }
        let all = self.beta1.iter().chain(&self.beta0).chain(&self.beta_d);
        if all.chain([&self.gamma, &self.sigma1, &self.sigma0]).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("parameters must be finite".into()));
        }
        if !(self.sigma1 > 0.0 && self.sigma0 > 0.0) {
            return Err(Error::InvalidParams("sigma1 and sigma0 must be positive".into()));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidParams("gamma must be positive".into()));
        }
        for (name, r) in [("rho1", self.rho1), ("rho0", self.rho0), ("rho01", self.rho01)] {
            if !(-1.0..=1.0).contains(&r) {
                return Err(Error::InvalidParams(format!("{name} = {r} is outside [-1, 1]")));
            }
        }
        self.shock_factor().map(|_| ())
    }

    /// Covariance of `(U1, U0, ε)`.
    pub fn covariance(&self) -> [[f64; 3]; 3] {
        let (s1, s0) = (self.sigma1, self.sigma0);
        let c10 = self.rho01 * s1 * s0;
        let c1e = self.rho1 * s1;
        let c0e = self.rho0 * s0;
        [[s1 * s1, c10, c1e], [c10, s0 * s0, c0e], [c1e, c0e, 1.0]]
    }

    /// Lower Cholesky factor of the shock covariance; fails when Σ is not PSD.
    pub fn shock_factor(&self) -> Result<[[f64; 3]; 3]> {
        let c = self.covariance();
        let scale = self.sigma1.max(self.sigma0).max(1.0).powi(2);
        let rows: Vec<Vec<f64>> = c.iter().map(|r| r.to_vec()).collect();
        let l = cholesky_psd(&rows, 1e-10 * scale)?;
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            out[i].copy_from_slice(&l[i]);
        }
        Ok(out)
    }

    /// `ρ₁σ₁ − ρ₀σ₀`.
    pub fn mte_slope(&self) -> f64 {
        self.rho1 * self.sigma1 - self.rho0 * self.sigma0
    }

    pub fn level(&self, x: &[f64]) -> f64 {
        affine(&self.beta1, x) - affine(&self.beta0, x)
    }

    pub fn choice_index(&self, x: &[f64]) -> f64 {
        affine(&self.beta_d, x)
    }
}

/// `c₀ + Σ cₖ xₖ` for a coefficient vector with leading intercept.
pub fn affine(coef: &[f64], x: &[f64]) -> f64 {
    coef[0] + dot(&coef[1..], x)
}

/// One-dimensional sampling distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarDist {
    Constant { value: f64 },
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
    Bernoulli { p: f64 },
    Discrete { values: Vec<f64>, weights: Vec<f64> },
}

impl ScalarDist {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.into()));
        match self {
            Self::Constant { value } if !value.is_finite() => bad("constant must be finite"),
            Self::Uniform { lo, hi } if !(lo.is_finite() && hi.is_finite() && lo <= hi) => {
                bad("uniform needs finite lo <= hi")
            }
            Self::Normal { mean, sd } if !(mean.is_finite() && sd.is_finite() && *sd >= 0.0) => {
                bad("normal needs finite mean and sd >= 0")
            }
            Self::Bernoulli { p } if !(0.0..=1.0).contains(p) => bad("bernoulli p must be in [0, 1]"),
            Self::Discrete { values, weights } => check_weights(values.len(), weights),
            _ => Ok(()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Self::Normal { mean, sd } => {
                let e: f64 = StandardNormal.sample(rng);
                mean + sd * e
            }
            Self::Bernoulli { p } => f64::from(u8::from(rng.random::<f64>() < *p)),
            Self::Discrete { values, weights } => values[pick(weights, rng)],
        }
    }

    /// Support bounds (±∞ for the normal).
    pub fn range(&self) -> (f64, f64) {
        match self {
            Self::Constant { value } => (*value, *value),
            Self::Uniform { lo, hi } => (*lo, *hi),
            Self::Normal { sd, mean } if *sd == 0.0 => (*mean, *mean),
            Self::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Self::Bernoulli { .. } => (0.0, 1.0),
            Self::Discrete { values, .. } => values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v))),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Uniform { lo, hi } => 0.5 * (lo + hi),
            Self::Normal { mean, .. } => *mean,
            Self::Bernoulli { p } => *p,
            Self::Discrete { values, weights } => {
                let total: f64 = weights.iter().sum();
                values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total
            }
        }
    }
}

/// Distribution of a covariate or instrument vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VectorDist {
    /// Finitely many support points with probabilities.
    Cells { points: Vec<Vec<f64>>, weights: Vec<f64> },
    /// Independent components.
    Independent { components: Vec<ScalarDist> },
}

impl VectorDist {
    pub fn empty() -> Self {
        Self::Independent { components: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Cells { points, .. } => points.first().map_or(0, Vec::len),
            Self::Independent { components } => components.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Cells { points, weights } => {
                if points.is_empty() {
                    return Err(Error::InvalidParams("cell distribution needs points".into()));
                }
                let d = points[0].len();
                if points.iter().any(|p| p.len() != d || p.iter().any(|v| !v.is_finite())) {
                    return Err(Error::InvalidParams("cell points must share a finite dimension".into()));
                }
                check_weights(points.len(), weights)
            }
            Self::Independent { components } => components.iter().try_for_each(ScalarDist::validate),
        }
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        match self {
            Self::Cells { points, weights } => out.extend_from_slice(&points[pick(weights, rng)]),
            Self::Independent { components } => out.extend(components.iter().map(|c| c.sample(rng))),
        }
    }

    /// Finite support with probabilities, when the distribution is discrete.
    pub fn support(&self) -> Option<Vec<(Vec<f64>, f64)>> {
        match self {
            Self::Cells { points, weights } => {
                let total: f64 = weights.iter().sum();
                Some(points.iter().cloned().zip(weights.iter().map(|w| w / total)).collect())
            }
            Self::Independent { components } => {
                let mut acc: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 1.0)];
                for c in components {
                    let atoms: Vec<(f64, f64)> = match c {
                        ScalarDist::Constant { value } => vec![(*value, 1.0)],
                        ScalarDist::Bernoulli { p } => vec![(0.0, 1.0 - p), (1.0, *p)],
                        ScalarDist::Discrete { values, weights } => {
                            let t: f64 = weights.iter().sum();
                            values.iter().copied().zip(weights.iter().map(|w| w / t)).collect()
                        }
                        _ => return None,
                    };
                    acc = acc
                        .iter()
                        .flat_map(|(p, w)| {
                            atoms.iter().map(move |(v, q)| {
                                let mut pt = p.clone();
                                pt.push(*v);
                                (pt, w * q)
                            })
                        })
                        .collect();
                }
                Some(acc)
            }
        }
    }
}

fn check_weights(n: usize, weights: &[f64]) -> Result<()> {
    if n == 0 || weights.len() != n {
        return Err(Error::InvalidParams("discrete distribution needs one weight per value".into()));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::InvalidParams("weights must be nonnegative with positive total".into()));
    }
    Ok(())
}

fn pick<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut t = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if t < *w {
            return i;
        }
        t -= w;
    }
    weights.len() - 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmark_slope_and_level() {
        let p = SelectionParams::benchmark();
        p.validate().unwrap();
        assert!((p.mte_slope() - 1523.186_687_33).abs() < 1e-6);
        assert!((p.level(&[1.0]) - 985.853).abs() < 1e-9);
        assert!((p.level(&[0.0]) - 52.548).abs() < 1e-9);
    }

    #[test]
    fn rejects_non_psd_covariance() {
        let mut p = SelectionParams::benchmark();
        p.rho1 = 0.9;
        p.rho0 = -0.9;
        p.rho01 = 0.9;
        assert!(matches!(p.validate(), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn json_field_names() {
        let p = SelectionParams::benchmark();
        let v = serde_json::to_value(&p).unwrap();
        for key in ["beta1", "beta0", "betaD", "gamma", "sigma1", "sigma0", "rho1", "rho0", "rho01"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        let mut bad = v.clone();
        bad["extra"] = serde_json::json!(1);
        assert!(serde_json::from_value::<SelectionParams>(bad).is_err());
    }

    #[test]
    fn independent_support_is_product() {
        let d = VectorDist::Independent {
            components: vec![ScalarDist::Bernoulli { p: 0.25 }, ScalarDist::Constant { value: 2.0 }],
        };
        let s = d.support().unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[1], (vec![1.0, 2.0], 0.25));
    }
}
