use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Serialize};

use super::cost::CostSpec;
use super::rule::SubsidyRule;
use crate::error::{Error, Result};
use crate::model::params::affine;
use crate::model::simulate::{draw_shocks, par_chunks};
use crate::model::SelectionParams;

/// Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

/// Brute-force welfare: simulates individuals from the normal model, applies
/// the rule, and averages `Y^π − C^π`. Includes `E[Y₀]`.
pub fn mc_oracle_welfare(
    params: &SelectionParams,
    cost: &CostSpec,
    rule: &SubsidyRule,
    n: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n < 2 {
        return Err(Error::InvalidParams("oracle needs at least 2 draws".into()));
    }
    params.validate()?;
    rule.validate()?;
    cost.validate()?;
    if let Some(c) = rule.cells.iter().find(|c| c.x.len() != params.x_dim()) {
        return Err(Error::InvalidParams(format!("cell {} has the wrong covariate dimension", c.name())));
    }
    let l = params.shock_factor()?;
    let weights: Vec<f64> = rule.cells.iter().map(|c| c.weight).collect();
    let picker = WeightedIndex::new(&weights).map_err(|e| Error::InvalidParams(e.to_string()))?;
    // per-cell constants: (mu1, mu0, choice index, c1, c0)
    let consts: Vec<[f64; 5]> = rule
        .cells
        .iter()
        .zip(&rule.assignment)
        .map(|(c, &z)| {
            Ok([
                affine(&params.beta1, &c.x),
                affine(&params.beta0, &c.x),
                params.choice_index(&c.x) + params.gamma * z,
                cost.cost(c, z, 1)?,
                cost.cost(c, z, 0)?,
            ])
        })
        .collect::<Result<_>>()?;
    let parts = par_chunks(n, seed, |rng, len| {
        let (mut s, mut ss) = (0.0, 0.0);
        for _ in 0..len {
            let [mu1, mu0, idx, c1, c0] = consts[picker.sample(rng)];
            let [u1, u0, eps] = draw_shocks(&l, rng);
            let v = if idx + eps >= 0.0 { mu1 + u1 - c1 } else { mu0 + u0 - c0 };
            s += v;
            ss += v * v;
        }
        (s, ss)
    });
    let (s, ss) = parts.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let nf = n as f64;
    let mean = s / nf;
    let var = ((ss - nf * mean * mean) / (nf - 1.0)).max(0.0);
    Ok(McEstimate { mean, std_error: (var / nf).sqrt(), n })
}

/// `E[Y₀] = Σ weight · x'β₀` under the normal model.
pub fn normal_baseline(params: &SelectionParams, rule: &SubsidyRule) -> f64 {
    rule.cells.iter().map(|c| c.weight * affine(&params.beta0, &c.x)).sum()
}
