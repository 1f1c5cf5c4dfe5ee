use rayon::prelude::*;
use serde::Serialize;

use super::linalg::{dot, solve_spd, Matrix};
use super::normal::{mills_ratio, norm_cdf};
use crate::error::{Error, IterRecord, Result};

pub const PROBIT_GRAD_TOL: f64 = 1e-8;
const MAX_ITER: usize = 100;
const MAX_HALVINGS: usize = 40;
const CHUNK: usize = 8192;

#[derive(Debug, Clone, Serialize)]
pub struct ProbitFit {
    pub coefficients: Vec<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    /// From the inverse observed information at the optimum.
    pub std_errors: Vec<f64>,
    pub trace: Vec<IterRecord>,
}

/// Probit log-likelihood `Σ log Φ(qᵢ xᵢᵀβ)` with `qᵢ = 2dᵢ − 1`.
pub fn probit_log_likelihood(design: &Matrix, choices: &[u8], beta: &[f64]) -> f64 {
    (0..design.rows())
        .into_par_iter()
        .with_min_len(CHUNK)
        .map(|i| {
            let q = if choices[i] == 1 { 1.0 } else { -1.0 };
            log_cdf(q * dot(design.row(i), beta))
        })
        .sum()
}

fn log_cdf(t: f64) -> f64 {
    if t > -30.0 {
        norm_cdf(t).ln()
    } else {
        // log Φ(t) ≈ log φ(t) − log(−t) for very negative t
        -0.5 * t * t - (-t).ln() - 0.918_938_533_204_672_8 - (1.0 - 1.0 / (t * t)).ln()
    }
}

struct Moments {
    ll: f64,
    grad: Vec<f64>,
    info: Vec<Vec<f64>>,
    min_margin: f64,
}

fn moments(design: &Matrix, choices: &[u8], beta: &[f64]) -> Moments {
    let k = beta.len();
    let zero = || Moments {
        ll: 0.0,
        grad: vec![0.0; k],
        info: vec![vec![0.0; k]; k],
        min_margin: f64::INFINITY,
    };
    (0..design.rows())
        .into_par_iter()
        .with_min_len(CHUNK)
        .fold(zero, |mut acc, i| {
            let x = design.row(i);
            let q = if choices[i] == 1 { 1.0 } else { -1.0 };
            let t = q * dot(x, beta);
            let lam = mills_ratio(t);
            let w = lam * (lam + t);
            acc.ll += log_cdf(t);
            acc.min_margin = acc.min_margin.min(t);
            for a in 0..k {
                acc.grad[a] += q * lam * x[a];
                for b in 0..=a {
                    acc.info[a][b] += w * x[a] * x[b];
                }
            }
            acc
        })
        .reduce(zero, |mut l, r| {
            l.ll += r.ll;
            l.min_margin = l.min_margin.min(r.min_margin);
            for a in 0..k {
                l.grad[a] += r.grad[a];
                for b in 0..=a {
                    l.info[a][b] += r.info[a][b];
                }
            }
            l
        })
}

fn symmetric(lower: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut m = lower.to_vec();
    for a in 0..m.len() {
        for b in a + 1..m.len() {
            m[a][b] = m[b][a];
        }
    }
    m
}

/// Newton–Raphson probit MLE started at zero with step halving.
///
/// Converged when the norm of the per-observation mean score is at most
/// [`PROBIT_GRAD_TOL`].
pub fn probit_fit(design: &Matrix, choices: &[u8]) -> Result<ProbitFit> {
    let (n, k) = (design.rows(), design.cols());
    if n != choices.len() {
        return Err(Error::InvalidParams(format!(
            "design has {n} rows but {} choices",
            choices.len()
        )));
    }
    if choices.iter().any(|&d| d > 1) {
        return Err(Error::Data("choices must be 0 or 1".into()));
    }
    let takers = choices.iter().filter(|&&d| d == 1).count();
    if takers == 0 || takers == n {
        return Err(Error::Data("both choice values must be present".into()));
    }
    let nf = n as f64;
    let mut beta = vec![0.0; k];
    let mut m = moments(design, choices, &beta);
    let mut trace = Vec::new();

    for iter in 0..=MAX_ITER {
        let gnorm = dot(&m.grad, &m.grad).sqrt() / nf;
        trace.push(IterRecord { iteration: iter, log_likelihood: m.ll, gradient_norm: gnorm });
        // every observation strictly on its own side: the sample is
        // linearly separable and no finite maximizer exists
        if m.min_margin > 0.0 || beta.iter().any(|b| b.abs() > 1e8) {
            return Err(Error::Separation { trace });
        }
        let info = symmetric(&m.info);
        if gnorm <= PROBIT_GRAD_TOL {
            let std_errors = (0..k)
                .map(|j| {
                    let mut e = vec![0.0; k];
                    e[j] = 1.0;
                    solve_spd(&info, &e).map(|c| c[j].max(0.0).sqrt())
                })
                .collect::<Result<_>>()
                .map_err(|_| Error::Separation { trace: trace.clone() })?;
            return Ok(ProbitFit { coefficients: beta, log_likelihood: m.ll, iterations: iter, std_errors, trace });
        }
        if iter == MAX_ITER {
            break;
        }
        let step = solve_spd(&info, &m.grad).map_err(|_| Error::Separation { trace: trace.clone() })?;
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            let cm = moments(design, choices, &cand);
            if cm.ll >= m.ll - 1e-12 * m.ll.abs() {
                accepted = Some((cand, cm));
                break;
            }
            scale *= 0.5;
        }
        match accepted {
            Some((b, cm)) => {
                beta = b;
                m = cm;
            }
            None => break,
        }
    }
    Err(Error::NonConvergence { what: "probit", iterations: trace.len(), trace })
}
