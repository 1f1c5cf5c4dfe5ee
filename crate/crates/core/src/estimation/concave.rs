use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Dataset, PropensityFn};
use crate::numerics::linalg::dot;
use crate::numerics::{ols_fit, Grid, Matrix};

pub const MAX_KNOTS: usize = 512;

/// Concave least-squares fit and its maximiser.
#[derive(Debug, Clone, Serialize)]
pub struct ConcaveFit {
    /// Piecewise-linear fit on its vertices.
    pub curve: Grid,
    pub argmax: f64,
    pub max_value: f64,
    /// Active-set additions.
    pub iterations: usize,
    /// Largest slope increase before the final majorant repair.
    pub max_violation: f64,
}

/// Sorted knots with bin means and counts; at most [`MAX_KNOTS`] bins of
/// near-equal size, never splitting tied regressor values.
fn bin(r: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut idx: Vec<usize> = (0..r.len()).collect();
    idx.sort_by(|&a, &b| r[a].total_cmp(&r[b]));
    let target = r.len().div_ceil(MAX_KNOTS).max(1);
    let (mut xs, mut ys, mut ws) = (Vec::new(), Vec::new(), Vec::new());
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        let (mut sx, mut sy) = (0.0, 0.0);
        while j < idx.len() && (j - i < target || r[idx[j]] == r[idx[j - 1]]) {
            sx += r[idx[j]];
            sy += y[idx[j]];
            j += 1;
        }
        let n = (j - i) as f64;
        xs.push(sx / n);
        ys.push(sy / n);
        ws.push(n);
        i = j;
    }
    (xs, ys, ws)
}

fn slope_changes(x: &[f64], f: &[f64]) -> f64 {
    (1..x.len() - 1)
        .map(|j| (f[j + 1] - f[j]) / (x[j + 1] - x[j]) - (f[j] - f[j - 1]) / (x[j] - x[j - 1]))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Vertices of the least concave majorant of `(x, f)`.
fn concave_hull(x: &[f64], f: &[f64]) -> Vec<usize> {
    let mut hull: Vec<usize> = Vec::new();
    for i in 0..x.len() {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            // drop b when it lies on or below the chord from a to i
            let cross = (x[b] - x[a]) * (f[i] - f[a]) - (f[b] - f[a]) * (x[i] - x[a]);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    hull
}

/// Weighted least squares over concave piecewise-linear functions on the
/// binned regressor. The fit is `α + βx − Σⱼ θⱼ(x − xⱼ)₊` with `θ ≥ 0`,
/// solved exactly by a Lawson–Hanson active-set iteration.
pub fn concave_fit(r: &[f64], y: &[f64]) -> Result<ConcaveFit> {
    if r.len() != y.len() {
        return Err(Error::InvalidParams("regressor and outcome lengths differ".into()));
    }
    if r.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite values in concave regression".into()));
    }
    let (x, target, w) = bin(r, y);
    if x.len() < 3 {
        return Err(Error::Data(format!(
            "concave regression needs at least 3 distinct regressor values, found {}",
            x.len()
        )));
    }
    let m = x.len();
    let (lo, span) = (x[0], x[m - 1] - x[0]);
    let t: Vec<f64> = x.iter().map(|v| (v - lo) / span).collect();
    let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let wy: Vec<f64> = target.iter().zip(&sw).map(|(a, b)| a * b).collect();
    // weighted columns: 0 intercept, 1 slope, 1 + j hinge at interior knot j
    let column = |c: usize| -> Vec<f64> {
        (0..m)
            .map(|i| {
                let v = match c {
                    0 => 1.0,
                    1 => t[i],
                    j => -(t[i] - t[j - 1]).max(0.0),
                };
                v * sw[i]
            })
            .collect()
    };
    let cols: Vec<Vec<f64>> = (0..m).map(column).collect();
    let col_norm: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    let y_norm = dot(&wy, &wy).sqrt().max(1e-300);
    let fitted_of = |coef: &[f64]| -> Vec<f64> {
        (0..m).map(|i| (0..m).map(|c| coef[c] * cols[c][i]).sum::<f64>()).collect()
    };
    let ls = |set: &[usize]| -> Result<Vec<f64>> {
        let rows: Vec<Vec<f64>> = (0..m).map(|i| set.iter().map(|&c| cols[c][i]).collect()).collect();
        ols_fit(&Matrix::from_rows(&rows)?, &wy)
    };

    let mut coef = vec![0.0; m];
    let mut passive: Vec<usize> = vec![0, 1];
    let s = ls(&passive)?;
    coef[0] = s[0];
    coef[1] = s[1];
    let mut iterations = 0;
    let limit = 3 * m + 10;
    loop {
        let fit = fitted_of(&coef);
        let resid: Vec<f64> = wy.iter().zip(&fit).map(|(a, b)| a - b).collect();
        let best = (2..m)
            .filter(|c| !passive.contains(c))
            .map(|c| (c, dot(&cols[c], &resid) / (col_norm[c] * y_norm)))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        match best {
            Some((c, g)) if g > 1e-12 && iterations < limit => passive.push(c),
            _ => break,
        }
        iterations += 1;
        loop {
            let s = ls(&passive)?;
            let blocked = passive.iter().zip(&s).any(|(&c, &v)| c >= 2 && v <= 0.0);
            if !blocked {
                for (&c, &v) in passive.iter().zip(&s) {
                    coef[c] = v;
                }
                break;
            }
            let mut alpha = 1.0f64;
            for (&c, &v) in passive.iter().zip(&s) {
                if c >= 2 && v <= 0.0 {
                    alpha = alpha.min(coef[c] / (coef[c] - v));
                }
            }
            for (&c, &v) in passive.iter().zip(&s) {
                coef[c] += alpha * (v - coef[c]);
            }
            passive.retain(|&c| c < 2 || coef[c] > 1e-15 * (1.0 + coef[c].abs()));
            for c in 2..m {
                if !passive.contains(&c) {
                    coef[c] = 0.0;
                }
            }
        }
    }
    let f: Vec<f64> = fitted_of(&coef).iter().zip(&sw).map(|(a, b)| a / b).collect();
    let violation = slope_changes(&x, &f);
    let hull = concave_hull(&x, &f);
    let best = hull.iter().copied().fold(hull[0], |b, i| if f[i] > f[b] { i } else { b });
    Ok(ConcaveFit {
        argmax: x[best],
        max_value: f[best],
        curve: Grid::new(hull.iter().map(|&i| x[i]).collect(), hull.iter().map(|&i| f[i]).collect())?,
        iterations,
        max_violation: violation.max(0.0),
    })
}

/// Which regressor the concave learner used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regressor {
    Propensity,
    Subsidy,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConcavePolicy {
    pub x: Vec<f64>,
    pub regressor: Regressor,
    pub fit: ConcaveFit,
}

/// Per covariate cell, concave regression of `y` on the propensity (when
/// known) or on the subsidy itself; the maximiser is the estimated
/// optimal take-up or subsidy.
pub fn concave_policy_learn(data: &Dataset, g: Option<&PropensityFn>) -> Result<Vec<ConcavePolicy>> {
    data.validate()?;
    let mut out = Vec::new();
    for x in data.distinct_x() {
        let rows = data.rows_in_x_cell(&x);
        let r: Vec<f64> = match g {
            Some(g) => rows
                .iter()
                .map(|&i| Ok(g.at(&x, data.w_row(i))?.value(data.z[i])))
                .collect::<Result<_>>()?,
            None => rows.iter().map(|&i| data.z[i]).collect(),
        };
        let y: Vec<f64> = rows.iter().map(|&i| data.y[i]).collect();
        let regressor = if g.is_some() { Regressor::Propensity } else { Regressor::Subsidy };
        out.push(ConcavePolicy { x, regressor, fit: concave_fit(&r, &y)? });
    }
    Ok(out)
}

/// Largest slope increase across interior knots of a grid curve.
pub fn max_slope_increase(curve: &Grid) -> f64 {
    slope_changes(curve.points(), curve.values())
}
