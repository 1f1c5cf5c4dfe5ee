use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, GridCell, MteCurve, MteForm, PropensityFn, Shape};
use crate::numerics::Grid;

pub const MIN_CELL_SIZE: usize = 500;
pub const MIN_WINDOW: usize = 30;

/// Local-linear estimates for one covariate cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LivCell {
    pub x: Vec<f64>,
    pub bandwidth: f64,
    pub u: Vec<f64>,
    pub estimate: Vec<Option<f64>>,
    pub std_error: Vec<Option<f64>>,
    pub count: Vec<usize>,
}

impl LivCell {
    pub fn mask(&self) -> Vec<bool> {
        self.estimate.iter().map(Option::is_some).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LivFit {
    pub mte: MteCurve,
    pub cells: Vec<LivCell>,
    pub warnings: Vec<String>,
}

/// `1.06 · sd(p) · n^{-1/5}`.
pub fn default_bandwidth(p: &[f64]) -> f64 {
    let n = p.len() as f64;
    let mean = p.iter().sum::<f64>() / n;
    let sd = (p.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    1.06 * sd * n.powf(-0.2)
}

/// Slope of the Epanechnikov-weighted local-linear fit at `u`, with its
/// heteroskedasticity-robust standard error. `pts` is sorted by `p`.
fn local_slope(pts: &[(f64, f64)], u: f64, h: f64) -> (usize, Option<(f64, f64)>) {
    let lo = pts.partition_point(|q| q.0 < u - h);
    let hi = pts.partition_point(|q| q.0 <= u + h);
    let win = &pts[lo..hi];
    if win.len() < MIN_WINDOW {
        return (win.len(), None);
    }
    let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(p, y) in win {
        let t = p - u;
        let r = t / h;
        let k = 0.75 * (1.0 - r * r).max(0.0);
        s0 += k;
        s1 += k * t;
        s2 += k * t * t;
        t0 += k * y;
        t1 += k * t * y;
    }
    let det = s0 * s2 - s1 * s1;
    if !(det > 1e-10 * s0 * s0 * h * h) {
        return (win.len(), None);
    }
    let slope = (s0 * t1 - s1 * t0) / det;
    let icpt = (t0 - s1 * slope) / s0;
    let mut v = 0.0;
    for &(p, y) in win {
        let t = p - u;
        let r = t / h;
        let k = 0.75 * (1.0 - r * r).max(0.0);
        let e = y - icpt - slope * t;
        let a = k * (s0 * t - s1);
        v += a * a * e * e;
    }
    (win.len(), Some((slope, v.sqrt() / det)))
}

/// Local instrumental variables: per covariate cell, the derivative of
/// `E[Y | X = x, g = p]` at each grid `u`. Grid points with fewer than
/// [`MIN_WINDOW`] observations within one bandwidth (or a degenerate
/// window) are left out of the identified mask.
pub fn liv_estimate(data: &Dataset, g: &PropensityFn, u_grid: &[f64], bandwidth: Option<f64>) -> Result<LivFit> {
    data.validate()?;
    if u_grid.len() < 2 || u_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParams("u grid needs at least two increasing points".into()));
    }
    if u_grid.iter().any(|u| !(0.0..=1.0).contains(u)) {
        return Err(Error::InvalidParams("u grid must lie in [0, 1]".into()));
    }
    if let Some(h) = bandwidth {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParams(format!("bandwidth {h} must be positive")));
        }
    }
    let mut warnings = Vec::new();
    let mut cells = Vec::new();
    let mut curves = Vec::new();
    for x in data.distinct_x() {
        let rows = data.rows_in_x_cell(&x);
        if rows.len() < MIN_CELL_SIZE {
            return Err(Error::Data(format!(
                "covariate cell {x:?} has {} records; LIV needs at least {MIN_CELL_SIZE}",
                rows.len()
            )));
        }
        let mut pts = Vec::with_capacity(rows.len());
        for &i in &rows {
            let p = g.at(&x, data.w_row(i))?.value(data.z[i]);
            pts.push((p, data.y[i]));
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let ps: Vec<f64> = pts.iter().map(|q| q.0).collect();
        let h = bandwidth.unwrap_or_else(|| default_bandwidth(&ps));
        let mut cell = LivCell {
            x: x.clone(),
            bandwidth: h,
            u: u_grid.to_vec(),
            estimate: Vec::new(),
            std_error: Vec::new(),
            count: Vec::new(),
        };
        for &u in u_grid {
            let (c, fit) = local_slope(&pts, u, h);
            cell.count.push(c);
            cell.estimate.push(fit.map(|f| f.0));
            cell.std_error.push(fit.map(|f| f.1));
        }
        let masked = cell.estimate.iter().flatten().count();
        if masked * 4 < u_grid.len() {
            let msg = format!("LIV identifies only {masked} of {} grid points for x = {x:?}", u_grid.len());
            log::warn!("{msg}");
            warnings.push(msg);
        }
        if masked > 0 {
            curves.push(grid_cell(&cell)?);
        }
        cells.push(cell);
    }
    if curves.is_empty() {
        return Err(Error::EmptySet("LIV identified no grid point in any cell".into()));
    }
    let mte = MteCurve::new(MteForm::Grid { cells: curves }, Shape::None);
    Ok(LivFit { mte, cells, warnings })
}

/// Grid curve over the full u grid: masked values with nearest-neighbour
/// fill elsewhere, and identified intervals from runs of masked points.
fn grid_cell(cell: &LivCell) -> Result<GridCell> {
    let known: Vec<(f64, f64)> = cell.u.iter().zip(&cell.estimate).filter_map(|(&u, e)| e.map(|v| (u, v))).collect();
    let values = cell
        .u
        .iter()
        .zip(&cell.estimate)
        .map(|(&u, e)| {
            e.unwrap_or_else(|| {
                known.iter().min_by(|a, b| (a.0 - u).abs().total_cmp(&(b.0 - u).abs())).unwrap().1
            })
        })
        .collect();
    let mut identified = Vec::new();
    let mut start: Option<f64> = None;
    for (i, e) in cell.estimate.iter().enumerate() {
        match (e.is_some(), start) {
            (true, None) => start = Some(cell.u[i]),
            (false, Some(s)) => {
                identified.push([s, cell.u[i - 1]]);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        identified.push([s, *cell.u.last().unwrap()]);
    }
    Ok(GridCell { x: cell.x.clone(), curve: Grid::new(cell.u.clone(), values)?, identified })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{simulate_normal, true_mte, ScalarDist, SelectionParams, VectorDist};

    fn params(rho1: f64, rho0: f64) -> SelectionParams {
        SelectionParams {
            beta1: vec![1.0],
            beta0: vec![0.0],
            beta_d: vec![0.0],
            gamma: 0.8,
            sigma1: 1.0,
            sigma0: 1.0,
            rho1,
            rho0,
            rho01: 0.0,
        }
    }

    #[test]
    fn matches_truth_in_the_middle() {
        let p = params(0.6, -0.6);
        let z = ScalarDist::Uniform { lo: -2.5, hi: 2.5 };
        let data = simulate_normal(&p, 300_000, &VectorDist::empty(), &VectorDist::empty(), &z, 1).unwrap();
        let g = PropensityFn::probit(p.beta_d.clone(), p.gamma);
        let fit = liv_estimate(&data, &g, &[0.35, 0.5, 0.65], Some(0.2)).unwrap();
        let cell = &fit.cells[0];
        for (j, &u) in cell.u.iter().enumerate() {
            let est = cell.estimate[j].unwrap();
            let se = cell.std_error[j].unwrap();
            let truth = true_mte(&p, &[], u).unwrap();
            assert!((est - truth).abs() < 4.0 * se + 0.03, "u={u}: {est} vs {truth} (se {se})");
        }
    }

    #[test]
    fn constant_effect_is_flat() {
        let p = params(0.0, 0.0);
        let z = ScalarDist::Uniform { lo: -2.5, hi: 2.5 };
        let data = simulate_normal(&p, 200_000, &VectorDist::empty(), &VectorDist::empty(), &z, 2).unwrap();
        let g = PropensityFn::probit(p.beta_d.clone(), p.gamma);
        let fit = liv_estimate(&data, &g, &[0.3, 0.5, 0.7], Some(0.2)).unwrap();
        for e in fit.cells[0].estimate.iter().flatten() {
            assert!((e - 1.0).abs() < 0.15, "{e}");
        }
    }

    #[test]
    fn mask_follows_support() {
        let p = SelectionParams::benchmark();
        let x = VectorDist::Cells { points: vec![vec![1.0]], weights: vec![1.0] };
        let z = ScalarDist::Uniform { lo: 0.0, hi: 900.0 };
        let data = simulate_normal(&p, 20_000, &x, &VectorDist::empty(), &z, 3).unwrap();
        let g = PropensityFn::probit(p.beta_d.clone(), p.gamma);
        let grid = crate::numerics::linspace(0.0, 1.0, 101);
        let fit = liv_estimate(&data, &g, &grid, Some(0.01)).unwrap();
        let mask = fit.cells[0].mask();
        let on: Vec<f64> = grid.iter().zip(&mask).filter(|p| *p.1).map(|p| *p.0).collect();
        assert!((on[0] - 0.27).abs() < 0.015 && (on[on.len() - 1] - 0.81).abs() < 0.015, "{on:?}");
    }

    #[test]
    fn two_arm_design_warns() {
        let p = SelectionParams::benchmark();
        let x = VectorDist::Cells { points: vec![vec![1.0]], weights: vec![1.0] };
        let z = ScalarDist::Discrete { values: vec![0.0, 900.0], weights: vec![0.5, 0.5] };
        let data = simulate_normal(&p, 20_000, &x, &VectorDist::empty(), &z, 3).unwrap();
        let g = PropensityFn::probit(p.beta_d.clone(), p.gamma);
        let grid = crate::numerics::linspace(0.0, 1.0, 101);
        match liv_estimate(&data, &g, &grid, None) {
            Ok(fit) => assert!(!fit.warnings.is_empty()),
            Err(e) => assert!(matches!(e, Error::EmptySet(_))),
        }
    }
}
