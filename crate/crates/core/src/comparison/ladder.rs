use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::dataset::same_point;
use crate::model::{Cell, CellMte, MteCurve, PropensityFn};
use crate::numerics::{find_root_bracketed, linspace};
use crate::welfare::validate_weights;

const SCAN_POINTS: usize = 2049;

/// Treat iff `U_D ≤ u_star`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub u_star: f64,
}

/// Best achievable take-up limit for one instrument cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WCellOptimum {
    pub cell: String,
    pub weight: f64,
    pub achievable: [f64; 2],
    pub best_u: f64,
    pub value: f64,
}

/// Optimal identified welfare (cost omitted, `Y₀ = 0`) under subsidy
/// rules, direct policies, constant policies and the first best.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelfareLadder {
    pub s_sub: f64,
    pub s_dir: f64,
    pub s_con: f64,
    pub s_fb: f64,
    pub identified_support: Vec<[f64; 2]>,
    /// Every instrument cell can reach both ends of the support. Without
    /// this, a subsidy rule may be unable to replicate the best direct
    /// policy and `s_sub ≥ s_dir` can fail.
    pub every_cell_spans_support: bool,
    pub cells: Vec<WCellOptimum>,
    pub warnings: Vec<String>,
}

/// Sorts and merges overlapping or touching closed intervals.
pub fn merge_intervals(mut v: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    v.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let mut out: Vec<[f64; 2]> = Vec::with_capacity(v.len());
    for iv in v {
        match out.last_mut() {
            Some(last) if iv[0] <= last[1] => last[1] = last[1].max(iv[1]),
            _ => out.push(iv),
        }
    }
    out
}

/// `Supp(g(x, W, Z))` for one covariate cell: the union over instrument
/// cells of `[g(x, w, z_min), g(x, w, z_max)]`.
pub fn identified_support(g: &PropensityFn, cells: &[Cell], z_range: [f64; 2]) -> Result<Vec<[f64; 2]>> {
    Ok(merge_intervals(achievable(g, cells, z_range)?))
}

fn achievable(g: &PropensityFn, cells: &[Cell], [zl, zu]: [f64; 2]) -> Result<Vec<[f64; 2]>> {
    if !(zl <= zu) {
        return Err(Error::InvalidParams(format!("z range [{zl}, {zu}] is empty")));
    }
    cells
        .iter()
        .map(|c| {
            let p = g.at_cell(c)?;
            p.check_in_domain(zl)?;
            p.check_in_domain(zu)?;
            let (a, b) = (p.value(zl).clamp(0.0, 1.0), p.value(zu).clamp(0.0, 1.0));
            Ok([a.min(b), a.max(b)])
        })
        .collect()
}

/// Zeros of the MTE inside `(a, b)`, located on a fixed scan and polished.
fn zero_crossings(m: &CellMte, a: f64, b: f64) -> Result<Vec<f64>> {
    if b <= a {
        return Ok(Vec::new());
    }
    let pts = linspace(a, b, SCAN_POINTS);
    let vals: Vec<f64> = pts.iter().map(|&u| m.value(u)).collect();
    let mut out = Vec::new();
    for i in 0..pts.len() - 1 {
        let (fa, fb) = (vals[i], vals[i + 1]);
        if fa == 0.0 && i > 0 {
            out.push(pts[i]);
        } else if fa.is_finite() && fb.is_finite() && fa * fb < 0.0 {
            out.push(find_root_bracketed(|u| m.value(u), pts[i], pts[i + 1], 1e-14)?);
        }
    }
    Ok(out)
}

/// `∫_{[0,u] ∩ S} MTE`.
fn running_integral(m: &CellMte, support: &[[f64; 2]], u: f64) -> Result<f64> {
    let mut total = 0.0;
    for &[a, b] in support {
        let hi = b.min(u);
        if hi > a {
            total += m.integral(a, hi)?;
        }
    }
    Ok(total)
}

/// `∫_{S ∩ {MTE ≥ 0}} MTE`.
fn positive_part(m: &CellMte, support: &[[f64; 2]]) -> Result<f64> {
    let mut total = 0.0;
    for &[a, b] in support {
        let mut knots = vec![a];
        knots.extend(zero_crossings(m, a, b)?);
        knots.push(b);
        for w in knots.windows(2) {
            if w[1] > w[0] {
                let piece = m.integral(w[0], w[1])?;
                total += piece.max(0.0);
            }
        }
    }
    Ok(total)
}

pub fn welfare_ladder(mte: &MteCurve, g: &PropensityFn, cells: &[Cell], z_range: [f64; 2]) -> Result<WelfareLadder> {
    let first = cells.first().ok_or_else(|| Error::InvalidParams("ladder needs at least one cell".into()))?;
    if cells.iter().any(|c| !same_point(&c.x, &first.x)) {
        return Err(Error::InvalidParams("ladder cells must share the covariate value".into()));
    }
    validate_weights(cells)?;
    let m = mte.at(&first.x)?;
    let ranges = achievable(g, cells, z_range)?;
    let support = merge_intervals(ranges.clone());
    let (s_lo, s_hi) = (support[0][0], support[support.len() - 1][1]);

    let mut warnings = Vec::new();
    for &[a, b] in &support {
        if !m.interval_identified(a, b) {
            warnings.push(format!("MTE is extrapolated on part of the support [{a}, {b}]"));
        }
    }

    let total = running_integral(&m, &support, s_hi)?;
    let s_dir = total.max(0.0);
    let s_fb = positive_part(&m, &support)?;

    let mut opt = Vec::with_capacity(cells.len());
    for (c, &[a, b]) in cells.iter().zip(&ranges) {
        let mut cand = vec![a, b];
        cand.extend(zero_crossings(&m, a, b)?);
        let mut best = (a, f64::NEG_INFINITY);
        for u in cand {
            let v = running_integral(&m, &support, u)?;
            if v > best.1 {
                best = (u, v);
            }
        }
        opt.push(WCellOptimum { cell: c.name(), weight: c.weight, achievable: [a, b], best_u: best.0, value: best.1 });
    }
    let s_sub = opt.iter().map(|o| o.weight * o.value).sum();
    let span_tol = 1e-12;
    let every = ranges.iter().all(|r| r[0] <= s_lo + span_tol && r[1] >= s_hi - span_tol);
    Ok(WelfareLadder {
        s_sub,
        s_dir,
        s_con: s_dir,
        s_fb,
        identified_support: support,
        every_cell_spans_support: every,
        cells: opt,
        warnings,
    })
}

/// Threshold at the zero of a decreasing MTE, clipped to `[0, 1]`.
pub fn first_best_policy(mte: &MteCurve, x: &[f64]) -> Result<ThresholdPolicy> {
    let m = mte.at(x)?;
    let eps = 1e-12;
    let (lo, hi) = (m.value(eps), m.value(1.0 - eps));
    let u_star = if lo < 0.0 {
        0.0
    } else if hi >= 0.0 {
        1.0
    } else {
        find_root_bracketed(|u| m.value(u), eps, 1.0 - eps, 1e-14)?
    };
    Ok(ThresholdPolicy { u_star })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Shape;
    use std::f64::consts::PI;

    fn lin(intercept: f64, bw: f64, gamma: f64) -> PropensityFn {
        PropensityFn::Linear { intercept, beta_x: vec![], beta_w: vec![bw], gamma }
    }

    fn wcells(ws: &[f64]) -> Vec<Cell> {
        let k = ws.len() as f64;
        ws.iter().map(|&w| Cell::new(vec![], vec![w], 1.0 / k)).collect()
    }

    #[test]
    fn toy_support() {
        let ws: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let cells: Vec<Cell> = ws.iter().map(|&w| Cell::new(vec![], vec![w], 0.0)).collect();
        let s = identified_support(&lin(0.25, 0.25, 0.25), &cells, [0.0, 1.0]).unwrap();
        assert_eq!(s, vec![[0.25, 0.75]]);
        let one = identified_support(&lin(0.25, 0.25, 0.25), &cells[..1], [0.5, 0.5]).unwrap();
        assert_eq!(one, vec![[0.375, 0.375]]);
    }

    #[test]
    fn probit_support() {
        let g = PropensityFn::probit(vec![-0.9359, 0.2965], 0.0017);
        let s = identified_support(&g, &[Cell::new(vec![1.0], vec![], 1.0)], [0.0, 900.0]).unwrap();
        assert!((s[0][0] - 0.2613).abs() < 1e-4 && (s[0][1] - 0.8134).abs() < 1e-4);
    }

    #[test]
    fn linear_mte_full_support() {
        let mte = MteCurve::custom(|u| 4.0 - 2.0 * u, Shape::Decreasing);
        let g = lin(0.0, 0.0, 1.0);
        let l = welfare_ladder(&mte, &g, &wcells(&[0.0]), [0.0, 1.0]).unwrap();
        assert!((l.s_dir - 3.0).abs() < 1e-12);
        assert!((l.s_fb - 3.0).abs() < 1e-12);
        assert!((l.s_sub - 3.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_curve() {
        let mte = MteCurve::custom(|u| (PI * u).cos() + 0.25, Shape::Decreasing);
        let g = lin(0.0, 0.0, 1.0);
        let l = welfare_ladder(&mte, &g, &wcells(&[0.0]), [0.0, 1.0]).unwrap();
        let us = (-0.25f64).acos() / PI;
        let fb = (PI * us).sin() / PI + 0.25 * us;
        assert!((us - 0.5804).abs() < 1e-4);
        assert!((l.s_fb - fb).abs() < 1e-9 && (fb - 0.4533).abs() < 1e-4);
        assert!((l.s_sub - fb).abs() < 1e-9);
        assert!((l.s_dir - 0.25).abs() < 1e-9);
        assert_eq!(l.s_con, l.s_dir);
        assert!((first_best_policy(&mte, &[]).unwrap().u_star - us).abs() < 1e-12);
    }

    #[test]
    fn negative_mte() {
        let mte = MteCurve::custom(|_| -1.0, Shape::Decreasing);
        let l = welfare_ladder(&mte, &lin(0.0, 0.0, 1.0), &wcells(&[0.0]), [0.0, 1.0]).unwrap();
        assert_eq!(l.s_dir, 0.0);
        assert_eq!(l.s_sub, 0.0);
        assert_eq!(l.s_fb, 0.0);
        assert_eq!(first_best_policy(&mte, &[]).unwrap().u_star, 0.0);
        let up = MteCurve::custom(|u| 4.0 - 2.0 * u, Shape::Decreasing);
        assert_eq!(first_best_policy(&up, &[]).unwrap().u_star, 1.0);
    }

    #[test]
    fn narrow_cells_can_undercut_direct() {
        // two cells with disjoint ranges; the high cell is forced to include
        // the negative stretch [0.25, 0.5] and cannot reach the positive top
        let curve = crate::numerics::Grid::new(vec![0.0, 0.45, 0.55, 1.0], vec![-1.0, -1.0, 3.0, 3.0]).unwrap();
        let mte = MteCurve::single_grid(vec![], curve, Shape::None);
        let g = PropensityFn::Linear { intercept: 0.0, beta_x: vec![], beta_w: vec![0.5], gamma: 0.25 };
        let l = welfare_ladder(&mte, &g, &wcells(&[0.5, 1.0]), [0.0, 1.0]).unwrap();
        assert_eq!(l.identified_support, vec![[0.25, 0.75]]);
        assert!(!l.every_cell_spans_support);
        assert!((l.s_dir - 0.5).abs() < 1e-12);
        assert!((l.s_sub - 0.25).abs() < 1e-12);
    }
}
