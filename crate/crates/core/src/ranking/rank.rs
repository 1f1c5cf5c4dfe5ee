use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::set::{IdentifiedMteSet, SetCell};
use crate::error::{Error, Result};
use crate::model::dataset::same_point;
use crate::model::{PropensityFn, Shape};
use crate::numerics::lp::{lp_min_linear, Constraint};
use crate::welfare::SubsidyRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    LeftWeaklyBetter,
    RightWeaklyBetter,
    Equivalent,
    Incomparable,
}

/// Member curves of the set (knot values per cell, in set-cell order) under
/// which each rule is strictly better.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificates {
    pub left_better: Vec<Vec<f64>>,
    pub left_margin: f64,
    pub right_better: Vec<Vec<f64>>,
    pub right_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankVerdict {
    pub pair: [String; 2],
    pub verdict: Verdict,
    /// Extremes of `S(left) − S(right)` over the identified set.
    pub v_min: f64,
    pub v_max: f64,
    pub tol: f64,
    pub bounds: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificates: Option<Certificates>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedRule {
    pub name: String,
    pub rule: SubsidyRule,
}

/// `∫₀ᵗ Hₖ(u) du` for the hat function of knot `k`.
fn hat_cumulative(u: &[f64], k: usize, t: f64) -> f64 {
    let mut total = 0.0;
    if k > 0 {
        let (a, b) = (u[k - 1], u[k]);
        let h = b - a;
        if t >= b {
            total += 0.5 * h;
        } else if t > a {
            total += 0.5 * (t - a) * (t - a) / h;
        }
    }
    if k + 1 < u.len() {
        let (a, b) = (u[k], u[k + 1]);
        let h = b - a;
        if t >= b {
            total += 0.5 * h;
        } else if t > a {
            total += 0.5 * h - 0.5 * (b - t) * (b - t) / h;
        }
    }
    total
}

/// `F_{g,π}(x, u)` on the grid: weighted share of the cell's instrument
/// groups whose induced take-up is at most `u`.
pub fn induced_cdf(g: &PropensityFn, rule: &SubsidyRule, x: &[f64], u_grid: &[f64]) -> Result<Vec<f64>> {
    let mut pts = Vec::new();
    for (c, &z) in rule.cells.iter().zip(&rule.assignment) {
        if same_point(&c.x, x) {
            let p = g.at_cell(c)?;
            p.check_in_domain(z)?;
            pts.push((p.value(z), c.weight));
        }
    }
    let total: f64 = pts.iter().map(|p| p.1).sum();
    if pts.is_empty() || !(total > 0.0) {
        return Err(Error::MissingCell(format!("rule has no weighted cell with x = {x:?}")));
    }
    Ok(u_grid.iter().map(|&u| pts.iter().filter(|p| p.0 <= u).map(|p| p.1).sum::<f64>() / total).collect())
}

/// Coefficients `cₖ` per set cell with `S(A) − S(B) = Σ cₖ mₖ` for the
/// piecewise-linear curve with knot values `mₖ`.
pub fn pair_functional(
    set: &IdentifiedMteSet,
    g: &PropensityFn,
    a: &SubsidyRule,
    b: &SubsidyRule,
) -> Result<Vec<Vec<f64>>> {
    check_same_cells(a, b)?;
    let u = &set.u_grid;
    let mut coef = vec![vec![0.0; u.len()]; set.cells.len()];
    for i in 0..a.len() {
        let cell = &a.cells[i];
        let ci = set
            .cells
            .iter()
            .position(|s| same_point(&s.x, &cell.x))
            .ok_or_else(|| Error::MissingCell(format!("identified set has no cell for {}", cell.name())))?;
        let p = g.at_cell(cell)?;
        p.check_in_domain(a.z(i))?;
        p.check_in_domain(b.z(i))?;
        let ta = p.value(a.z(i)).clamp(0.0, 1.0);
        let tb = p.value(b.z(i)).clamp(0.0, 1.0);
        for (k, c) in coef[ci].iter_mut().enumerate() {
            *c += cell.weight * (hat_cumulative(u, k, ta) - hat_cumulative(u, k, tb));
        }
    }
    Ok(coef)
}

fn check_same_cells(a: &SubsidyRule, b: &SubsidyRule) -> Result<()> {
    a.validate()?;
    b.validate()?;
    let same = a.len() == b.len()
        && a.cells.iter().zip(&b.cells).all(|(p, q)| {
            same_point(&p.x, &q.x) && same_point(&p.w, &q.w) && (p.weight - q.weight).abs() <= 1e-12
        });
    if !same {
        return Err(Error::InvalidParams("rules must be defined on the same weighted cells".into()));
    }
    Ok(())
}

/// `min Σ cₖ mₖ` over one cell's slice of the set; returns the value and
/// the full knot vector attaining it.
fn cell_min(cell: &SetCell, shape: Shape, bounds: [f64; 2], coef: &[f64]) -> Result<(f64, Vec<f64>)> {
    let free: Vec<usize> = (0..cell.pinned.len()).filter(|&k| cell.pinned[k].is_none()).collect();
    let pos = |k: usize| free.iter().position(|&f| f == k);
    let constant: f64 = cell.pinned.iter().zip(coef).filter_map(|(p, c)| p.map(|v| v * c)).sum();
    let nf = free.len();
    let mut ineq: Vec<Constraint> = Vec::new();
    for j in 0..nf {
        let mut up = vec![0.0; nf];
        up[j] = 1.0;
        ineq.push((up.clone(), bounds[1]));
        up[j] = -1.0;
        ineq.push((up, -bounds[0]));
    }
    let scale = bounds[0].abs().max(bounds[1].abs()).max(1.0);
    if shape != Shape::None {
        // decreasing: m_{k+1} − m_k ≤ 0; increasing: m_k − m_{k+1} ≤ 0
        let sgn = if shape == Shape::Decreasing { 1.0 } else { -1.0 };
        for k in 0..cell.pinned.len() - 1 {
            let mut row = vec![0.0; nf];
            let mut rhs = 0.0;
            for (idx, s) in [(k + 1, sgn), (k, -sgn)] {
                match (cell.pinned[idx], pos(idx)) {
                    (Some(v), _) => rhs -= s * v,
                    (None, Some(j)) => row[j] += s,
                    (None, None) => unreachable!(),
                }
            }
            if row.iter().all(|&v| v == 0.0) {
                if rhs < -1e-12 * scale {
                    return Err(Error::EmptySet(format!(
                        "pinned knots {k} and {} violate the {shape:?} restriction",
                        k + 1
                    )));
                }
            } else {
                ineq.push((row, rhs));
            }
        }
    }
    let obj: Vec<f64> = free.iter().map(|&k| coef[k]).collect();
    let curve_from = |vals: &[f64]| -> Vec<f64> {
        cell.pinned
            .iter()
            .enumerate()
            .map(|(k, p)| p.unwrap_or_else(|| vals[pos(k).unwrap()]))
            .collect()
    };
    if nf == 0 {
        return Ok((constant, curve_from(&[])));
    }
    let sol = lp_min_linear(&obj, &[], &ineq).map_err(|e| match e {
        Error::Infeasible => Error::EmptySet("pinned values, shape and bounds admit no curve".into()),
        e => e,
    })?;
    Ok((constant + sol.value, curve_from(&sol.argmin)))
}

/// Extremes of a linear functional over the whole set.
fn extremes(set: &IdentifiedMteSet, coef: &[Vec<f64>]) -> Result<((f64, Vec<Vec<f64>>), (f64, Vec<Vec<f64>>))> {
    let bounds = set.effective_bounds();
    let (mut vmin, mut vmax) = (0.0, 0.0);
    let (mut cmin, mut cmax) = (Vec::new(), Vec::new());
    for (cell, c) in set.cells.iter().zip(coef) {
        let (lo, lo_curve) = cell_min(cell, set.shape, bounds, c)?;
        let neg: Vec<f64> = c.iter().map(|v| -v).collect();
        let (hi, hi_curve) = cell_min(cell, set.shape, bounds, &neg)?;
        vmin += lo;
        vmax -= hi;
        cmin.push(lo_curve);
        cmax.push(hi_curve);
    }
    Ok(((vmin, cmin), (vmax, cmax)))
}

/// Fails with an empty-set error when no curve satisfies the restrictions.
pub fn check_nonempty(set: &IdentifiedMteSet) -> Result<()> {
    set.validate()?;
    let zero: Vec<Vec<f64>> = set.cells.iter().map(|c| vec![0.0; c.pinned.len()]).collect();
    extremes(set, &zero).map(|_| ())
}

/// `Σ cₖ mₖ` for knot vectors in set-cell order.
pub fn eval_functional(coef: &[Vec<f64>], curves: &[Vec<f64>]) -> f64 {
    coef.iter().zip(curves).map(|(c, m)| c.iter().zip(m).map(|(a, b)| a * b).sum::<f64>()).sum()
}

/// Partial welfare ranking of two rules over every MTE in the set.
pub fn rank_pair(set: &IdentifiedMteSet, g: &PropensityFn, a: &NamedRule, b: &NamedRule) -> Result<RankVerdict> {
    set.validate()?;
    let coef = pair_functional(set, g, &a.rule, &b.rule)?;
    let bounds = set.effective_bounds();
    let big = bounds[0].abs().max(bounds[1].abs());
    let mass: f64 = coef.iter().flatten().map(|c| c.abs()).sum();
    let tol = 1e-9 * (big * mass).max(1.0);
    let ((vmin, cmin), (vmax, cmax)) = extremes(set, &coef)?;
    let verdict = match (vmin >= -tol, vmax <= tol) {
        (true, true) => Verdict::Equivalent,
        (true, false) => Verdict::LeftWeaklyBetter,
        (false, true) => Verdict::RightWeaklyBetter,
        (false, false) => Verdict::Incomparable,
    };
    let certificates = (verdict == Verdict::Incomparable).then(|| Certificates {
        left_margin: eval_functional(&coef, &cmax),
        left_better: cmax,
        right_margin: eval_functional(&coef, &cmin),
        right_better: cmin,
    });
    Ok(RankVerdict {
        pair: [a.name.clone(), b.name.clone()],
        verdict,
        v_min: vmin,
        v_max: vmax,
        tol,
        bounds,
        certificates,
    })
}

/// Pairwise verdicts and the Hasse diagram of the weak order they induce.
#[derive(Debug, Clone, Serialize)]
pub struct PartialOrder {
    pub names: Vec<String>,
    pub verdicts: Vec<RankVerdict>,
    /// `[better, worse]` index pairs after transitive reduction; equivalent
    /// rules are represented by their first member.
    pub edges: Vec<[usize; 2]>,
    pub equivalent: Vec<[usize; 2]>,
    pub incomparable: Vec<[usize; 2]>,
}

impl PartialOrder {
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph ranking {\n  rankdir=TB;\n");
        for n in &self.names {
            let _ = writeln!(s, "  \"{}\";", escape(n));
        }
        for [a, b] in &self.edges {
            let _ = writeln!(s, "  \"{}\" -> \"{}\";", escape(&self.names[*a]), escape(&self.names[*b]));
        }
        for [a, b] in &self.equivalent {
            let _ = writeln!(
                s,
                "  \"{}\" -> \"{}\" [dir=none, style=bold, label=\"equivalent\"];",
                escape(&self.names[*a]),
                escape(&self.names[*b])
            );
        }
        for [a, b] in &self.incomparable {
            let _ = writeln!(
                s,
                "  \"{}\" -> \"{}\" [dir=none, style=dashed, label=\"incomparable\"];",
                escape(&self.names[*a]),
                escape(&self.names[*b])
            );
        }
        s.push_str("}\n");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

pub fn rank_list(set: &IdentifiedMteSet, g: &PropensityFn, rules: &[NamedRule]) -> Result<PartialOrder> {
    check_nonempty(set)?;
    let n = rules.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let verdicts: Vec<RankVerdict> =
        pairs.par_iter().map(|&(i, j)| rank_pair(set, g, &rules[i], &rules[j])).collect::<Result<_>>()?;

    let mut class: Vec<usize> = (0..n).collect();
    fn root(c: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while c[r] != r {
            r = c[r];
        }
        c[i] = r;
        r
    }
    let mut equivalent = Vec::new();
    let mut incomparable = Vec::new();
    for (&(i, j), v) in pairs.iter().zip(&verdicts) {
        match v.verdict {
            Verdict::Equivalent => {
                equivalent.push([i, j]);
                let (ri, rj) = (root(&mut class, i), root(&mut class, j));
                if ri != rj {
                    class[ri.max(rj)] = ri.min(rj);
                }
            }
            Verdict::Incomparable => incomparable.push([i, j]),
            _ => {}
        }
    }
    let reps: Vec<usize> = (0..n).map(|i| root(&mut class, i)).collect();
    let mut better: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (&(i, j), v) in pairs.iter().zip(&verdicts) {
        let (ri, rj) = (reps[i], reps[j]);
        if ri == rj {
            continue;
        }
        match v.verdict {
            Verdict::LeftWeaklyBetter => {
                better.insert((ri, rj));
            }
            Verdict::RightWeaklyBetter => {
                better.insert((rj, ri));
            }
            _ => {}
        }
    }
    let edges = better
        .iter()
        .filter(|&&(a, b)| !better.iter().any(|&(p, k)| p == a && k != b && better.contains(&(k, b))))
        .map(|&(a, b)| [a, b])
        .collect();
    Ok(PartialOrder { names: rules.iter().map(|r| r.name.clone()).collect(), verdicts, edges, equivalent, incomparable })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Cell, GridCell, MteCurve, MteForm};
    use crate::numerics::{linspace, Grid};
    use crate::welfare::{welfare_of_rule, CostSpec};

    fn g() -> PropensityFn {
        PropensityFn::Linear { intercept: 0.25, beta_x: vec![], beta_w: vec![0.25], gamma: 0.25 }
    }

    fn wcells() -> Vec<Cell> {
        vec![Cell::new(vec![], vec![0.0], 0.5), Cell::new(vec![], vec![1.0], 0.5)]
    }

    fn rule(name: &str, z: [f64; 2]) -> NamedRule {
        NamedRule { name: name.into(), rule: SubsidyRule::new(wcells(), z.to_vec(), [0.0, 1.0]).unwrap() }
    }

    #[test]
    fn toy_induced_cdf() {
        let r = rule("opt", [1.0, 0.4]);
        let u = [0.0, 0.49, 0.5, 0.55, 0.6, 1.0];
        let f = induced_cdf(&g(), &r.rule, &[], &u).unwrap();
        assert_eq!(f, vec![0.0, 0.0, 0.5, 0.5, 1.0, 1.0]);
    }

    #[test]
    fn hat_weights_integrate_grid_curves() {
        let u = linspace(0.0, 1.0, 9);
        let vals: Vec<f64> = u.iter().map(|v| (3.0 * v).sin()).collect();
        let curve = Grid::new(u.clone(), vals.clone()).unwrap();
        for t in [0.0, 0.13, 0.5, 0.77, 1.0] {
            let s: f64 = (0..u.len()).map(|k| vals[k] * hat_cumulative(&u, k, t)).sum();
            assert!((s - curve.integrate(0.0, t)).abs() < 1e-14);
        }
    }

    #[test]
    fn identical_rules_are_equivalent() {
        let set = IdentifiedMteSet {
            u_grid: linspace(0.0, 1.0, 8),
            cells: vec![SetCell { x: vec![], pinned: vec![None; 8] }],
            shape: Shape::Decreasing,
            bounds: Some([-5.0, 5.0]),
        };
        let v = rank_pair(&set, &g(), &rule("a", [0.3, 0.3]), &rule("b", [0.3, 0.3])).unwrap();
        assert_eq!(v.verdict, Verdict::Equivalent);
    }

    #[test]
    fn full_identification_matches_welfare() {
        let u = linspace(0.0, 1.0, 8);
        let mte = MteCurve::custom(|u| 4.0 - 6.0 * u, Shape::Decreasing);
        let set = IdentifiedMteSet::from_curve(&mte, &[vec![]], u.clone()).unwrap();
        let grid_mte = MteCurve::new(
            MteForm::Grid {
                cells: vec![GridCell {
                    x: vec![],
                    curve: Grid::new(u.clone(), set.cells[0].pinned.iter().map(|v| v.unwrap()).collect()).unwrap(),
                    identified: vec![[0.0, 1.0]],
                }],
            },
            Shape::Decreasing,
        );
        let (a, b) = (rule("a", [1.0, 0.4]), rule("b", [0.0, 0.0]));
        let v = rank_pair(&set, &g(), &a, &b).unwrap();
        let sa = welfare_of_rule(&grid_mte, &g(), &CostSpec::Zero, &a.rule, None).unwrap().net;
        let sb = welfare_of_rule(&grid_mte, &g(), &CostSpec::Zero, &b.rule, None).unwrap().net;
        assert!((v.v_min - (sa - sb)).abs() < 1e-12 && (v.v_max - v.v_min).abs() < 1e-12);
        assert_eq!(v.verdict, if sa > sb { Verdict::LeftWeaklyBetter } else { Verdict::RightWeaklyBetter });
    }

    #[test]
    fn free_tail_gives_incomparable_with_certificates() {
        let u = linspace(0.0, 1.0, 8);
        let mut pinned = vec![None; 8];
        for k in 1..4 {
            pinned[k] = Some(1.0 - u[k]);
        }
        let set = IdentifiedMteSet {
            u_grid: u,
            cells: vec![SetCell { x: vec![], pinned }],
            shape: Shape::None,
            bounds: Some([-3.0, 3.0]),
        };
        // take-ups 0.9 vs 0.5: the difference involves the free upper tail
        let v = rank_pair(&set, &g(), &rule("hi", [1.0, 0.6]), &rule("lo", [1.0, 0.0])).unwrap();
        assert_eq!(v.verdict, Verdict::Incomparable);
        let c = v.certificates.unwrap();
        assert!(c.left_margin > v.tol && c.right_margin < -v.tol);
    }

    #[test]
    fn inconsistent_pins_are_empty() {
        let set = IdentifiedMteSet {
            u_grid: vec![0.0, 0.5, 1.0],
            cells: vec![SetCell { x: vec![], pinned: vec![Some(0.0), Some(1.0), None] }],
            shape: Shape::Decreasing,
            bounds: None,
        };
        assert!(matches!(check_nonempty(&set), Err(Error::EmptySet(_))));
    }

    #[test]
    fn list_builds_hasse_edges() {
        let u = linspace(0.0, 1.0, 8);
        let mte = MteCurve::custom(|u| 4.0 - 6.0 * u, Shape::Decreasing);
        let set = IdentifiedMteSet::from_curve(&mte, &[vec![]], u).unwrap();
        let rules = vec![rule("a", [0.0, 0.0]), rule("b", [0.5, 0.2]), rule("c", [1.0, 1.0])];
        let po = rank_list(&set, &g(), &rules).unwrap();
        assert_eq!(po.edges.len(), 2);
        assert!(po.incomparable.is_empty());
        assert!(po.to_dot().contains("->"));
        let single = rank_list(&set, &g(), &rules[..1]).unwrap();
        assert!(single.edges.is_empty());
    }
}
