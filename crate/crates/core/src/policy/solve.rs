use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lambda::{lambda_cell, lambda_tol};
use crate::error::{Error, Result};
use crate::model::{Cell, CellMte, CellPropensity, MteCurve, PropensityFn, Shape};
use crate::numerics::{find_root_bracketed, linspace};
use crate::welfare::{cell_welfare, CostSpec, SubsidyRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionKind {
    Interior,
    CornerLow,
    CornerHigh,
}

impl SolutionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Interior => "interior",
            Self::CornerLow => "corner_low",
            Self::CornerHigh => "corner_high",
        }
    }
}

/// Optimal subsidy for one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub cell: String,
    pub z_star: f64,
    pub u_star: f64,
    pub kind: SolutionKind,
    pub lambda: f64,
    /// `∫₀^{u*} MTE − E[c]`, per member of the cell.
    pub welfare: f64,
}

/// Which solver `solve_cells` uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Shape-specific solver when its assumptions verify, grid search otherwise.
    #[default]
    Auto,
    Positive,
    Negative,
    General,
}

pub const DEFAULT_GRID_N: usize = 2001;

struct Ctx<'a> {
    m: CellMte<'a>,
    p: CellPropensity<'a>,
    cost: &'a CostSpec,
    cell: &'a Cell,
    lo: f64,
    hi: f64,
}

impl<'a> Ctx<'a> {
    fn new(mte: &'a MteCurve, g: &'a PropensityFn, cost: &'a CostSpec, cell: &'a Cell, space: [f64; 2]) -> Result<Self> {
        let [lo, hi] = space;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidParams(format!("action space [{lo}, {hi}] is not a closed interval")));
        }
        let p = g.at_cell(cell)?;
        p.check_in_domain(lo)?;
        p.check_in_domain(hi)?;
        Ok(Self { m: mte.at(&cell.x)?, p, cost, cell, lo, hi })
    }

    fn lambda(&self, z: f64) -> Result<f64> {
        lambda_cell(&self.m, &self.p, self.cost, self.cell, z)
    }

    fn welfare(&self, z: f64) -> Result<f64> {
        Ok(cell_welfare(&self.m, &self.p, self.cost, self.cell, z)?.net())
    }

    fn result(&self, z: f64, kind: SolutionKind, lambda: f64) -> Result<SolveResult> {
        let z = match kind {
            SolutionKind::CornerLow => self.lo,
            SolutionKind::CornerHigh => self.hi,
            SolutionKind::Interior => z,
        };
        Ok(SolveResult {
            cell: self.cell.name(),
            z_star: z,
            u_star: self.p.value(z),
            kind,
            lambda,
            welfare: self.welfare(z)?,
        })
    }

    fn tol(&self) -> f64 {
        lambda_tol(&self.m, &self.p, self.lo, self.hi)
    }
}

/// Three-case rule under positive selection with voucher cost: corner low
/// if `Λ(z_l) < 0`, corner high if `Λ(z_u) > 0`, otherwise the root of `Λ`.
/// Refuses (with an assumption error) unless the MTE is declared and
/// verified decreasing and `g` is verified increasing and concave.
pub fn solve_positive_selection(mte: &MteCurve, g: &PropensityFn, cell: &Cell, space: [f64; 2]) -> Result<SolveResult> {
    let ctx = Ctx::new(mte, g, &CostSpec::Voucher, cell, space)?;
    if mte.shape != Shape::Decreasing {
        return Err(Error::Assumption("positive selection needs an MTE declared decreasing".into()));
    }
    mte.check_shape(&cell.x)?;
    if ctx.hi > ctx.lo {
        ctx.p.check_increasing(ctx.lo, ctx.hi, 1001)?;
        ctx.p.check_concave(ctx.lo, ctx.hi)?;
    }
    let tol = ctx.tol();
    let l_lo = ctx.lambda(ctx.lo)?;
    if ctx.hi == ctx.lo || l_lo < -tol {
        return ctx.result(ctx.lo, SolutionKind::CornerLow, l_lo);
    }
    let l_hi = ctx.lambda(ctx.hi)?;
    if l_hi >= -tol {
        return ctx.result(ctx.hi, SolutionKind::CornerHigh, l_hi);
    }
    if l_lo <= tol {
        return ctx.result(ctx.lo, SolutionKind::CornerLow, l_lo);
    }
    let z = polish(&ctx, ctx.lo, ctx.hi, tol)?;
    ctx.result(z, SolutionKind::Interior, ctx.lambda(z)?)
}

/// Zero-cost rule under negative selection: `z_l` when
/// `∫_{g(z_l)}^{g(z_u)} MTE ≤ 0` (ties included), `z_u` otherwise.
pub fn solve_negative_selection(
    mte: &MteCurve,
    g: &PropensityFn,
    cost: &CostSpec,
    cell: &Cell,
    space: [f64; 2],
) -> Result<SolveResult> {
    if *cost != CostSpec::Zero {
        return Err(Error::InvalidParams("the negative-selection rule requires zero cost".into()));
    }
    let ctx = Ctx::new(mte, g, cost, cell, space)?;
    if mte.shape != Shape::Increasing {
        return Err(Error::Assumption("negative selection needs an MTE declared increasing".into()));
    }
    mte.check_shape(&cell.x)?;
    let (ulo, uhi) = (ctx.p.value(ctx.lo), ctx.p.value(ctx.hi));
    let area = ctx.m.integral(ulo.clamp(0.0, 1.0), uhi.clamp(0.0, 1.0))?;
    let tol = ctx.tol();
    let lam = |z| ctx.lambda(z).unwrap_or(f64::NAN);
    if area <= tol {
        ctx.result(ctx.lo, SolutionKind::CornerLow, lam(ctx.lo))
    } else {
        ctx.result(ctx.hi, SolutionKind::CornerHigh, lam(ctx.hi))
    }
}

/// Grid search over `[z_l, z_u]`: every sign change of `Λ` is polished by
/// the root finder, and the stationary points, the grid maximiser and both
/// end points are compared by welfare.
pub fn solve_general(
    mte: &MteCurve,
    g: &PropensityFn,
    cost: &CostSpec,
    cell: &Cell,
    space: [f64; 2],
    grid_n: usize,
) -> Result<SolveResult> {
    if grid_n < 64 {
        return Err(Error::InvalidParams(format!("grid_n = {grid_n} is below the minimum of 64")));
    }
    cost.validate()?;
    let ctx = Ctx::new(mte, g, cost, cell, space)?;
    let lam = |z| ctx.lambda(z).unwrap_or(f64::NAN);
    if ctx.hi == ctx.lo {
        return ctx.result(ctx.lo, SolutionKind::CornerLow, lam(ctx.lo));
    }
    let tol = ctx.tol();
    let zs = linspace(ctx.lo, ctx.hi, grid_n);
    let ws: Vec<f64> = zs.iter().map(|&z| ctx.welfare(z)).collect::<Result<_>>()?;
    let ls: Vec<f64> = zs.iter().map(|&z| lam(z)).collect();

    let mut candidates = vec![ctx.lo];
    for i in 0..zs.len() - 1 {
        let (a, b) = (ls[i], ls[i + 1]);
        if a.is_finite() && b.is_finite() && a > 0.0 && b < 0.0 {
            candidates.push(polish(&ctx, zs[i], zs[i + 1], tol)?);
        }
    }
    let best = (0..ws.len()).fold(0, |b, i| if ws[i] > ws[b] { i } else { b });
    if best > 0 && best < zs.len() - 1 {
        candidates.push(golden_max(|z| ctx.welfare(z).unwrap_or(f64::NEG_INFINITY), zs[best - 1], zs[best + 1]));
    }
    candidates.push(ctx.hi);

    let mut top = (ctx.lo, f64::NEG_INFINITY);
    for &z in &candidates {
        let w = ctx.welfare(z)?;
        if w > top.1 + 1e-13 * w.abs().max(1.0) {
            top = (z, w);
        }
    }
    let snap = 1e-9 * (ctx.hi - ctx.lo);
    let z = top.0;
    let kind = if z - ctx.lo <= snap {
        SolutionKind::CornerLow
    } else if ctx.hi - z <= snap {
        SolutionKind::CornerHigh
    } else {
        SolutionKind::Interior
    };
    ctx.result(z, kind, lam(z))
}

/// Solves one cell with the requested method. `Auto` tries the
/// positive-selection rule for decreasing MTEs with voucher cost and the
/// negative-selection rule for increasing MTEs with zero cost, and falls
/// back to the grid search when their assumptions do not verify.
pub fn solve_cell(
    mte: &MteCurve,
    g: &PropensityFn,
    cost: &CostSpec,
    cell: &Cell,
    space: [f64; 2],
    method: Method,
    grid_n: usize,
) -> Result<SolveResult> {
    match method {
        Method::Positive => {
            if *cost != CostSpec::Voucher {
                return Err(Error::InvalidParams("the positive-selection rule requires voucher cost".into()));
            }
            solve_positive_selection(mte, g, cell, space)
        }
        Method::Negative => solve_negative_selection(mte, g, cost, cell, space),
        Method::General => solve_general(mte, g, cost, cell, space, grid_n),
        Method::Auto => {
            let fast = match (mte.shape, cost) {
                (Shape::Decreasing, CostSpec::Voucher) => Some(solve_positive_selection(mte, g, cell, space)),
                (Shape::Increasing, CostSpec::Zero) => Some(solve_negative_selection(mte, g, cost, cell, space)),
                _ => None,
            };
            match fast {
                Some(Ok(r)) => Ok(r),
                Some(Err(Error::Assumption(why))) => {
                    log::info!("{}: {why}; using grid search", cell.name());
                    solve_general(mte, g, cost, cell, space, grid_n)
                }
                Some(Err(e)) => Err(e),
                None => solve_general(mte, g, cost, cell, space, grid_n),
            }
        }
    }
}

/// Solves every cell in parallel; results are in cell order.
pub fn solve_cells(
    mte: &MteCurve,
    g: &PropensityFn,
    cost: &CostSpec,
    cells: &[Cell],
    space: [f64; 2],
    method: Method,
    grid_n: usize,
) -> Result<Vec<SolveResult>> {
    cells
        .par_iter()
        .map(|c| solve_cell(mte, g, cost, c, space, method, grid_n))
        .collect()
}

/// Rule assigning each cell its `z_star`; cells are matched by name.
pub fn assemble_rule(results: &[SolveResult], cells: &[Cell], space: [f64; 2]) -> Result<SubsidyRule> {
    let assignment = cells
        .iter()
        .map(|c| {
            let name = c.name();
            results
                .iter()
                .find(|r| r.cell == name)
                .map(|r| r.z_star)
                .ok_or_else(|| Error::MissingCell(format!("no solution for {name}")))
        })
        .collect::<Result<_>>()?;
    SubsidyRule::new(cells.to_vec(), assignment, space)
}

fn polish(ctx: &Ctx, a: f64, b: f64, tol: f64) -> Result<f64> {
    find_root_bracketed(|z| ctx.lambda(z).unwrap_or(f64::NAN), a, b, tol)
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-14 * (1.0 + a.abs()) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SelectionParams;
    use crate::welfare::welfare_of_rule;

    fn toy() -> (MteCurve, PropensityFn) {
        let mte = MteCurve::custom(|u| 4.0 - 2.0 * u, Shape::Decreasing);
        let g = PropensityFn::Linear { intercept: 0.25, beta_x: vec![], beta_w: vec![0.25], gamma: 0.25 };
        (mte, g)
    }

    fn wcell(w: f64) -> Cell {
        Cell::new(vec![], vec![w], 1.0)
    }

    #[test]
    fn toy_positive_selection() {
        let (mte, g) = toy();
        let r = solve_positive_selection(&mte, &g, &wcell(0.0), [0.0, 1.0]).unwrap();
        assert_eq!(r.kind, SolutionKind::CornerHigh);
        assert_eq!(r.z_star, 1.0);
        assert_eq!(r.lambda, 0.0);
        let r = solve_positive_selection(&mte, &g, &wcell(1.0), [0.0, 1.0]).unwrap();
        assert_eq!(r.kind, SolutionKind::Interior);
        assert!((r.z_star - 0.4).abs() < 1e-9);
        assert!((r.u_star - 0.6).abs() < 1e-9);
        assert!((r.welfare - 1.8).abs() < 1e-9);
    }

    #[test]
    fn general_agrees_with_positive() {
        let (mte, g) = toy();
        for w in [0.0, 0.25, 0.5, 0.9, 1.0] {
            let a = solve_positive_selection(&mte, &g, &wcell(w), [0.0, 1.0]).unwrap();
            let b = solve_general(&mte, &g, &CostSpec::Voucher, &wcell(w), [0.0, 1.0], 64).unwrap();
            assert!((a.z_star - b.z_star).abs() < 1e-6, "w={w}: {} vs {}", a.z_star, b.z_star);
            assert_eq!(a.kind, b.kind);
        }
    }

    #[test]
    fn negative_selection_examples() {
        let mte = MteCurve::custom(|u| 2.0 * u - 1.0, Shape::Increasing);
        let lo = PropensityFn::Linear { intercept: 0.2, beta_x: vec![], beta_w: vec![], gamma: 0.4 };
        let hi = PropensityFn::Linear { intercept: 0.6, beta_x: vec![], beta_w: vec![], gamma: 0.3 };
        let c = Cell::new(vec![], vec![], 1.0);
        let r = solve_negative_selection(&mte, &lo, &CostSpec::Zero, &c, [0.0, 1.0]).unwrap();
        assert_eq!(r.kind, SolutionKind::CornerLow);
        let r = solve_negative_selection(&mte, &hi, &CostSpec::Zero, &c, [0.0, 1.0]).unwrap();
        assert_eq!(r.kind, SolutionKind::CornerHigh);
        let flat = MteCurve::custom(|_| 0.0, Shape::Increasing);
        let r = solve_negative_selection(&flat, &hi, &CostSpec::Zero, &c, [0.0, 1.0]).unwrap();
        assert_eq!(r.kind, SolutionKind::CornerLow);
        assert!(solve_negative_selection(&mte, &hi, &CostSpec::Voucher, &c, [0.0, 1.0]).is_err());
    }

    #[test]
    fn general_non_monotone_picks_better_crossing() {
        // positive on (0.2, 0.8), so welfare has local maxima at u = 0 and u = 0.8
        let mte = MteCurve::custom(|u| -(u - 0.2) * (u - 0.8), Shape::None);
        let g = PropensityFn::Linear { intercept: 0.0, beta_x: vec![], beta_w: vec![], gamma: 1.0 };
        let c = Cell::new(vec![], vec![], 1.0);
        let r = solve_general(&mte, &g, &CostSpec::Zero, &c, [0.0, 1.0], 101).unwrap();
        assert_eq!(r.kind, SolutionKind::Interior);
        assert!((r.z_star - 0.8).abs() < 1e-8);
        assert!(r.lambda.abs() < 1e-8);
    }

    #[test]
    fn general_zero_mte_voucher() {
        let mte = MteCurve::custom(|_| 0.0, Shape::None);
        let (_, g) = toy();
        let r = solve_general(&mte, &g, &CostSpec::Voucher, &wcell(0.5), [0.0, 1.0], 64).unwrap();
        assert_eq!(r.z_star, 0.0);
        assert_eq!(r.kind, SolutionKind::CornerLow);
        assert!(solve_general(&mte, &g, &CostSpec::Voucher, &wcell(0.5), [0.0, 1.0], 10).is_err());
    }

    #[test]
    fn assemble_toy_rule() {
        let (mte, g) = toy();
        let cells: Vec<Cell> = [0.0, 0.5, 1.0].iter().map(|&w| Cell::new(vec![], vec![w], 1.0 / 3.0)).collect();
        let mut cells = cells;
        cells[2].weight = 1.0 - 2.0 / 3.0;
        let res = solve_cells(&mte, &g, &CostSpec::Voucher, &cells, [0.0, 1.0], Method::Auto, 201).unwrap();
        let rule = assemble_rule(&res, &cells, [0.0, 1.0]).unwrap();
        for (z, want) in rule.assignment.iter().zip([1.0, 0.7, 0.4]) {
            assert!((z - want).abs() < 1e-9);
        }
        let rep = welfare_of_rule(&mte, &g, &CostSpec::Voucher, &rule, None).unwrap();
        let sum: f64 = res.iter().zip(&cells).map(|(r, c)| r.welfare * c.weight).sum();
        assert!((rep.net - sum).abs() < 1e-9);
        assert!(assemble_rule(&res[..1], &cells, [0.0, 1.0]).is_err());
    }

    #[test]
    fn benchmark_medical_falls_back_to_grid() {
        let p = SelectionParams::benchmark();
        let mte = MteCurve::from_params(&p);
        let g = PropensityFn::probit(p.beta_d.clone(), p.gamma);
        let cell = Cell::new(vec![1.0], vec![], 1.0);
        assert!(matches!(
            solve_positive_selection(&mte, &g, &cell, [0.0, 900.0]),
            Err(Error::Assumption(_))
        ));
        let r = solve_cell(&mte, &g, &CostSpec::Voucher, &cell, [0.0, 900.0], Method::Auto, 2001).unwrap();
        assert_eq!(r.kind, SolutionKind::Interior);
        assert!((r.z_star - 375.0).abs() < 120.0, "{}", r.z_star);
    }
}
