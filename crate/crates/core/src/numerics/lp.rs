use crate::error::{Error, Result};

pub const LP_TOL: f64 = 1e-9;

/// One linear constraint row `aᵀm (= or ≤) b`.
pub type Constraint = (Vec<f64>, f64);

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub value: f64,
    pub argmin: Vec<f64>,
}

/// Minimizes `cᵀm` over free `m` subject to `A_eq m = b_eq` and
/// `A_in m ≤ b_in`.
///
/// Two-phase dense tableau simplex under Bland's rule. Free variables are
/// split as `m = m⁺ − m⁻`.
pub fn lp_min_linear(
    objective: &[f64],
    equalities: &[Constraint],
    inequalities: &[Constraint],
) -> Result<LpSolution> {
    let n = objective.len();
    for (a, b) in equalities.iter().chain(inequalities) {
        if a.len() != n {
            return Err(Error::InvalidParams(format!(
                "constraint has {} coefficients, expected {n}",
                a.len()
            )));
        }
        if !b.is_finite() || a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("constraint entries must be finite".into()));
        }
    }
    if objective.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParams("objective entries must be finite".into()));
    }

    let m_eq = equalities.len();
    let m_in = inequalities.len();
    let rows = m_eq + m_in;
    // columns: m⁺ (n), m⁻ (n), slacks (m_in), artificials (rows), rhs
    let n_struct = 2 * n + m_in;
    let n_cols = n_struct + rows;
    let width = n_cols + 1;
    let mut t = Tableau { rows, width, data: vec![0.0; (rows + 1) * width], basis: vec![0; rows] };

    for (r, (a, b)) in equalities.iter().chain(inequalities).enumerate() {
        let sign = if *b < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t.set(r, j, sign * a[j]);
            t.set(r, n + j, -sign * a[j]);
        }
        if r >= m_eq {
            t.set(r, 2 * n + (r - m_eq), sign);
        }
        t.set(r, n_struct + r, 1.0);
        t.set(r, n_cols, sign * b);
        t.basis[r] = n_struct + r;
    }

    // phase 1: minimize the sum of artificials
    let obj = rows;
    for r in 0..rows {
        for j in 0..width {
            let v = t.get(obj, j) - t.get(r, j);
            t.set(obj, j, v);
        }
    }
    for r in 0..rows {
        t.set(obj, n_struct + r, 0.0);
    }
    t.run(n_cols)?;
    let scale = 1.0 + equalities.iter().chain(inequalities).fold(0.0f64, |s, (_, b)| s.max(b.abs()));
    if -t.get(obj, n_cols) > LP_TOL * scale {
        return Err(Error::Infeasible);
    }

    // drive remaining artificials out of the basis; drop redundant rows
    let mut keep = vec![true; rows];
    for r in 0..rows {
        if t.basis[r] >= n_struct {
            match (0..n_struct).find(|&j| t.get(r, j).abs() > LP_TOL) {
                Some(j) => t.pivot(r, j),
                None => keep[r] = false,
            }
        }
    }

    // phase 2 objective row over structural columns only
    for j in 0..width {
        t.set(obj, j, 0.0);
    }
    for j in 0..n {
        t.set(obj, j, objective[j]);
        t.set(obj, n + j, -objective[j]);
    }
    for r in 0..rows {
        if !keep[r] {
            continue;
        }
        let cb = t.get(obj, t.basis[r]);
        if cb != 0.0 {
            for j in 0..width {
                let v = t.get(obj, j) - cb * t.get(r, j);
                t.set(obj, j, v);
            }
        }
    }
    for r in 0..rows {
        if !keep[r] {
            for j in 0..width {
                t.set(r, j, 0.0);
            }
            t.basis[r] = usize::MAX;
        }
    }
    t.run(n_struct)?;

    let mut x = vec![0.0; n_struct];
    for r in 0..rows {
        if t.basis[r] < n_struct {
            x[t.basis[r]] = t.get(r, n_cols);
        }
    }
    let argmin: Vec<f64> = (0..n).map(|j| x[j] - x[n + j]).collect();
    let value = objective.iter().zip(&argmin).map(|(c, m)| c * m).sum();
    Ok(LpSolution { value, argmin })
}

struct Tableau {
    rows: usize,
    width: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.width + c] = v;
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width;
        let p = self.get(pr, pc);
        for j in 0..w {
            self.data[pr * w + j] /= p;
        }
        let prow: Vec<f64> = self.data[pr * w..(pr + 1) * w].to_vec();
        for r in 0..=self.rows {
            if r == pr {
                continue;
            }
            let f = self.data[r * w + pc];
            if f != 0.0 {
                for (cell, pv) in self.data[r * w..(r + 1) * w].iter_mut().zip(&prow) {
                    *cell -= f * pv;
                }
                self.data[r * w + pc] = 0.0;
            }
        }
        self.basis[pr] = pc;
    }

    /// Bland's rule iterations over columns `0..n_enter`.
    fn run(&mut self, n_enter: usize) -> Result<()> {
        let rhs = self.width - 1;
        let obj = self.rows;
        let limit = 50_000 + 100 * self.width;
        for _ in 0..limit {
            let Some(pc) = (0..n_enter).find(|&j| self.get(obj, j) < -LP_TOL) else {
                return Ok(());
            };
            let mut best: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                if self.basis[r] == usize::MAX {
                    continue;
                }
                let a = self.get(r, pc);
                if a > LP_TOL {
                    let ratio = self.get(r, rhs) / a;
                    best = match best {
                        None => Some((r, ratio)),
                        Some((br, bv)) => {
                            if ratio < bv - LP_TOL
                                || (ratio <= bv + LP_TOL && self.basis[r] < self.basis[br])
                            {
                                Some((r, ratio))
                            } else {
                                Some((br, bv))
                            }
                        }
                    };
                }
            }
            match best {
                Some((pr, _)) => self.pivot(pr, pc),
                None => return Err(Error::Unbounded),
            }
        }
        Err(Error::NonConvergence { what: "simplex", iterations: limit, trace: Vec::new() })
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::numerics::linalg::solve_dense;

    /// Brute-force oracle: every basic solution with all equalities active.
    pub(crate) fn vertex_enumeration(
        c: &[f64],
        eq: &[Constraint],
        ineq: &[Constraint],
    ) -> Option<f64> {
        let need = c.len().checked_sub(eq.len())?;
        let mut best: Option<f64> = None;
        let mut chosen = Vec::with_capacity(need);
        choose(ineq.len(), need, 0, &mut chosen, &mut |idx| {
            let mut a: Vec<Vec<f64>> = eq.iter().map(|(r, _)| r.clone()).collect();
            let mut b: Vec<f64> = eq.iter().map(|(_, v)| *v).collect();
            for &i in idx {
                a.push(ineq[i].0.clone());
                b.push(ineq[i].1);
            }
            if let Some(x) = solve_dense(&a, &b) {
                let ok = eq.iter().all(|(r, v)| (dot(r, &x) - v).abs() < 1e-7)
                    && ineq.iter().all(|(r, v)| dot(r, &x) <= v + 1e-7);
                if ok {
                    let val = dot(c, &x);
                    best = Some(best.map_or(val, |b: f64| b.min(val)));
                }
            }
        });
        best
    }

    fn choose(n: usize, k: usize, start: usize, acc: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if acc.len() == k {
            f(acc);
            return;
        }
        for i in start..n {
            acc.push(i);
            choose(n, k, i + 1, acc, f);
            acc.pop();
        }
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    fn unit(n: usize, i: usize, v: f64) -> Vec<f64> {
        let mut e = vec![0.0; n];
        e[i] = v;
        e
    }

    /// `m` decreasing with entries in `[0, 1]`.
    fn monotone_box(n: usize) -> Vec<Constraint> {
        let mut rows = Vec::new();
        for i in 0..n {
            rows.push((unit(n, i, 1.0), 1.0));
            rows.push((unit(n, i, -1.0), 0.0));
        }
        for i in 0..n - 1 {
            let mut r = vec![0.0; n];
            r[i + 1] = 1.0;
            r[i] = -1.0;
            rows.push((r, 0.0));
        }
        rows
    }

    #[test]
    fn unit_interval() {
        let s = lp_min_linear(&[1.0], &[], &[(vec![1.0], 1.0), (vec![-1.0], 0.0)]).unwrap();
        assert_eq!(s.value, 0.0);
        assert_eq!(s.argmin, vec![0.0]);
    }

    #[test]
    fn alternating_objective_monotone_matches_oracle() {
        let c = [1.0, -1.0, 1.0, -1.0];
        let ineq = monotone_box(4);
        let s = lp_min_linear(&c, &[], &ineq).unwrap();
        let oracle = vertex_enumeration(&c, &[], &ineq).unwrap();
        assert!((s.value - oracle).abs() < 1e-9, "{} vs {}", s.value, oracle);
    }

    #[test]
    fn pinned_segment_with_free_tail_matches_oracle() {
        let n = 6;
        let c = [0.3, -1.0, 0.5, 0.2, -0.7, 0.4];
        let eq = vec![(unit(n, 2, 1.0), 0.6), (unit(n, 3, 1.0), 0.4)];
        let ineq = monotone_box(n);
        let s = lp_min_linear(&c, &eq, &ineq).unwrap();
        let oracle = vertex_enumeration(&c, &eq, &ineq).unwrap();
        assert!((s.value - oracle).abs() < 1e-9, "{} vs {}", s.value, oracle);
        assert!((s.argmin[2] - 0.6).abs() < 1e-12 && (s.argmin[3] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded_are_distinct() {
        let err = lp_min_linear(&[1.0], &[], &[(vec![1.0], -1.0), (vec![-1.0], 0.0)]).unwrap_err();
        assert!(matches!(err, Error::Infeasible));
        let err = lp_min_linear(&[1.0], &[], &[(vec![1.0], 1.0)]).unwrap_err();
        assert!(matches!(err, Error::Unbounded));
        let err = lp_min_linear(&[0.0, 1.0], &[(vec![1.0, 0.0], 1.0), (vec![1.0, 0.0], 2.0)], &[]).unwrap_err();
        assert!(matches!(err, Error::Infeasible));
    }

    #[test]
    fn redundant_equalities_are_tolerated() {
        let eq = vec![(vec![1.0, 1.0], 1.0), (vec![2.0, 2.0], 2.0)];
        let ineq = vec![(vec![-1.0, 0.0], 0.0), (vec![0.0, -1.0], 0.0)];
        let s = lp_min_linear(&[1.0, 2.0], &eq, &ineq).unwrap();
        assert!((s.value - 1.0).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn matches_vertex_enumeration(
                n in 2usize..=8,
                c in proptest::collection::vec(-2.0f64..2.0, 8),
                pins in proptest::collection::vec(proptest::option::weighted(0.3, 0.0f64..1.0), 8),
            ) {
                let c = &c[..n];
                let ineq = monotone_box(n);
                // pinned values sorted decreasing so the set stays nonempty
                let mut vals: Vec<f64> = pins[..n].iter().flatten().copied().collect();
                vals.sort_by(|a, b| b.total_cmp(a));
                let mut it = vals.into_iter();
                let eq: Vec<Constraint> = pins[..n].iter().enumerate()
                    .filter(|(_, p)| p.is_some())
                    .map(|(i, _)| (unit(n, i, 1.0), it.next().unwrap()))
                    .collect();
                let s = lp_min_linear(c, &eq, &ineq).unwrap();
                let oracle = vertex_enumeration(c, &eq, &ineq).unwrap();
                prop_assert!((s.value - oracle).abs() < 1e-8, "{} vs {}", s.value, oracle);
            }
        }
    }
}
