#![allow(dead_code)]

/// `min cᵀm` subject to `A m ≤ b` by enumerating every basis of `d` active
/// constraints. The feasible set must be bounded.
pub fn vertex_min(c: &[f64], rows: &[(Vec<f64>, f64)]) -> Option<(f64, Vec<f64>)> {
    let d = c.len();
    if d == 0 {
        return Some((0.0, vec![]));
    }
    let scale = rows.iter().map(|r| r.1.abs()).fold(1.0f64, f64::max);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut pick: Vec<usize> = (0..d).collect();
    loop {
        let a: Vec<Vec<f64>> = pick.iter().map(|&i| rows[i].0.clone()).collect();
        let b: Vec<f64> = pick.iter().map(|&i| rows[i].1).collect();
        if let Some(m) = gauss(a, b) {
            let feasible = rows.iter().all(|(r, rhs)| dot(r, &m) <= rhs + 1e-9 * scale);
            if feasible {
                let v = dot(c, &m);
                if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
                    best = Some((v, m));
                }
            }
        }
        if !next_combination(&mut pick, rows.len()) {
            break;
        }
    }
    best
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn next_combination(pick: &mut [usize], n: usize) -> bool {
    let k = pick.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if pick[i] < n - k + i {
            pick[i] += 1;
            for j in i + 1..k {
                pick[j] = pick[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Gaussian elimination with partial pivoting; `None` when singular.
pub fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[p][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, p);
        b.swap(col, p);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for k in col..n {
                a[r][k] -= f * a[col][k];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Box, shape and pinned-value constraints of one cell of an identified
/// set, in the free knots only. Returns the rows, the free indices and the
/// constant contributed by pinned knots to `cᵀm`.
pub fn set_rows(
    pinned: &[Option<f64>],
    decreasing: bool,
    bounds: [f64; 2],
    coef: &[f64],
) -> (Vec<(Vec<f64>, f64)>, Vec<usize>, f64) {
    let free: Vec<usize> = (0..pinned.len()).filter(|&k| pinned[k].is_none()).collect();
    let nf = free.len();
    let mut rows = Vec::new();
    for j in 0..nf {
        let mut r = vec![0.0; nf];
        r[j] = 1.0;
        rows.push((r.clone(), bounds[1]));
        r[j] = -1.0;
        rows.push((r, -bounds[0]));
    }
    if decreasing {
        for k in 0..pinned.len() - 1 {
            // m[k+1] - m[k] <= 0
            let mut r = vec![0.0; nf];
            let mut rhs = 0.0;
            for (idx, s) in [(k + 1, 1.0), (k, -1.0)] {
                match pinned[idx] {
                    Some(v) => rhs -= s * v,
                    None => r[free.iter().position(|&f| f == idx).unwrap()] += s,
                }
            }
            if r.iter().any(|v| *v != 0.0) {
                rows.push((r, rhs));
            }
        }
    }
    let constant = pinned.iter().zip(coef).filter_map(|(p, c)| p.map(|v| v * c)).sum();
    (rows, free, constant)
}
