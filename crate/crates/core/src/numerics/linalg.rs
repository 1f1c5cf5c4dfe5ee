use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidParams(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidParams("ragged matrix rows".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Relative threshold on a Householder pivot below which a column is
/// treated as linearly dependent on the previous ones.
const RANK_TOL: f64 = 1e-10;

/// Least-squares coefficients via Householder QR.
///
/// Fails with [`Error::RankDeficient`] naming the first column that is
/// (numerically) in the span of the columns before it.
pub fn ols_fit(design: &Matrix, response: &[f64]) -> Result<Vec<f64>> {
    let (n, k) = (design.rows(), design.cols());
    if n != response.len() {
        return Err(Error::InvalidParams(format!(
            "design has {n} rows but response has {} entries",
            response.len()
        )));
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    if n < k {
        return Err(Error::RankDeficient { column: n });
    }
    let mut cols: Vec<Vec<f64>> = (0..k).map(|j| (0..n).map(|i| design.get(i, j)).collect()).collect();
    let norms: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut y = response.to_vec();
    let mut r = vec![vec![0.0; k]; k];

    for j in 0..k {
        let tail_norm = dot(&cols[j][j..], &cols[j][j..]).sqrt();
        if norms[j] == 0.0 || tail_norm <= RANK_TOL * norms[j] {
            return Err(Error::RankDeficient { column: j });
        }
        let alpha = if cols[j][j] > 0.0 { -tail_norm } else { tail_norm };
        let mut v: Vec<f64> = cols[j][j..].to_vec();
        v[0] -= alpha;
        let vnorm2 = dot(&v, &v);
        let (left, right) = cols.split_at_mut(j + 1);
        let _ = left;
        for col in right.iter_mut() {
            let s = 2.0 * dot(&v, &col[j..]) / vnorm2;
            for (c, vi) in col[j..].iter_mut().zip(&v) {
                *c -= s * vi;
            }
        }
        let s = 2.0 * dot(&v, &y[j..]) / vnorm2;
        for (c, vi) in y[j..].iter_mut().zip(&v) {
            *c -= s * vi;
        }
        r[j][j] = alpha;
        for (jj, col) in cols.iter().enumerate().skip(j + 1) {
            r[j][jj] = col[j];
        }
    }

    let mut beta = vec![0.0; k];
    for j in (0..k).rev() {
        let mut acc = y[j];
        for jj in j + 1..k {
            acc -= r[j][jj] * beta[jj];
        }
        beta[j] = acc / r[j][j];
    }
    Ok(beta)
}

/// Solves `A x = b` for symmetric positive-definite `A` (Cholesky).
pub fn solve_spd(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for p in 0..j {
                s -= l[i][p] * l[j][p];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::Domain("matrix is not positive definite".into()));
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for p in 0..i {
            s -= l[i][p] * z[p];
        }
        z[i] = s / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = z[i];
        for p in i + 1..n {
            s -= l[p][i] * x[p];
        }
        x[i] = s / l[i][i];
    }
    Ok(x)
}

/// Dense Gaussian elimination with partial pivoting. Returns `None` when
/// the system is singular to working precision.
pub fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(row, &bi)| {
        let mut r = row.clone();
        r.push(bi);
        r
    }).collect();
    let scale = a.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs())).max(1.0);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() <= 1e-12 * scale {
            return None;
        }
        m.swap(col, piv);
        for i in col + 1..n {
            let f = m[i][col] / m[col][col];
            if f != 0.0 {
                for j in col..=n {
                    m[i][j] -= f * m[col][j];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = m[i][n];
        for j in i + 1..n {
            s -= m[i][j] * x[j];
        }
        x[i] = s / m[i][i];
    }
    Some(x)
}

/// Lower Cholesky factor of a positive-semidefinite matrix. Zero pivots are
/// allowed (the matching column of the factor is zero); negative pivots
/// beyond `tol` are reported as an error.
pub fn cholesky_psd(a: &[Vec<f64>], tol: f64) -> Result<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for p in 0..j {
                s -= l[i][p] * l[j][p];
            }
            if i == j {
                if s < -tol {
                    return Err(Error::InvalidParams(format!(
                        "covariance matrix is not positive semidefinite (pivot {s:.3e})"
                    )));
                }
                l[i][i] = s.max(0.0).sqrt();
            } else if l[j][j] > 0.0 {
                l[i][j] = s / l[j][j];
            } else if s.abs() > tol {
                return Err(Error::InvalidParams(
                    "covariance matrix is not positive semidefinite".into(),
                ));
            }
        }
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_line() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let b = ols_fit(&x, &[1.0, 3.0]).unwrap();
        assert!((b[0] - 1.0).abs() < 1e-12 && (b[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn noiseless_line_ten_points() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![1.0, i as f64 * 0.7 - 2.0]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 2.0 + 5.0 * r[1]).collect();
        let b = ols_fit(&Matrix::from_rows(&rows).unwrap(), &y).unwrap();
        assert!((b[0] - 2.0).abs() < 1e-10 && (b[1] - 5.0).abs() < 1e-10);
    }

    #[test]
    fn rank_deficiency_names_column() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| {
            let t = i as f64;
            vec![1.0, t, 2.0 * t + 1.0]
        }).collect();
        let err = ols_fit(&Matrix::from_rows(&rows).unwrap(), &[0.0; 6]).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { column: 2 }));
        let rows: Vec<Vec<f64>> = (0..4).map(|_| vec![1.0, 0.0]).collect();
        let err = ols_fit(&Matrix::from_rows(&rows).unwrap(), &[0.0; 4]).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { column: 1 }));
    }

    #[test]
    fn spd_and_dense_solvers_agree() {
        let a = vec![vec![4.0, 1.0, 0.5], vec![1.0, 3.0, 0.2], vec![0.5, 0.2, 2.0]];
        let b = [1.0, 2.0, 3.0];
        let x1 = solve_spd(&a, &b).unwrap();
        let x2 = solve_dense(&a, &b).unwrap();
        for (p, q) in x1.iter().zip(&x2) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn psd_cholesky_accepts_singular() {
        let a = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let l = cholesky_psd(&a, 1e-12).unwrap();
        assert_eq!(l[1][1], 0.0);
        let bad = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert!(cholesky_psd(&bad, 1e-12).is_err());
    }
}
