use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Observational records `(y, d, x, w, z)` stored column-wise, with `x` and
/// `w` flattened row-major.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub y: Vec<f64>,
    pub d: Vec<u8>,
    pub x: Vec<f64>,
    pub w: Vec<f64>,
    pub z: Vec<f64>,
    pub x_dim: usize,
    pub w_dim: usize,
}

impl Dataset {
    pub fn with_dims(x_dim: usize, w_dim: usize) -> Self {
        Self { x_dim, w_dim, ..Default::default() }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.x_dim..(i + 1) * self.x_dim]
    }

    pub fn w_row(&self, i: usize) -> &[f64] {
        &self.w[i * self.w_dim..(i + 1) * self.w_dim]
    }

    pub fn push(&mut self, y: f64, d: u8, x: &[f64], w: &[f64], z: f64) -> Result<()> {
        if x.len() != self.x_dim || w.len() != self.w_dim {
            return Err(Error::Data(format!(
                "record has {} covariates and {} instruments, expected {} and {}",
                x.len(),
                w.len(),
                self.x_dim,
                self.w_dim
            )));
        }
        if d > 1 {
            return Err(Error::Data(format!("treatment must be 0 or 1, got {d}")));
        }
        self.y.push(y);
        self.d.push(d);
        self.x.extend_from_slice(x);
        self.w.extend_from_slice(w);
        self.z.push(z);
        Ok(())
    }

    pub fn append(&mut self, other: Dataset) {
        debug_assert_eq!((self.x_dim, self.w_dim), (other.x_dim, other.w_dim));
        self.y.extend(other.y);
        self.d.extend(other.d);
        self.x.extend(other.x);
        self.w.extend(other.w);
        self.z.extend(other.z);
    }

    /// Checks column lengths and value domains.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if self.d.len() != n
            || self.z.len() != n
            || self.x.len() != n * self.x_dim
            || self.w.len() != n * self.w_dim
        {
            return Err(Error::Data("dataset columns have inconsistent lengths".into()));
        }
        if self.d.iter().any(|&d| d > 1) {
            return Err(Error::Data("treatment column must be 0 or 1".into()));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !(finite(&self.y) && finite(&self.x) && finite(&self.w) && finite(&self.z)) {
            return Err(Error::Data("dataset contains non-finite values".into()));
        }
        Ok(())
    }

    /// Row indices whose covariates equal `x`.
    pub fn rows_in_x_cell(&self, x: &[f64]) -> Vec<usize> {
        (0..self.len()).filter(|&i| same_point(self.x_row(i), x)).collect()
    }

    /// Distinct covariate vectors in order of first appearance.
    pub fn distinct_x(&self) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::new();
        for i in 0..self.len() {
            let row = self.x_row(i);
            if !out.iter().any(|p| same_point(p, row)) {
                out.push(row.to_vec());
            }
        }
        out
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["y".to_string(), "d".to_string()];
        h.extend((1..=self.x_dim).map(|k| format!("x{k}")));
        h.extend((1..=self.w_dim).map(|k| format!("w{k}")));
        h.push("z".into());
        h
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(self.header())?;
        let mut rec: Vec<String> = Vec::with_capacity(3 + self.x_dim + self.w_dim);
        for i in 0..self.len() {
            rec.clear();
            rec.push(self.y[i].to_string());
            rec.push(self.d[i].to_string());
            rec.extend(self.x_row(i).iter().map(f64::to_string));
            rec.extend(self.w_row(i).iter().map(f64::to_string));
            rec.push(self.z[i].to_string());
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads `y,d,x1..xk,w1..wm,z`. Column order must follow that layout.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let header: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
        let (x_dim, w_dim) = parse_header(&header)?;
        let mut data = Dataset::with_dims(x_dim, w_dim);
        let mut x = vec![0.0; x_dim];
        let mut w = vec![0.0; w_dim];
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(Error::Data(format!("row {} has {} fields", line + 1, rec.len())));
            }
            let num = |j: usize| -> Result<f64> {
                let s = rec[j].trim();
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Data(format!("row {}: bad number {s:?} in {}", line + 1, header[j])))
            };
            let y = num(0)?;
            let d = match rec[1].trim() {
                "0" | "0.0" => 0,
                "1" | "1.0" => 1,
                other => return Err(Error::Data(format!("row {}: treatment {other:?} is not 0/1", line + 1))),
            };
            for (k, v) in x.iter_mut().enumerate() {
                *v = num(2 + k)?;
            }
            for (k, v) in w.iter_mut().enumerate() {
                *v = num(2 + x_dim + k)?;
            }
            let z = num(2 + x_dim + w_dim)?;
            data.push(y, d, &x, &w, z)?;
        }
        Ok(data)
    }

    pub fn read_csv_path(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}

fn parse_header(h: &[String]) -> Result<(usize, usize)> {
    let bad = |msg: String| Err(Error::Data(format!("invalid dataset header: {msg}")));
    if h.len() < 3 || h[0] != "y" || h[1] != "d" || h[h.len() - 1] != "z" {
        return bad("expected y,d,x1..xk,w1..wm,z".into());
    }
    let mid = &h[2..h.len() - 1];
    let x_dim = mid.iter().take_while(|c| c.starts_with('x')).count();
    for (k, c) in mid.iter().enumerate() {
        let want = if k < x_dim { format!("x{}", k + 1) } else { format!("w{}", k - x_dim + 1) };
        if *c != want {
            return bad(format!("column {c:?} where {want:?} was expected"));
        }
    }
    Ok((x_dim, mid.len() - x_dim))
}

pub(crate) fn same_point(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(p, q)| (p - q).abs() <= 1e-12 * (1.0 + p.abs()))
}
