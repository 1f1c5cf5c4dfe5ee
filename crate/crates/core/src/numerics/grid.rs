use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tabulated function on strictly increasing knots, linearly interpolated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid")]
pub struct Grid {
    points: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawGrid {
    points: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<RawGrid> for Grid {
    type Error = Error;
    fn try_from(raw: RawGrid) -> Result<Self> {
        Grid::new(raw.points, raw.values)
    }
}

impl Grid {
    pub fn new(points: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidParams("grid needs at least two points".into()));
        }
        if points.len() != values.len() {
            return Err(Error::InvalidParams(format!(
                "grid has {} points but {} values",
                points.len(),
                values.len()
            )));
        }
        if points.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("grid entries must be finite".into()));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParams("grid points must be strictly increasing".into()));
        }
        Ok(Self { points, values })
    }

    /// Evenly spaced knots on `[lo, hi]` with values from `f`.
    pub fn tabulate(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let points = linspace(lo, hi, n);
        let values = points.iter().map(|&p| f(p)).collect();
        Self::new(points, values)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn first(&self) -> f64 {
        self.points[0]
    }

    pub fn last(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub fn min_spacing(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Index `i` with `points[i] <= t <= points[i + 1]`, clamped to the ends.
    pub fn segment(&self, t: f64) -> usize {
        let n = self.points.len();
        match self.points.partition_point(|&p| p <= t) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        }
    }

    /// Linear interpolation; constant beyond the end knots.
    pub fn interpolate(&self, t: f64) -> f64 {
        if t <= self.first() {
            return self.values[0];
        }
        if t >= self.last() {
            return self.values[self.values.len() - 1];
        }
        let i = self.segment(t);
        let (x0, x1) = (self.points[i], self.points[i + 1]);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        y0 + (y1 - y0) * (t - x0) / (x1 - x0)
    }

    /// Central difference with step equal to the minimum knot spacing,
    /// truncated at the end knots.
    pub fn slope(&self, t: f64) -> f64 {
        let h = self.min_spacing();
        let lo = (t - h).max(self.first());
        let hi = (t + h).min(self.last());
        if hi <= lo {
            return 0.0;
        }
        (self.interpolate(hi) - self.interpolate(lo)) / (hi - lo)
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.first() && t <= self.last()
    }

    /// Exact integral of the interpolant over `[a, b]`, with constant
    /// continuation outside the knots.
    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        if b < a {
            return -self.integrate(b, a);
        }
        let mut total = 0.0;
        // below the first knot
        if a < self.first() {
            let hi = b.min(self.first());
            total += self.values[0] * (hi - a);
        }
        for i in 0..self.points.len() - 1 {
            let lo = a.max(self.points[i]);
            let hi = b.min(self.points[i + 1]);
            if hi > lo {
                total += 0.5 * (self.interpolate(lo) + self.interpolate(hi)) * (hi - lo);
            }
        }
        if b > self.last() {
            let lo = a.max(self.last());
            total += self.values[self.values.len() - 1] * (b - lo);
        }
        total
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect()
}
