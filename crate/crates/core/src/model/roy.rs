use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::dataset::{same_point, Dataset};
use super::mte::{GridCell, MteCurve, MteForm, Shape};
use super::params::{ScalarDist, VectorDist};
use super::propensity::{PropensityCell, PropensityFn};
use super::simulate::{par_chunks, stream_rng};
use crate::error::{Error, Result};
use crate::numerics::{find_root_bracketed, linspace, Grid};

/// Utility `φ(x, w, z, δ, v)`; treatment is taken when it is nonnegative.
pub type UtilityFn = dyn Fn(&[f64], &[f64], f64, f64, f64) -> f64 + Send + Sync;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increasing,
    Decreasing,
}

#[derive(Clone)]
pub struct GeneralizedRoySpec {
    pub phi: Arc<UtilityFn>,
    pub delta_dist: ScalarDist,
    pub v_dist: ScalarDist,
    /// Monotonicity of `φ` in `δ`.
    pub direction: Direction,
}

impl fmt::Debug for GeneralizedRoySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralizedRoySpec")
            .field("delta_dist", &self.delta_dist)
            .field("v_dist", &self.v_dist)
            .field("direction", &self.direction)
            .finish_non_exhaustive()
    }
}

impl GeneralizedRoySpec {
    pub fn new(
        phi: impl Fn(&[f64], &[f64], f64, f64, f64) -> f64 + Send + Sync + 'static,
        delta_dist: ScalarDist,
        v_dist: ScalarDist,
        direction: Direction,
    ) -> Self {
        Self { phi: Arc::new(phi), delta_dist, v_dist, direction }
    }
}

/// Binned Monte-Carlo MTE for one covariate cell.
#[derive(Debug, Clone, Serialize)]
pub struct MteBins {
    pub x: Vec<f64>,
    pub centers: Vec<f64>,
    pub means: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct RoyConstruction {
    pub data: Dataset,
    pub propensity: PropensityFn,
    pub mte: MteCurve,
    pub bins: Vec<MteBins>,
    /// Constructed resistance `U_D`, aligned with the dataset rows.
    pub u_d: Vec<f64>,
}

const RANK_DRAWS: usize = 200;
const RANK_PAIRS: usize = 50;
const Z_KNOTS: usize = 201;

/// Simulates the generalized Roy model and builds `U_D`, `g` and the MTE.
///
/// `U_D` is the mid-rank empirical CDF of `φ̃₃(Δ, V)` within each covariate
/// cell; the MTE is averaged over `⌈n^{1/3}⌉` equal-width `U_D` bins unless
/// `bins` is given. `x` and `w` must have finite support.
pub fn simulate_generalized_roy(
    spec: &GeneralizedRoySpec,
    n: usize,
    x_dist: &VectorDist,
    w_dist: &VectorDist,
    z_dist: &ScalarDist,
    seed: u64,
    bins: Option<usize>,
) -> Result<RoyConstruction> {
    if n < 2 {
        return Err(Error::InvalidParams("generalized Roy simulation needs n >= 2".into()));
    }
    for d in [&spec.delta_dist, &spec.v_dist, z_dist] {
        d.validate()?;
    }
    x_dist.validate()?;
    w_dist.validate()?;
    let x_support = x_dist
        .support()
        .ok_or_else(|| Error::InvalidParams("covariates must have finite support".into()))?;
    let w_support = w_dist
        .support()
        .ok_or_else(|| Error::InvalidParams("instruments must have finite support".into()))?;

    check_rank_invariance(spec, x_dist, w_dist, z_dist, seed)?;

    let delta0 = spec.delta_dist.mean();
    let v0 = spec.v_dist.mean();
    let w_ref = w_support[0].0.clone();
    let (z_lo, z_hi) = z_dist.range();
    let (z_lo, z_hi) = if z_lo.is_finite() { (z_lo, z_hi) } else { (-1.0, 1.0) };
    let phi = &spec.phi;

    // φ̃₃(δ, v) = φ̃₁(x, w_ref, z*) where φ(x, w_ref, z*, δ, v) = 0
    let tilde3 = |x: &[f64], delta: f64, v: f64| -> Result<f64> {
        let f = |z: f64| phi(x, &w_ref, z, delta, v);
        let (mut lo, mut hi) = (z_lo.min(z_hi - 1.0), z_hi.max(z_lo + 1.0));
        for _ in 0..64 {
            if f(lo) <= 0.0 && f(hi) >= 0.0 {
                let z = find_root_bracketed(f, lo, hi, 1e-12)?;
                return Ok(phi(x, &w_ref, z, delta0, v0));
            }
            let width = hi - lo;
            lo -= width;
            hi += width;
        }
        Err(Error::Assumption("utility has no root in the subsidy; phi must be increasing in z".into()))
    };

    let (xd, wd) = (x_dist.dim(), w_dist.dim());
    let parts = par_chunks(n, seed, |rng, len| -> Result<(Dataset, Vec<f64>, Vec<f64>)> {
        let mut out = Dataset::with_dims(xd, wd);
        let mut t3 = Vec::with_capacity(len);
        let mut deltas = Vec::with_capacity(len);
        let mut x = Vec::with_capacity(xd);
        let mut w = Vec::with_capacity(wd);
        for _ in 0..len {
            x.clear();
            w.clear();
            x_dist.sample_into(rng, &mut x);
            w_dist.sample_into(rng, &mut w);
            let z = z_dist.sample(rng);
            let delta = spec.delta_dist.sample(rng);
            let v = spec.v_dist.sample(rng);
            let y0: f64 = StandardNormal.sample(rng);
            let d = u8::from(phi(&x, &w, z, delta, v) >= 0.0);
            t3.push(tilde3(&x, delta, v)?);
            deltas.push(delta);
            out.push(if d == 1 { y0 + delta } else { y0 }, d, &x, &w, z)?;
        }
        Ok((out, t3, deltas))
    });
    let mut data = Dataset::with_dims(xd, wd);
    let mut t3 = Vec::with_capacity(n);
    let mut deltas = Vec::with_capacity(n);
    for p in parts {
        let (d, t, dl) = p?;
        data.append(d);
        t3.extend(t);
        deltas.extend(dl);
    }

    let mut u_d = vec![0.0; n];
    let mut prop_cells = Vec::new();
    let mut mte_cells = Vec::new();
    let mut all_bins = Vec::new();
    let z_grid = linspace(z_lo, if z_hi > z_lo { z_hi } else { z_lo + 1.0 }, Z_KNOTS);
    for (xp, _) in &x_support {
        let rows: Vec<usize> = (0..n).filter(|&i| same_point(data.x_row(i), xp)).collect();
        if rows.is_empty() {
            continue;
        }
        let m = rows.len();
        let mut order = rows.clone();
        order.sort_by(|&a, &b| t3[a].total_cmp(&t3[b]));
        let mut sorted_t3: Vec<f64> = Vec::with_capacity(m);
        let mut k = 0;
        while k < m {
            let mut j = k;
            while j + 1 < m && t3[order[j + 1]] == t3[order[k]] {
                j += 1;
            }
            let mid = 0.5 * (k + j + 1) as f64 / m as f64;
            for &i in &order[k..=j] {
                u_d[i] = mid;
            }
            k = j + 1;
        }
        sorted_t3.extend(order.iter().map(|&i| t3[i]));

        for (wp, _) in &w_support {
            let values: Vec<f64> = z_grid
                .iter()
                .map(|&z| {
                    let t1 = phi(xp, wp, z, delta0, v0);
                    sorted_t3.partition_point(|&t| t <= t1) as f64 / m as f64
                })
                .collect();
            prop_cells.push(PropensityCell { x: xp.clone(), w: wp.clone(), curve: Grid::new(z_grid.clone(), values)? });
        }

        let nb = bins.unwrap_or_else(|| (m as f64).cbrt().ceil() as usize).max(2);
        let mut sum = vec![0.0; nb];
        let mut sq = vec![0.0; nb];
        let mut cnt = vec![0usize; nb];
        for &i in &rows {
            let b = ((u_d[i] * nb as f64) as usize).min(nb - 1);
            sum[b] += deltas[i];
            sq[b] += deltas[i] * deltas[i];
            cnt[b] += 1;
        }
        let mut centers = Vec::new();
        let mut means = Vec::new();
        let mut ses = Vec::new();
        let mut counts = Vec::new();
        for b in 0..nb {
            if cnt[b] == 0 {
                continue;
            }
            let c = cnt[b] as f64;
            let mean = sum[b] / c;
            let var = if cnt[b] > 1 { (sq[b] - c * mean * mean).max(0.0) / (c - 1.0) } else { 0.0 };
            centers.push((b as f64 + 0.5) / nb as f64);
            means.push(mean);
            ses.push((var / c).sqrt());
            counts.push(cnt[b]);
        }
        if centers.len() >= 2 {
            mte_cells.push(GridCell {
                x: xp.clone(),
                curve: Grid::new(centers.clone(), means.clone())?,
                identified: vec![[0.0, 1.0]],
            });
        }
        all_bins.push(MteBins { x: xp.clone(), centers, means, std_errors: ses, counts });
    }

    let shape = match spec.direction {
        Direction::Increasing => Shape::Decreasing,
        Direction::Decreasing => Shape::Increasing,
    };
    Ok(RoyConstruction {
        data,
        propensity: PropensityFn::Grid { cells: prop_cells },
        mte: MteCurve::new(MteForm::Grid { cells: mte_cells }, shape),
        bins: all_bins,
        u_d,
    })
}

/// Monte-Carlo check that instrument rankings by utility do not depend on
/// `(δ, v)`.
pub fn check_rank_invariance(
    spec: &GeneralizedRoySpec,
    x_dist: &VectorDist,
    w_dist: &VectorDist,
    z_dist: &ScalarDist,
    seed: u64,
) -> Result<()> {
    let mut rng = stream_rng(seed, u64::MAX);
    let draws: Vec<(f64, f64)> =
        (0..RANK_DRAWS).map(|_| (spec.delta_dist.sample(&mut rng), spec.v_dist.sample(&mut rng))).collect();
    let mut x = Vec::new();
    let mut w1 = Vec::new();
    let mut w2 = Vec::new();
    for _ in 0..RANK_PAIRS {
        x.clear();
        w1.clear();
        w2.clear();
        x_dist.sample_into(&mut rng, &mut x);
        w_dist.sample_into(&mut rng, &mut w1);
        w_dist.sample_into(&mut rng, &mut w2);
        let z1 = z_dist.sample(&mut rng);
        let z2 = z_dist.sample(&mut rng) + if rng.random::<bool>() { 0.0 } else { 1e-3 };
        let diffs: Vec<f64> = draws
            .par_iter()
            .map(|&(d, v)| (spec.phi)(&x, &w1, z1, d, v) - (spec.phi)(&x, &w2, z2, d, v))
            .collect();
        let scale = diffs.iter().fold(1e-300f64, |s, v| s.max(v.abs()));
        let pos = diffs.iter().any(|&v| v > 1e-9 * scale);
        let neg = diffs.iter().any(|&v| v < -1e-9 * scale);
        if pos && neg {
            return Err(Error::Assumption(
                "rank invariance fails: utility ordering of instrument values depends on (delta, v)".into(),
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normal(mean: f64, sd: f64) -> ScalarDist {
        ScalarDist::Normal { mean, sd }
    }

    fn uniform_z() -> ScalarDist {
        ScalarDist::Uniform { lo: -2.0, hi: 2.0 }
    }

    #[test]
    fn increasing_in_delta_gives_decreasing_mte() {
        let spec = GeneralizedRoySpec::new(|_, _, z, d, v| z + d - v, normal(1.0, 1.0), normal(0.0, 1.0), Direction::Increasing);
        let r = simulate_generalized_roy(&spec, 20_000, &VectorDist::empty(), &VectorDist::empty(), &uniform_z(), 3, Some(10))
            .unwrap();
        let b = &r.bins[0];
        assert!(b.means.first().unwrap() > b.means.last().unwrap());
        assert_eq!(r.mte.shape, Shape::Decreasing);
        // mid-rank U_D is exactly uniform on its grid
        let mut u = r.u_d.clone();
        u.sort_by(f64::total_cmp);
        assert!((u[0] - 0.5 / 20_000.0).abs() < 1e-15);
    }

    #[test]
    fn decreasing_in_delta_gives_increasing_mte() {
        let spec = GeneralizedRoySpec::new(|_, _, z, d, _| z - d, normal(0.0, 1.0), normal(0.0, 1.0), Direction::Decreasing);
        let r = simulate_generalized_roy(&spec, 20_000, &VectorDist::empty(), &VectorDist::empty(), &uniform_z(), 4, Some(10))
            .unwrap();
        let b = &r.bins[0];
        assert!(b.means.first().unwrap() < b.means.last().unwrap());
    }

    #[test]
    fn no_selection_on_gains_is_flat() {
        let spec = GeneralizedRoySpec::new(|_, _, z, _, v| z - v, normal(2.0, 1.0), normal(0.0, 1.0), Direction::Increasing);
        let r = simulate_generalized_roy(&spec, 20_000, &VectorDist::empty(), &VectorDist::empty(), &uniform_z(), 5, Some(5))
            .unwrap();
        for (m, se) in r.bins[0].means.iter().zip(&r.bins[0].std_errors) {
            assert!((m - 2.0).abs() < 4.0 * se, "{m}");
        }
    }

    #[test]
    fn rank_invariance_violation_detected() {
        // the instrument's effect flips sign with v
        let spec = GeneralizedRoySpec::new(|_, _, z, d, v| z * v + d, normal(0.0, 1.0), normal(0.0, 1.0), Direction::Increasing);
        let err = check_rank_invariance(&spec, &VectorDist::empty(), &VectorDist::empty(), &uniform_z(), 1);
        assert!(matches!(err, Err(Error::Assumption(_))));
    }

    #[test]
    fn propensity_matches_takeup() {
        let spec = GeneralizedRoySpec::new(|_, w, z, d, v| z + w[0] + d - v, normal(0.0, 1.0), normal(0.0, 1.0), Direction::Increasing);
        let w = VectorDist::Independent { components: vec![ScalarDist::Bernoulli { p: 0.5 }] };
        let r = simulate_generalized_roy(&spec, 40_000, &VectorDist::empty(), &w, &uniform_z(), 6, None).unwrap();
        // true take-up: P(δ − v ≥ −z − w) = Φ((z + w)/√2)
        let g = r.propensity.at(&[], &[1.0]).unwrap();
        let want = crate::numerics::norm_cdf(1.0 / 2f64.sqrt());
        assert!((g.value(0.0) - want).abs() < 0.02);
    }
}
