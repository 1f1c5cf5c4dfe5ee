use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::dataset::Dataset;
use super::params::{affine, ScalarDist, SelectionParams, VectorDist};
use crate::error::{Error, Result};

/// Records per random stream.
pub const CHUNK: usize = 1 << 15;

/// Generator for stream `stream` of the seed; streams never overlap.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs `f(rng, len)` over consecutive chunks of `n` draws in parallel and
/// returns the per-chunk results in chunk order.
pub fn par_chunks<T, F>(n: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> T + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(n - c * CHUNK);
            let mut rng = stream_rng(seed, c as u64);
            f(&mut rng, len)
        })
        .collect()
}

/// Correlated shocks `(U1, U0, ε)` from the lower Cholesky factor.
pub fn draw_shocks<R: rand::Rng + ?Sized>(l: &[[f64; 3]; 3], rng: &mut R) -> [f64; 3] {
    let e: [f64; 3] = [StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng)];
    [
        l[0][0] * e[0],
        l[1][0] * e[0] + l[1][1] * e[1],
        l[2][0] * e[0] + l[2][1] * e[1] + l[2][2] * e[2],
    ]
}

/// Draws `n` i.i.d. records from the normal selection model.
pub fn simulate_normal(
    params: &SelectionParams,
    n: usize,
    x_dist: &VectorDist,
    w_dist: &VectorDist,
    z_dist: &ScalarDist,
    seed: u64,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidParams("sample size must be at least 1".into()));
    }
    params.validate()?;
    x_dist.validate()?;
    w_dist.validate()?;
    z_dist.validate()?;
    if x_dist.dim() != params.x_dim() {
        return Err(Error::InvalidParams(format!(
            "covariate distribution has dimension {}, parameters expect {}",
            x_dist.dim(),
            params.x_dim()
        )));
    }
    let l = params.shock_factor()?;
    let (xd, wd) = (x_dist.dim(), w_dist.dim());
    let parts = par_chunks(n, seed, |rng, len| {
        let mut out = Dataset::with_dims(xd, wd);
        let mut x = Vec::with_capacity(xd);
        let mut w = Vec::with_capacity(wd);
        for _ in 0..len {
            x.clear();
            w.clear();
            x_dist.sample_into(rng, &mut x);
            w_dist.sample_into(rng, &mut w);
            let z = z_dist.sample(rng);
            let [u1, u0, eps] = draw_shocks(&l, rng);
            let d = u8::from(params.choice_index(&x) + params.gamma * z + eps >= 0.0);
            let y = if d == 1 { affine(&params.beta1, &x) + u1 } else { affine(&params.beta0, &x) + u0 };
            out.y.push(y);
            out.d.push(d);
            out.x.extend_from_slice(&x);
            out.w.extend_from_slice(&w);
            out.z.push(z);
        }
        out
    });
    let mut data = Dataset::with_dims(xd, wd);
    for p in parts {
        data.append(p);
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn medical_cells() -> VectorDist {
        VectorDist::Cells { points: vec![vec![0.0], vec![1.0]], weights: vec![0.5, 0.5] }
    }

    #[test]
    fn deterministic_given_seed() {
        let p = SelectionParams::benchmark();
        let z = ScalarDist::Uniform { lo: 0.0, hi: 900.0 };
        let a = simulate_normal(&p, 70_000, &medical_cells(), &VectorDist::empty(), &z, 5).unwrap();
        let b = simulate_normal(&p, 70_000, &medical_cells(), &VectorDist::empty(), &z, 5).unwrap();
        let c = simulate_normal(&p, 70_000, &medical_cells(), &VectorDist::empty(), &z, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.y, c.y);
    }

    #[test]
    fn large_gamma_gives_full_takeup() {
        let mut p = SelectionParams::benchmark();
        p.gamma = 1e6;
        let z = ScalarDist::Uniform { lo: 1.0, hi: 2.0 };
        let d = simulate_normal(&p, 10_000, &medical_cells(), &VectorDist::empty(), &z, 1).unwrap();
        assert!(d.d.iter().all(|&v| v == 1));
    }

    #[test]
    fn takeup_near_top_subsidy_matches_plugin() {
        let p = SelectionParams::benchmark();
        let x = VectorDist::Cells { points: vec![vec![1.0]], weights: vec![1.0] };
        let z = ScalarDist::Constant { value: 900.0 };
        let d = simulate_normal(&p, 200_000, &x, &VectorDist::empty(), &z, 2).unwrap();
        let share = d.d.iter().map(|&v| f64::from(v)).sum::<f64>() / d.len() as f64;
        let want = 0.813_428_100_391_819_25;
        let se = (want * (1.0 - want) / d.len() as f64).sqrt();
        assert!((share - want).abs() < 4.0 * se, "{share}");
    }

    #[test]
    fn zero_size_rejected() {
        let p = SelectionParams::benchmark();
        let z = ScalarDist::Constant { value: 0.0 };
        assert!(simulate_normal(&p, 0, &medical_cells(), &VectorDist::empty(), &z, 0).is_err());
    }
}
