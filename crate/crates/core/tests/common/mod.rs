#![allow(dead_code)]

use pnct_core::harness::{ExperimentConfig, ProblemInstance};
use pnct_core::linalg;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn instance(size: usize, angles: usize, rays: usize, seed: u64) -> ProblemInstance {
    let cfg = ExperimentConfig {
        size,
        angles,
        rays,
        seed,
        ..ExperimentConfig::default()
    };
    ProblemInstance::build(&cfg).unwrap()
}

pub fn uniform(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Central differences of a scalar function, one coordinate at a time.
pub fn central_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            xp[i] = x[i] + h;
            let fp = f(&xp);
            xp[i] = x[i] - h;
            let fm = f(&xp);
            xp[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Central difference of a vector function along `v`.
pub fn central_directional(
    f: impl Fn(&[f64]) -> Vec<f64>,
    x: &[f64],
    v: &[f64],
    h: f64,
) -> Vec<f64> {
    let xp: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + h * b).collect();
    let xm: Vec<f64> = x.iter().zip(v).map(|(a, b)| a - h * b).collect();
    let (gp, gm) = (f(&xp), f(&xm));
    gp.iter()
        .zip(&gm)
        .map(|(a, b)| (a - b) / (2.0 * h))
        .collect()
}

pub fn relative_error(a: &[f64], reference: &[f64]) -> f64 {
    linalg::dist(a, reference) / linalg::norm(reference)
}

/// `Aᵀ·diag(w)·A·v` from a dense row-major `A` (`m × n`), summed in a different order from
/// the sparse operator.
pub fn dense_weighted_normal(a: &[f64], m: usize, n: usize, w: &[f64], v: &[f64]) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for r in 0..m {
        let row = &a[r * n..(r + 1) * n];
        for i in 0..n {
            if row[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                h[i * n + j] += row[i] * w[r] * row[j];
            }
        }
    }
    (0..n)
        .map(|i| (0..n).map(|j| h[i * n + j] * v[j]).sum())
        .collect()
}
