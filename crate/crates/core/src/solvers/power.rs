use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fidelity::CurvatureOperator;
use crate::linalg;
use crate::Real;

/// Power-method estimate of the largest eigenvalue of a symmetric positive semidefinite
/// operator, from a fixed positive start vector. Returns `(estimate, applies used)`.
pub fn largest_eigenvalue<T: Real>(
    op: &dyn CurvatureOperator<T>,
    max_iter: usize,
    rel_tol: f64,
) -> (T, usize) {
    let n = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v: Vec<T> = (0..n).map(|_| T::lit(0.5 + rng.gen::<f64>())).collect();
    let nv = linalg::norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut est = T::zero();
    let mut hv = vec![T::zero(); n];
    let mut used = 0;
    for _ in 0..max_iter.max(1) {
        op.apply_into(&v, &mut hv);
        used += 1;
        let rayleigh = linalg::dot(&v, &hv);
        let nh = linalg::norm(&hv);
        if !(nh > T::zero()) {
            return (T::zero(), used);
        }
        let done = est > T::zero() && (rayleigh - est).abs() <= T::lit(rel_tol) * rayleigh.abs();
        est = rayleigh;
        if done {
            break;
        }
        for (vi, &hi) in v.iter_mut().zip(&hv) {
            *vi = hi / nh;
        }
    }
    (est, used)
}
