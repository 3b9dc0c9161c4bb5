//! Limited-memory BFGS approximation of the Hessian in compact form.
//!
//! With `S = [s_0 … s_{m−1}]`, `Y = [y_0 … y_{m−1}]`, `D = diag(s_iᵀy_i)` and `L` the strictly
//! lower triangle of `SᵀY`,
//!
//! ```text
//! B = θI − [θS  Y] · M⁻¹ · [θS  Y]ᵀ,    M = | θSᵀS   L |
//!                                          | Lᵀ    −D |
//! ```
//!
//! `B` is applied directly (not its inverse) because the proximal Newton subproblem consumes
//! Hessian-vector products.

use std::collections::VecDeque;

use log::debug;

use crate::fidelity::CurvatureOperator;
use crate::linalg;
use crate::Real;

/// Default number of stored curvature pairs.
pub const DEFAULT_MEMORY: usize = 50;
/// Pairs with `sᵀy ≤ ε‖s‖‖y‖` are rejected.
pub const CURVATURE_EPS: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct LbfgsState<T> {
    dim: usize,
    capacity: usize,
    pairs: VecDeque<(Vec<T>, Vec<T>)>,
    theta: T,
    /// Factored middle matrix, rebuilt whenever the memory changes.
    middle: Vec<T>,
}

impl<T: Real> LbfgsState<T> {
    pub fn new(dim: usize, capacity: usize) -> Self {
        Self::with_initial_scale(dim, capacity, T::one())
    }

    /// Empty memory whose base matrix is `theta0·I`.
    pub fn with_initial_scale(dim: usize, capacity: usize, theta0: T) -> Self {
        Self {
            dim,
            capacity: capacity.max(1),
            pairs: VecDeque::new(),
            theta: theta0,
            middle: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&[T], &[T])> {
        self.pairs.iter().map(|(s, y)| (s.as_slice(), y.as_slice()))
    }

    /// Adds `(s, y)` if it passes the curvature guard; returns whether it was accepted.
    pub fn update(&mut self, s: &[T], y: &[T]) -> bool {
        assert_eq!(s.len(), self.dim, "step has wrong dimension");
        assert_eq!(y.len(), self.dim, "gradient change has wrong dimension");
        let sy = linalg::dot(s, y);
        let bound = T::lit(CURVATURE_EPS) * linalg::norm(s) * linalg::norm(y);
        if !(sy > bound) {
            debug!("rejecting curvature pair: sᵀy = {sy}, bound {bound}");
            return false;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.theta = linalg::dot(y, y) / sy;
        self.pairs.push_back((s.to_vec(), y.to_vec()));
        self.rebuild();
        true
    }

    /// Value-style update: returns the updated state.
    pub fn updated(mut self, s: &[T], y: &[T]) -> Self {
        self.update(s, y);
        self
    }

    fn rebuild(&mut self) {
        let m = self.pairs.len();
        let k = 2 * m;
        let mut mat = vec![T::zero(); k * k];
        for i in 0..m {
            for j in 0..m {
                let (si, yi) = &self.pairs[i];
                let (sj, yj) = &self.pairs[j];
                mat[i * k + j] = self.theta * linalg::dot(si, sj);
                if i > j {
                    let l = linalg::dot(si, yj);
                    mat[i * k + m + j] = l;
                    mat[(m + j) * k + i] = l;
                }
                if i == j {
                    mat[(m + i) * k + m + i] = -linalg::dot(si, yi);
                }
            }
        }
        // Store M⁻¹ explicitly; it is tiny (2m × 2m).
        let mut inv = vec![T::zero(); k * k];
        for col in 0..k {
            let mut e = vec![T::zero(); k];
            e[col] = T::one();
            let x = linalg::solve_dense(&mat, &e).unwrap_or_else(|| vec![T::zero(); k]);
            for row in 0..k {
                inv[row * k + col] = x[row];
            }
        }
        self.middle = inv;
    }
}

impl<T: Real> CurvatureOperator<T> for LbfgsState<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply_into(&self, v: &[T], out: &mut [T]) {
        for (o, &x) in out.iter_mut().zip(v) {
            *o = self.theta * x;
        }
        let m = self.pairs.len();
        if m == 0 {
            return;
        }
        let k = 2 * m;
        let mut wv = vec![T::zero(); k];
        for (i, (s, y)) in self.pairs.iter().enumerate() {
            wv[i] = self.theta * linalg::dot(s, v);
            wv[m + i] = linalg::dot(y, v);
        }
        let mut coef = vec![T::zero(); k];
        for (r, c) in coef.iter_mut().enumerate() {
            *c = linalg::dot(&self.middle[r * k..(r + 1) * k], &wv);
        }
        for (i, (s, y)) in self.pairs.iter().enumerate() {
            linalg::axpy(-coef[i] * self.theta, s, out);
            linalg::axpy(-coef[m + i], y, out);
        }
    }
}

/// `B·v` for the given memory.
pub fn lbfgs_apply<T: Real>(state: &LbfgsState<T>, v: &[T]) -> Vec<T> {
    state.apply(v)
}

/// Returns `state` with `(s, y)` appended when it passes the curvature guard.
pub fn lbfgs_update<T: Real>(state: LbfgsState<T>, s: &[T], y: &[T]) -> LbfgsState<T> {
    state.updated(s, y)
}
