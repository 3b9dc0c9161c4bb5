//! Composite-problem solvers: FISTA and the proximal Newton method.

mod fista;
mod pn;
mod power;
mod trace;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fidelity::{CurvatureOperator, DenseCurvature, FidelityOracle, OracleCounts};
use crate::lbfgs::DEFAULT_MEMORY;
use crate::linalg;
use crate::regularizer::{ProxConfig, TotalVariation};
use crate::Real;

pub use fista::fista;
pub use pn::{
    forcing_term, line_search, model_gradient, pn_solve, prox_gradient_residual, solve_subproblem,
    AdaptiveStop, InnerStop, LineSearchOutcome, SubproblemOutcome,
};
pub use power::largest_eigenvalue;
pub use trace::{ConvergenceTrace, SolverStatus, TraceRow, TRACE_CSV_HEADER};

/// Smooth part `l` of a composite objective.
pub trait SmoothTerm<T: Real> {
    fn dim(&self) -> usize;
    fn value(&self, x: &[T]) -> T;
    fn value_and_gradient(&self, x: &[T]) -> (T, Vec<T>);
    /// Exact Hessian operator at `x`.
    fn hessian_at(&self, x: &[T]) -> Box<dyn CurvatureOperator<T> + '_>;
    fn counts(&self) -> OracleCounts;
}

/// Non-smooth part `h` with its proximal map `argmin_u ½‖u − z‖² + scale·h(u)`.
pub trait NonSmoothTerm<T: Real> {
    fn value(&self, x: &[T]) -> T;
    fn prox(&self, z: &[T], scale: T) -> Vec<T>;
}

impl<T: Real> SmoothTerm<T> for FidelityOracle<T> {
    fn dim(&self) -> usize {
        FidelityOracle::dim(self)
    }

    fn value(&self, x: &[T]) -> T {
        FidelityOracle::value(self, x)
    }

    fn value_and_gradient(&self, x: &[T]) -> (T, Vec<T>) {
        FidelityOracle::value_and_gradient(self, x)
    }

    fn hessian_at(&self, x: &[T]) -> Box<dyn CurvatureOperator<T> + '_> {
        Box::new(self.curvature_at(x))
    }

    fn counts(&self) -> OracleCounts {
        FidelityOracle::counts(self)
    }
}

impl<T: Real> NonSmoothTerm<T> for TotalVariation<T> {
    fn value(&self, x: &[T]) -> T {
        TotalVariation::value(self, x)
    }

    fn prox(&self, z: &[T], scale: T) -> Vec<T> {
        TotalVariation::prox(self, z, scale).expect("prox input matches the image shape")
    }
}

/// `h ≡ 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroTerm;

impl<T: Real> NonSmoothTerm<T> for ZeroTerm {
    fn value(&self, _x: &[T]) -> T {
        T::zero()
    }

    fn prox(&self, z: &[T], _scale: T) -> Vec<T> {
        z.to_vec()
    }
}

/// `h(x) = λ‖x‖₁`.
#[derive(Debug, Clone, Copy)]
pub struct L1Norm<T> {
    pub lambda: T,
}

impl<T: Real> NonSmoothTerm<T> for L1Norm<T> {
    fn value(&self, x: &[T]) -> T {
        self.lambda * x.iter().map(|v| v.abs()).sum::<T>()
    }

    fn prox(&self, z: &[T], scale: T) -> Vec<T> {
        let thr = scale * self.lambda;
        z.iter()
            .map(|&v| v.signum() * (v.abs() - thr).max(T::zero()))
            .collect()
    }
}

/// `l(x) = ½(x − c)ᵀQ(x − c)` with a dense symmetric `Q`; a reference smooth term.
#[derive(Debug)]
pub struct QuadraticTerm<T> {
    pub q: DenseCurvature<T>,
    pub center: Vec<T>,
    values: AtomicUsize,
    gradients: AtomicUsize,
    hessians: Arc<AtomicUsize>,
}

impl<T: Real> QuadraticTerm<T> {
    pub fn new(q: Vec<T>, center: Vec<T>) -> Self {
        let dim = center.len();
        assert_eq!(q.len(), dim * dim);
        Self {
            q: DenseCurvature { dim, matrix: q },
            center,
            values: AtomicUsize::new(0),
            gradients: AtomicUsize::new(0),
            hessians: Arc::new(AtomicUsize::new(0)),
        }
    }

    /// `½‖x − c‖²`.
    pub fn isotropic(center: Vec<T>) -> Self {
        let n = center.len();
        let mut q = vec![T::zero(); n * n];
        for i in 0..n {
            q[i * n + i] = T::one();
        }
        Self::new(q, center)
    }
}

struct CountingCurvature<'a, T> {
    inner: &'a DenseCurvature<T>,
    counter: Arc<AtomicUsize>,
}

impl<T: Real> CurvatureOperator<T> for CountingCurvature<'_, T> {
    fn dim(&self) -> usize {
        self.inner.dim
    }

    fn apply_into(&self, v: &[T], out: &mut [T]) {
        self.counter.fetch_add(1, Ordering::Relaxed);
        self.inner.apply_into(v, out)
    }
}

impl<T: Real> SmoothTerm<T> for QuadraticTerm<T> {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &[T]) -> T {
        self.values.fetch_add(1, Ordering::Relaxed);
        let r = linalg::sub(x, &self.center);
        T::lit(0.5) * linalg::dot(&r, &self.q.apply(&r))
    }

    fn value_and_gradient(&self, x: &[T]) -> (T, Vec<T>) {
        self.values.fetch_add(1, Ordering::Relaxed);
        self.gradients.fetch_add(1, Ordering::Relaxed);
        let r = linalg::sub(x, &self.center);
        let g = self.q.apply(&r);
        (T::lit(0.5) * linalg::dot(&r, &g), g)
    }

    fn hessian_at(&self, _x: &[T]) -> Box<dyn CurvatureOperator<T> + '_> {
        Box::new(CountingCurvature {
            inner: &self.q,
            counter: Arc::clone(&self.hessians),
        })
    }

    fn counts(&self) -> OracleCounts {
        OracleCounts {
            value_evals: self.values.load(Ordering::Relaxed),
            gradient_evals: self.gradients.load(Ordering::Relaxed),
            hessian_applies: self.hessians.load(Ordering::Relaxed),
            ..OracleCounts::default()
        }
    }
}

/// Which curvature model the proximal Newton subproblem uses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum HessianMode {
    #[default]
    Exact,
    Lbfgs {
        memory: usize,
    },
}

impl HessianMode {
    pub fn lbfgs() -> Self {
        Self::Lbfgs {
            memory: DEFAULT_MEMORY,
        }
    }
}

/// `f = l + h` with the curvature model used by proximal Newton.
pub struct CompositeProblem<'a, T: Real> {
    pub smooth: &'a dyn SmoothTerm<T>,
    pub nonsmooth: &'a dyn NonSmoothTerm<T>,
    pub hessian: HessianMode,
}

impl<'a, T: Real> CompositeProblem<'a, T> {
    pub fn new(smooth: &'a dyn SmoothTerm<T>, nonsmooth: &'a dyn NonSmoothTerm<T>) -> Self {
        Self {
            smooth,
            nonsmooth,
            hessian: HessianMode::Exact,
        }
    }

    pub fn with_hessian(mut self, mode: HessianMode) -> Self {
        self.hessian = mode;
        self
    }

    pub fn dim(&self) -> usize {
        self.smooth.dim()
    }

    pub fn objective(&self, x: &[T]) -> T {
        self.smooth.value(x) + self.nonsmooth.value(x)
    }
}

/// Settings of the FISTA baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FistaConfig {
    pub max_iter: usize,
    /// Stop when `‖x_k − x_{k−1}‖/‖x_{k−1}‖` falls to this value.
    pub rel_tol: f64,
    /// Starting estimate of the local smoothness constant.
    pub initial_lipschitz: f64,
    /// Multiply `L` by this factor before each iteration's backtracking (`None` keeps `L`
    /// non-decreasing).
    pub lipschitz_shrink: Option<f64>,
    /// Stop as soon as the objective is at or below this value.
    pub target_objective: Option<f64>,
}

impl Default for FistaConfig {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            rel_tol: 1e-8,
            initial_lipschitz: 1.0,
            lipschitz_shrink: None,
            target_objective: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Outer stop on `|f_k − f_{k−1}|/|f_{k−1}|`.
    pub tol_f: f64,
    /// Outer stop on `‖x_k − x_{k−1}‖/‖x_{k−1}‖`.
    pub tol_x: f64,
    pub max_outer: usize,
    /// Subproblem stop on relative change of the inner iterate.
    pub inner_rel_tol: f64,
    pub max_inner: usize,
    /// Inexact-Newton stop of the subproblem driven by the forcing term.
    pub adaptive_stop: bool,
    /// Sufficient-decrease constant `a ∈ (0, 0.5]`.
    pub ls_alpha: f64,
    pub ls_shrink: f64,
    pub ls_min_step: f64,
    pub power_iters: usize,
    pub power_rel_tol: f64,
    pub lipschitz_safety: f64,
    /// Prox scale inside the prox-gradient residual and the forcing term.
    pub residual_prox_scale: f64,
    /// Keep per-inner-iteration surrogate values in the trace.
    pub record_inner: bool,
    pub prox: ProxConfig,
    pub fista: FistaConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_f: 1e-4,
            tol_x: 1e-5,
            max_outer: 500,
            inner_rel_tol: 1e-8,
            max_inner: 500,
            adaptive_stop: true,
            ls_alpha: 0.5,
            ls_shrink: 0.7,
            ls_min_step: 1e-8,
            power_iters: 20,
            power_rel_tol: 1e-2,
            lipschitz_safety: 1.05,
            residual_prox_scale: 1.0,
            record_inner: false,
            prox: ProxConfig::default(),
            fista: FistaConfig::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tol_f", self.tol_f),
            ("tol_x", self.tol_x),
            ("inner_rel_tol", self.inner_rel_tol),
            ("ls_min_step", self.ls_min_step),
            ("power_rel_tol", self.power_rel_tol),
            ("lipschitz_safety", self.lipschitz_safety),
            ("residual_prox_scale", self.residual_prox_scale),
            ("fista.rel_tol", self.fista.rel_tol),
            ("fista.initial_lipschitz", self.fista.initial_lipschitz),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be > 0, got {v}"
                )));
            }
        }
        if !(self.ls_alpha > 0.0 && self.ls_alpha <= 0.5) {
            return Err(Error::InvalidParameter(format!(
                "line-search constant must lie in (0, 0.5], got {}",
                self.ls_alpha
            )));
        }
        if !(self.ls_shrink > 0.0 && self.ls_shrink < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "line-search shrink must lie in (0, 1), got {}",
                self.ls_shrink
            )));
        }
        if let Some(s) = self.fista.lipschitz_shrink {
            if !(s > 0.0 && s <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "FISTA Lipschitz shrink must lie in (0, 1], got {s}"
                )));
            }
        }
        if self.max_outer == 0 || self.max_inner == 0 || self.fista.max_iter == 0 {
            return Err(Error::InvalidParameter(
                "iteration limits must be >= 1".into(),
            ));
        }
        self.prox.validate()
    }
}
