//! Proximal Newton: quadratic model of `l` plus exact `h`, minimized inexactly by FISTA,
//! followed by a backtracking line search on the composite objective.

use std::time::Instant;

use log::{debug, warn};

use super::{
    largest_eigenvalue, CompositeProblem, ConvergenceTrace, HessianMode, NonSmoothTerm,
    SolverConfig, SolverStatus, TraceRow,
};
use crate::error::{Error, Result};
use crate::fidelity::CurvatureOperator;
use crate::lbfgs::LbfgsState;
use crate::linalg;
use crate::Real;

/// Forcing term used before any model history exists, and its upper cap.
pub const ETA_MAX: f64 = 0.1;

/// Inexact-Newton stop for the subproblem:
/// `‖y − P(y − ∇l̃(y))‖ ≤ eta · residual`.
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveStop<T> {
    pub eta: T,
    pub residual: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerStop {
    RelativeChange,
    Adaptive,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct SubproblemOutcome<T> {
    pub direction: Vec<T>,
    pub iterations: usize,
    pub stop: InnerStop,
    /// Step constant used by the inner FISTA.
    pub lipschitz: T,
    pub power_applies: usize,
    /// `∇lᵀd + ½dᵀHd + h(x + d) − h(x)` after each inner iteration, when recorded.
    pub model_decrease: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchOutcome<T> {
    pub step: T,
    pub objective: T,
    pub evaluations: usize,
}

/// `‖x − P(x − grad)‖` with `P` the prox of `h` at the given scale.
pub fn prox_gradient_residual<T: Real>(
    x: &[T],
    grad: &[T],
    nonsmooth: &dyn NonSmoothTerm<T>,
    scale: T,
) -> T {
    let z = linalg::sub(x, grad);
    linalg::dist(x, &nonsmooth.prox(&z, scale))
}

/// Gradient of the quadratic model built at `x_k`, evaluated at `y`:
/// `H_k(y − x_k) + ∇l(x_k)`.
pub fn model_gradient<T: Real>(
    curvature: &dyn CurvatureOperator<T>,
    x_k: &[T],
    grad_k: &[T],
    y: &[T],
) -> Vec<T> {
    let step = linalg::sub(y, x_k);
    let mut out = curvature.apply(&step);
    linalg::axpy(T::one(), grad_k, &mut out);
    out
}

/// `η_k = min{0.1, ‖P(x_k − ∇l(x_k)) − P(x_k − ∇l̃_{k−1}(x_k))‖ / r_{k−1}}` where
/// `r_{k−1} = ‖x_{k−1} − P(x_{k−1} − ∇l(x_{k−1}))‖`.
///
/// `None` for the previous residual means there is no history yet (first outer iteration).
/// A vanishing denominator, or a ratio that is not strictly positive and finite, yields 0.1.
pub fn forcing_term<T: Real>(
    prox_true_gradient: &[T],
    prox_model_gradient: &[T],
    previous_residual: Option<T>,
) -> T {
    let cap = T::lit(ETA_MAX);
    let Some(den) = previous_residual else {
        return cap;
    };
    if !(den >= T::lit(1e-15)) {
        return cap;
    }
    let ratio = linalg::dist(prox_true_gradient, prox_model_gradient) / den;
    if ratio > T::zero() && ratio.is_finite() {
        ratio.min(cap)
    } else {
        cap
    }
}

/// Backtracks `t ∈ {1, ρ, ρ², …}` until
/// `f(x + t·d) ≤ f(x) + a·t·Δ` with `Δ = ∇l(x)ᵀd + h(x + d) − h(x)`.
///
/// `objective_at(t)` evaluates `f(x + t·d)`. Fails when `Δ ≥ 0` or `t` drops below the floor.
pub fn line_search<T: Real>(
    mut objective_at: impl FnMut(T) -> T,
    f_x: T,
    delta: T,
    cfg: &SolverConfig,
) -> std::result::Result<LineSearchOutcome<T>, LineSearchOutcome<T>> {
    let a = T::lit(cfg.ls_alpha);
    let rho = T::lit(cfg.ls_shrink);
    let floor = T::lit(cfg.ls_min_step);
    let mut t = T::one();
    let mut evaluations = 0;
    if !(delta < T::zero()) {
        return Err(LineSearchOutcome {
            step: T::zero(),
            objective: f_x,
            evaluations,
        });
    }
    while t >= floor {
        let f = objective_at(t);
        evaluations += 1;
        if f <= f_x + a * t * delta {
            return Ok(LineSearchOutcome {
                step: t,
                objective: f,
                evaluations,
            });
        }
        t *= rho;
    }
    Err(LineSearchOutcome {
        step: t,
        objective: f_x,
        evaluations,
    })
}

/// Minimizes `∇l(x_k)ᵀd + ½dᵀHd + h(x_k + d)` over `d` with FISTA on `y = x_k + d`.
///
/// The step is `1/L̂`, with `L̂` a power-method estimate of `λ_max(H)` times a safety factor.
/// Only `H` and the prox of `h` are used; the data term itself is never evaluated.
pub fn solve_subproblem<T: Real>(
    grad: &[T],
    curvature: &dyn CurvatureOperator<T>,
    x_k: &[T],
    nonsmooth: &dyn NonSmoothTerm<T>,
    cfg: &SolverConfig,
    adaptive: Option<AdaptiveStop<T>>,
) -> SubproblemOutcome<T> {
    let n = x_k.len();
    let (est, power_applies) = largest_eigenvalue(curvature, cfg.power_iters, cfg.power_rel_tol);
    let lipschitz = if est > T::zero() && est.is_finite() {
        est * T::lit(cfg.lipschitz_safety)
    } else {
        warn!("non-positive curvature estimate {est}; using unit step");
        T::one()
    };
    let step = T::one() / lipschitz;
    let res_scale = T::lit(cfg.residual_prox_scale);
    let h_k = if cfg.record_inner {
        nonsmooth.value(x_k)
    } else {
        T::zero()
    };

    let mut d = vec![T::zero(); n];
    let mut hd = vec![T::zero(); n];
    // extrapolated point and its curvature image, kept by linearity
    let mut z = vec![T::zero(); n];
    let mut hz = vec![T::zero(); n];
    let mut t = T::one();
    let mut y_trial = vec![T::zero(); n];
    let mut model_decrease = Vec::new();
    let mut stop = InnerStop::MaxIterations;
    let mut iterations = 0;

    for _ in 0..cfg.max_inner {
        iterations += 1;
        for i in 0..n {
            y_trial[i] = x_k[i] + z[i] - step * (grad[i] + hz[i]);
        }
        let y_new = nonsmooth.prox(&y_trial, step);
        let d_new = linalg::sub(&y_new, x_k);
        let hd_new = curvature.apply(&d_new);

        let t_next = (T::one() + (T::one() + T::lit(4.0) * t * t).sqrt()) / T::lit(2.0);
        let beta = (t - T::one()) / t_next;
        t = t_next;
        for i in 0..n {
            z[i] = d_new[i] + beta * (d_new[i] - d[i]);
            hz[i] = hd_new[i] + beta * (hd_new[i] - hd[i]);
        }

        let moved = linalg::dist(&d_new, &d);
        let y_prev_norm = x_k
            .iter()
            .zip(&d)
            .fold(T::zero(), |acc, (&a, &b)| acc + (a + b) * (a + b))
            .sqrt();
        d = d_new;
        hd = hd_new;

        if cfg.record_inner {
            let q = linalg::dot(grad, &d) + T::lit(0.5) * linalg::dot(&d, &hd);
            model_decrease.push((q + nonsmooth.value(&y_new) - h_k).as_f64());
        }
        if let Some(ad) = adaptive {
            let model_grad = linalg::add(grad, &hd);
            let r = prox_gradient_residual(&y_new, &model_grad, nonsmooth, res_scale);
            if r <= ad.eta * ad.residual {
                stop = InnerStop::Adaptive;
                break;
            }
        }
        let rel = if y_prev_norm > T::zero() {
            moved / y_prev_norm
        } else {
            moved
        };
        if rel <= T::lit(cfg.inner_rel_tol) {
            stop = InnerStop::RelativeChange;
            break;
        }
    }
    SubproblemOutcome {
        direction: d,
        iterations,
        stop,
        lipschitz,
        power_applies,
        model_decrease,
    }
}

/// Curvature model of the current outer iteration.
enum Model<'a, T: Real> {
    Exact(Box<dyn CurvatureOperator<T> + 'a>),
    Lbfgs(LbfgsState<T>),
}

impl<'a, T: Real> Model<'a, T> {
    fn op(&self) -> &dyn CurvatureOperator<T> {
        match self {
            Model::Exact(b) => b.as_ref(),
            Model::Lbfgs(s) => s,
        }
    }
}

/// Outer-iteration state retained for the forcing term.
struct Previous<'a, T: Real> {
    x: Vec<T>,
    grad: Vec<T>,
    model: Model<'a, T>,
    residual: T,
}

/// Proximal Newton method (exact Hessian or L-BFGS model) from `x0`.
pub fn pn_solve<T: Real>(
    problem: &CompositeProblem<'_, T>,
    x0: &[T],
    cfg: &SolverConfig,
) -> Result<(Vec<T>, ConvergenceTrace)> {
    cfg.validate()?;
    let start = Instant::now();
    let smooth = problem.smooth;
    let nonsmooth = problem.nonsmooth;
    let res_scale = T::lit(cfg.residual_prox_scale);
    let mut trace = ConvergenceTrace::new(match problem.hessian {
        HessianMode::Exact => "pn-exact",
        HessianMode::Lbfgs { .. } => "pn-lbfgs",
    });

    let mut x = x0.to_vec();
    let (l, mut grad) = smooth.value_and_gradient(&x);
    let mut h = nonsmooth.value(&x);
    let mut f = l + h;
    if !f.is_finite() {
        return Err(Error::NonFinite { iteration: 0 });
    }

    let mut lbfgs = match problem.hessian {
        HessianMode::Exact => None,
        HessianMode::Lbfgs { memory } => Some(seed_lbfgs(problem, &x, &grad, memory)),
    };

    let counts = smooth.counts();
    trace.rows.push(TraceRow {
        iter: 0,
        f: f.as_f64(),
        l: l.as_f64(),
        h: h.as_f64(),
        step: 0.0,
        inner_iters: 0,
        eta: 0.0,
        residual: prox_gradient_residual(&x, &grad, nonsmooth, res_scale).as_f64(),
        grad_evals: counts.gradient_evals,
        hess_applies: counts.hessian_applies,
        seconds: start.elapsed().as_secs_f64(),
    });

    let mut previous: Option<Previous<'_, T>> = None;
    for k in 1..=cfg.max_outer {
        let z = linalg::sub(&x, &grad);
        let prox_true = nonsmooth.prox(&z, res_scale);
        let residual = linalg::dist(&x, &prox_true);
        if residual == T::zero() {
            trace.status = SolverStatus::Stationary;
            break;
        }

        let model = match &lbfgs {
            None => Model::Exact(smooth.hessian_at(&x)),
            Some(state) => Model::Lbfgs(state.clone()),
        };

        let eta = match &previous {
            None => T::lit(ETA_MAX),
            Some(prev) => {
                let mg = model_gradient(prev.model.op(), &prev.x, &prev.grad, &x);
                let prox_model = nonsmooth.prox(&linalg::sub(&x, &mg), res_scale);
                forcing_term(&prox_true, &prox_model, Some(prev.residual))
            }
        };

        let adaptive = cfg.adaptive_stop.then_some(AdaptiveStop { eta, residual });
        let sub = solve_subproblem(&grad, model.op(), &x, nonsmooth, cfg, adaptive);
        if cfg.record_inner {
            trace.inner_objectives.push(sub.model_decrease.clone());
        }
        let d = sub.direction;

        let x_full = linalg::add(&x, &d);
        let delta = linalg::dot(&grad, &d) + nonsmooth.value(&x_full) - h;
        if !(delta < T::zero()) {
            // No predicted decrease left: the model minimizer is the current point up to
            // the subproblem accuracy.
            let negligible = delta.abs() <= T::lit(1e3) * T::epsilon() * f.abs().max(T::one());
            trace.status = if negligible {
                SolverStatus::Stationary
            } else {
                SolverStatus::LineSearchFailed
            };
            debug!("pn: non-descent direction at outer {k}: delta = {delta}");
            break;
        }
        let ls = line_search(
            |t| {
                let trial: Vec<T> = x.iter().zip(&d).map(|(&xi, &di)| xi + t * di).collect();
                smooth.value(&trial) + nonsmooth.value(&trial)
            },
            f,
            delta,
            cfg,
        );
        let step = match ls {
            Ok(o) => o.step,
            Err(o) => {
                warn!(
                    "pn: line search failed at outer {k} after {} evaluations",
                    o.evaluations
                );
                trace.status = SolverStatus::LineSearchFailed;
                break;
            }
        };

        let x_new: Vec<T> = x.iter().zip(&d).map(|(&xi, &di)| xi + step * di).collect();
        let (l_new, grad_new) = smooth.value_and_gradient(&x_new);
        let h_new = nonsmooth.value(&x_new);
        let f_new = l_new + h_new;
        if !f_new.is_finite() {
            return Err(Error::NonFinite { iteration: k });
        }

        let counts = smooth.counts();
        let lbfgs_applies = match &model {
            Model::Lbfgs(_) => sub.iterations + sub.power_applies,
            Model::Exact(_) => 0,
        };
        trace.rows.push(TraceRow {
            iter: k,
            f: f_new.as_f64(),
            l: l_new.as_f64(),
            h: h_new.as_f64(),
            step: step.as_f64(),
            inner_iters: sub.iterations,
            eta: eta.as_f64(),
            residual: residual.as_f64(),
            grad_evals: counts.gradient_evals,
            hess_applies: counts.hessian_applies + lbfgs_applies,
            seconds: start.elapsed().as_secs_f64(),
        });
        debug!(
            "pn outer {k}: f = {:e}, t = {}, inner = {} ({:?}), eta = {:.3e}",
            f_new.as_f64(),
            step,
            sub.iterations,
            sub.stop,
            eta.as_f64()
        );

        if let Some(state) = lbfgs.as_mut() {
            let s = linalg::sub(&x_new, &x);
            let yv = linalg::sub(&grad_new, &grad);
            state.update(&s, &yv);
        }

        let rel_f = ((f_new - f) / f).abs();
        let rel_x = linalg::relative_change(&x_new, &x);
        let x_old = std::mem::replace(&mut x, x_new);
        let grad_old = std::mem::replace(&mut grad, grad_new);
        previous = Some(Previous {
            x: x_old,
            grad: grad_old,
            model,
            residual,
        });
        h = h_new;
        f = f_new;

        if rel_f <= T::lit(cfg.tol_f) {
            trace.status = SolverStatus::ConvergedObjective;
            break;
        }
        if rel_x <= T::lit(cfg.tol_x) {
            trace.status = SolverStatus::ConvergedStep;
            break;
        }
    }
    if trace.status == SolverStatus::Running {
        trace.status = SolverStatus::MaxIterations;
    }
    Ok((x, trace))
}

/// Seeds an empty L-BFGS memory with one curvature pair from a short probe along the
/// negative gradient, so the first model has the scale of the true curvature.
fn seed_lbfgs<T: Real>(
    problem: &CompositeProblem<'_, T>,
    x: &[T],
    grad: &[T],
    memory: usize,
) -> LbfgsState<T> {
    let n = x.len();
    let mut state = LbfgsState::new(n, memory);
    let gnorm = linalg::norm(grad);
    if !(gnorm > T::zero()) {
        return state;
    }
    let probe_len = T::lit(1e-3) * linalg::norm(x).max(T::one());
    let s: Vec<T> = grad.iter().map(|&g| -probe_len * g / gnorm).collect();
    let xp = linalg::add(x, &s);
    let (_, gp) = problem.smooth.value_and_gradient(&xp);
    let yv = linalg::sub(&gp, grad);
    if !state.update(&s, &yv) {
        warn!("L-BFGS seed pair rejected; starting from the identity");
    }
    state
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fidelity::{DenseCurvature, ScaledIdentity};
    use crate::regularizer::{ProxConfig, TotalVariation};
    use crate::solvers::{L1Norm, QuadraticTerm, ZeroTerm};

    #[test]
    fn zero_gradient_gives_zero_direction() {
        let x = vec![0.3, 0.3, 0.3];
        let h = TotalVariation::new(0.5, 1, 3, ProxConfig::default()).unwrap();
        let dense = DenseCurvature {
            dim: 3,
            matrix: vec![2.0, 0.5, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 3.0],
        };
        let out = solve_subproblem(&[0.0; 3], &dense, &x, &h, &SolverConfig::default(), None);
        assert!(linalg::norm(&out.direction) < 1e-12);
    }

    #[test]
    fn identity_model_without_regularizer_is_steepest_descent() {
        let g = vec![1.0f64, -2.0, 0.25, 4.0];
        let x = vec![0.5; 4];
        let id = ScaledIdentity { dim: 4, scale: 1.0 };
        let out = solve_subproblem(&g, &id, &x, &ZeroTerm, &SolverConfig::default(), None);
        for (di, gi) in out.direction.iter().zip(&g) {
            assert!((di + gi).abs() < 1e-8);
        }
    }

    #[test]
    fn one_dimensional_tv_subproblem_matches_grid_search() {
        // H = I, h = λ·TV on a 1×3 image. Oracle: brute force over a grid of directions.
        let lambda = 0.3f64;
        let x = [0.2, 0.9, 0.4];
        let g = [0.5, -0.4, 0.1];
        let model = |d: [f64; 3]| {
            let y = [x[0] + d[0], x[1] + d[1], x[2] + d[2]];
            g.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>()
                + 0.5 * d.iter().map(|v| v * v).sum::<f64>()
                + lambda * ((y[0] - y[1]).abs() + (y[1] - y[2]).abs())
        };
        let (mut best, mut arg) = (f64::INFINITY, [0.0; 3]);
        let span = 1.5;
        let steps = 300;
        let at = |i: usize| -span + 2.0 * span * i as f64 / steps as f64;
        for i in 0..=steps {
            for j in 0..=steps {
                for k in 0..=steps {
                    let d = [at(i), at(j), at(k)];
                    let v = model(d);
                    if v < best {
                        best = v;
                        arg = d;
                    }
                }
            }
        }
        // refine around the coarse optimum
        let fine = 2.0 * span / steps as f64;
        let coarse = arg;
        for i in 0..=100 {
            for j in 0..=100 {
                for k in 0..=100 {
                    let off = |m: usize| -fine + 2.0 * fine * m as f64 / 100.0;
                    let d = [coarse[0] + off(i), coarse[1] + off(j), coarse[2] + off(k)];
                    let v = model(d);
                    if v < best {
                        best = v;
                        arg = d;
                    }
                }
            }
        }
        let h = TotalVariation::new(
            lambda,
            1,
            3,
            ProxConfig {
                max_iter: 10_000,
                rel_tol: 1e-13,
                dual_step: 0.125,
            },
        )
        .unwrap();
        let id = ScaledIdentity { dim: 3, scale: 1.0 };
        let mut cfg = SolverConfig::default();
        cfg.max_inner = 5000;
        cfg.inner_rel_tol = 1e-14;
        let out = solve_subproblem(&g, &id, &x, &h, &cfg, None);
        for (a, b) in out.direction.iter().zip(&arg) {
            assert!((a - b).abs() < 1e-4, "{:?} vs {:?}", out.direction, arg);
        }
    }

    #[test]
    fn line_search_full_step() {
        // f(x) = x², x = 1, Newton direction d = −1
        let out = line_search(
            |t| (1.0f64 - t).powi(2),
            1.0,
            -2.0,
            &SolverConfig::default(),
        );
        assert_eq!(out.unwrap().step, 1.0);
    }

    #[test]
    fn line_search_overshooting_direction() {
        // f(x) = x², x = 1, d = −2, Δ = −4, a = 0.5: need (1 − 2t)² ≤ 1 − 2t.
        // t = 1: 1 > −1; t = 0.7: 0.16 > −0.4; t = 0.49: 0.0004 ≤ 0.02.
        let out = line_search(
            |t: f64| (1.0 - 2.0 * t).powi(2),
            1.0,
            -4.0,
            &SolverConfig::default(),
        )
        .unwrap();
        assert!((out.step - 0.49).abs() < 1e-15);
        assert_eq!(out.evaluations, 3);
    }

    #[test]
    fn line_search_rejects_ascent() {
        assert!(line_search(|_| 0.0f64, 1.0, 0.0, &SolverConfig::default()).is_err());
        assert!(line_search(|_| 0.0f64, 1.0, 0.5, &SolverConfig::default()).is_err());
        // never satisfiable: hits the floor
        let out = line_search(|_| 2.0f64, 1.0, -1.0, &SolverConfig::default());
        let err = out.unwrap_err();
        assert!(err.step < 1e-8);
    }

    #[test]
    fn residual_without_regularizer_is_gradient_norm() {
        let g = [3.0, 4.0];
        assert_eq!(prox_gradient_residual(&[1.0, 2.0], &g, &ZeroTerm, 1.0), 5.0);
    }

    #[test]
    fn residual_matches_shrinkage() {
        // l = ½(x − c)², h = λ|x|: residual = |x − shrink(x − (x − c), λ)| = |x − shrink(c, λ)|
        let (c, lambda) = (1.7f64, 0.4f64);
        let h = L1Norm { lambda };
        for x in [-1.0, 0.0, 0.5, 1.3, 3.0] {
            let r = prox_gradient_residual(&[x], &[x - c], &h, 1.0);
            let expect = (x - (c.abs() - lambda).max(0.0) * c.signum()).abs();
            assert!((r - expect).abs() < 1e-10);
        }
        // at the minimizer it vanishes
        let xstar = c - lambda;
        assert!(prox_gradient_residual(&[xstar], &[xstar - c], &h, 1.0) < 1e-15);
    }

    #[test]
    fn forcing_term_guards() {
        assert_eq!(forcing_term::<f64>(&[1.0], &[2.0], None), 0.1);
        assert_eq!(forcing_term(&[1.0], &[1.0], Some(1.0)), 0.1);
        assert_eq!(forcing_term(&[1.0], &[2.0], Some(0.0)), 0.1);
        assert_eq!(forcing_term(&[1.0], &[2.0], Some(1.0)), 0.1);
        assert!((forcing_term(&[1.0f64], &[1.05], Some(1.0)) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn pn_solves_lasso_with_exact_model() {
        let c = vec![2.0f64, -0.3, 0.8, -1.2];
        let q = QuadraticTerm::isotropic(c.clone());
        let h = L1Norm { lambda: 0.5 };
        let problem = CompositeProblem::new(&q, &h);
        let mut cfg = SolverConfig::default();
        cfg.adaptive_stop = false;
        cfg.tol_f = 1e-12;
        let (x, trace) = pn_solve(&problem, &[0.0; 4], &cfg).unwrap();
        for (xi, ci) in x.iter().zip(&c) {
            let expect = ci.signum() * (ci.abs() - 0.5f64).max(0.0);
            assert!((xi - expect).abs() < 1e-6, "{x:?}");
        }
        assert!(trace.iterations() <= 3, "{}", trace.iterations());
        assert!(trace.is_monotone());
    }

    #[test]
    fn gradient_counter_flat_inside_subproblems() {
        let q = QuadraticTerm::new(
            vec![3.0, 1.0, 0.0, 1.0, 2.0, 0.5, 0.0, 0.5, 1.0],
            vec![1.0, -1.0, 2.0],
        );
        let h = L1Norm { lambda: 0.1 };
        let problem = CompositeProblem::new(&q, &h);
        let (_, trace) = pn_solve(&problem, &[0.0; 3], &SolverConfig::default()).unwrap();
        for (k, row) in trace.rows.iter().enumerate() {
            assert_eq!(row.grad_evals, k + 1);
        }
    }

    #[test]
    fn lbfgs_variant_converges_on_quadratic() {
        let q = QuadraticTerm::new(
            vec![3.0, 1.0, 0.0, 1.0, 2.0, 0.5, 0.0, 0.5, 1.0],
            vec![1.0, -1.0, 2.0],
        );
        let problem = CompositeProblem::new(&q, &ZeroTerm).with_hessian(HessianMode::lbfgs());
        let mut cfg = SolverConfig::default();
        cfg.tol_f = 1e-12;
        cfg.tol_x = 1e-12;
        let (x, trace) = pn_solve(&problem, &[0.0; 3], &cfg).unwrap();
        assert!(
            linalg::dist(&x, &q.center) < 1e-5,
            "{x:?} {:?}",
            trace.status
        );
        assert!(trace.is_monotone());
        assert!(trace.rows.last().unwrap().hess_applies > 0);
    }
}
