use std::time::Instant;

use log::debug;

use super::{CompositeProblem, ConvergenceTrace, SolverConfig, SolverStatus, TraceRow};
use crate::error::{Error, Result};
use crate::linalg;
use crate::Real;

/// Doublings of `L` allowed in one iteration before giving up.
const MAX_BACKTRACKS: usize = 200;

/// Accelerated proximal gradient with Nesterov momentum and backtracking on the local
/// smoothness constant. One gradient of `l` per iteration; the trace's `step` column holds
/// `1/L` and `residual` the gradient-mapping norm `L‖x_k − y_k‖`.
pub fn fista<T: Real>(
    problem: &CompositeProblem<'_, T>,
    x0: &[T],
    cfg: &SolverConfig,
) -> Result<(Vec<T>, ConvergenceTrace)> {
    cfg.validate()?;
    let fc = &cfg.fista;
    let start = Instant::now();
    let smooth = problem.smooth;
    let nonsmooth = problem.nonsmooth;
    let half = T::lit(0.5);
    let two = T::lit(2.0);

    let mut trace = ConvergenceTrace::new("fista");
    let mut x = x0.to_vec();
    let mut y = x0.to_vec();
    let mut t = T::one();
    let mut lip = T::lit(fc.initial_lipschitz);

    let l0 = smooth.value(&x);
    let h0 = nonsmooth.value(&x);
    if !(l0 + h0).is_finite() {
        return Err(Error::NonFinite { iteration: 0 });
    }
    trace.rows.push(TraceRow {
        iter: 0,
        f: (l0 + h0).as_f64(),
        l: l0.as_f64(),
        h: h0.as_f64(),
        step: 0.0,
        inner_iters: 0,
        eta: 0.0,
        residual: f64::NAN,
        grad_evals: smooth.counts().gradient_evals,
        hess_applies: smooth.counts().hessian_applies,
        seconds: start.elapsed().as_secs_f64(),
    });
    if let Some(target) = fc.target_objective {
        if (l0 + h0).as_f64() <= target {
            trace.status = SolverStatus::TargetReached;
            return Ok((x, trace));
        }
    }

    for k in 1..=fc.max_iter {
        if let Some(s) = fc.lipschitz_shrink {
            lip *= T::lit(s);
        }
        let (ly, grad) = smooth.value_and_gradient(&y);
        if !ly.is_finite() {
            return Err(Error::NonFinite { iteration: k });
        }
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let step = T::one() / lip;
            let mut z = y.clone();
            linalg::axpy(-step, &grad, &mut z);
            let p = nonsmooth.prox(&z, step);
            let diff = linalg::sub(&p, &y);
            let lp = smooth.value(&p);
            let bound = ly + linalg::dot(&grad, &diff) + half * lip * linalg::dot(&diff, &diff);
            if lp.is_finite() && lp <= bound {
                accepted = Some((p, lp, linalg::norm(&diff)));
                break;
            }
            lip *= two;
        }
        let Some((p, lp, gap)) = accepted else {
            return Err(Error::NonFinite { iteration: k });
        };

        let t_next = (T::one() + (T::one() + T::lit(4.0) * t * t).sqrt()) / two;
        let beta = (t - T::one()) / t_next;
        t = t_next;
        let change = linalg::relative_change(&p, &x);
        y = p
            .iter()
            .zip(&x)
            .map(|(&pi, &xi)| pi + beta * (pi - xi))
            .collect();
        x = p;

        let hp = nonsmooth.value(&x);
        let f = lp + hp;
        let counts = smooth.counts();
        trace.rows.push(TraceRow {
            iter: k,
            f: f.as_f64(),
            l: lp.as_f64(),
            h: hp.as_f64(),
            step: (T::one() / lip).as_f64(),
            inner_iters: 0,
            eta: 0.0,
            residual: (lip * gap).as_f64(),
            grad_evals: counts.gradient_evals,
            hess_applies: counts.hessian_applies,
            seconds: start.elapsed().as_secs_f64(),
        });
        if !f.is_finite() {
            return Err(Error::NonFinite { iteration: k });
        }
        if let Some(target) = fc.target_objective {
            if f.as_f64() <= target {
                trace.status = SolverStatus::TargetReached;
                break;
            }
        }
        if change <= T::lit(fc.rel_tol) {
            trace.status = SolverStatus::ConvergedIterate;
            break;
        }
    }
    if trace.status == SolverStatus::Running {
        trace.status = SolverStatus::MaxIterations;
    }
    debug!(
        "fista: {:?} after {} iterations, f = {:e}, L = {}",
        trace.status,
        trace.iterations(),
        trace.final_objective(),
        lip
    );
    Ok((x, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::{L1Norm, QuadraticTerm, ZeroTerm};

    #[test]
    fn quadratic_converges_to_center() {
        let c = vec![1.0, -2.0, 0.5, 3.0];
        let q = QuadraticTerm::isotropic(c.clone());
        let problem = CompositeProblem::new(&q, &ZeroTerm);
        let (x, trace) = fista(&problem, &[0.0; 4], &SolverConfig::default()).unwrap();
        assert!(linalg::dist(&x, &c) < 1e-8);
        assert!(trace.iterations() <= 200);
    }

    #[test]
    fn scalar_lasso_is_soft_threshold() {
        for &(c, lambda) in &[(2.0f64, 0.5f64), (-1.5, 0.25), (0.3, 0.5), (-0.2, 1.0)] {
            let q = QuadraticTerm::isotropic(vec![c]);
            let h = L1Norm { lambda };
            let problem = CompositeProblem::new(&q, &h);
            let (x, _) = fista(&problem, &[0.0], &SolverConfig::default()).unwrap();
            let expect = c.signum() * (c.abs() - lambda).max(0.0);
            assert!((x[0] - expect).abs() < 1e-8, "c={c}: {} vs {expect}", x[0]);
        }
    }

    #[test]
    fn rate_bound_on_strongly_convex_quadratic() {
        // f_k − f* ≤ 2L‖x0 − x*‖²/(k+1)² with L the exact smoothness constant.
        let q = QuadraticTerm::new(
            vec![10.0, 1.0, 0.0, 1.0, 2.0, 0.5, 0.0, 0.5, 0.5],
            vec![1.0, 2.0, -1.0],
        );
        let (lmax, _) = super::super::largest_eigenvalue(&q.q, 500, 1e-14);
        let problem = CompositeProblem::new(&q, &ZeroTerm);
        let mut cfg = SolverConfig::default();
        cfg.fista.initial_lipschitz = lmax;
        cfg.fista.max_iter = 300;
        cfg.fista.rel_tol = 1e-300;
        let x0 = [0.0; 3];
        let r0 = linalg::norm(&q.center);
        let (_, trace) = fista(&problem, &x0, &cfg).unwrap();
        for row in &trace.rows[1..] {
            let k = row.iter as f64;
            assert!(row.f <= 2.0 * lmax * r0 * r0 / ((k + 1.0) * (k + 1.0)) + 1e-12);
        }
    }

    #[test]
    fn stops_at_target() {
        let q = QuadraticTerm::isotropic(vec![3.0, 4.0]);
        let problem = CompositeProblem::new(&q, &ZeroTerm);
        let mut cfg = SolverConfig::default();
        cfg.fista.target_objective = Some(1.0);
        let (_, trace) = fista(&problem, &[0.0, 0.0], &cfg).unwrap();
        assert_eq!(trace.status, SolverStatus::TargetReached);
        assert!(trace.final_objective() <= 1.0);
        assert!(trace.rows[trace.rows.len() - 2].f > 1.0);
    }

    #[test]
    fn one_gradient_per_iteration() {
        let q = QuadraticTerm::isotropic(vec![3.0, 4.0, 5.0]);
        let problem = CompositeProblem::new(&q, &ZeroTerm);
        let (_, trace) = fista(&problem, &[0.0; 3], &SolverConfig::default()).unwrap();
        for row in &trace.rows {
            assert_eq!(row.grad_evals, row.iter);
        }
    }
}
