mod common;

use pnct_core::harness::{
    experiment_hessian_variants, experiment_scalability, run_reconstruction, ExperimentConfig,
    ProblemInstance, SolverKind,
};
use pnct_core::solvers::{pn_solve, prox_gradient_residual, CompositeProblem, ZeroTerm};
use pnct_core::{ConvergenceTrace, SolverStatus};

fn in_dir(dir: &tempfile::TempDir) -> ExperimentConfig {
    ExperimentConfig {
        out_dir: dir.path().to_path_buf(),
        ..ExperimentConfig::default()
    }
}

fn small(dir: &tempfile::TempDir) -> ExperimentConfig {
    ExperimentConfig {
        size: 24,
        angles: 30,
        rays: 30,
        ..in_dir(dir)
    }
}

#[test]
fn default_reconstruction_resembles_phantom() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_reconstruction(&in_dir(&dir)).unwrap();
    let run = &report.runs[0];
    assert!(run.iterations <= 40, "{} iterations", run.iterations);
    assert!(run.ssim.unwrap() >= 0.5, "SSIM {:?}", run.ssim);
    assert!(report.failures.is_empty());
    for name in [
        "trace_pn-exact.csv",
        "recon_pn-exact.pgm",
        "report.json",
        "sinogram.csv",
    ] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
}

#[test]
fn fista_and_proximal_newton_agree() {
    let dir = tempfile::tempdir().unwrap();
    let inst = ProblemInstance::build(&in_dir(&dir)).unwrap();
    let cfg = inst.config.solver_config;
    let pn = inst.solve(SolverKind::PnExact, &cfg).unwrap();
    let fi = inst.solve(SolverKind::Fista, &cfg).unwrap();
    let (a, b) = (pn.trace.final_objective(), fi.trace.final_objective());
    assert!((a - b).abs() <= 1e-3 * a.abs(), "{a} vs {b}");
}

#[test]
fn exact_fit_without_regularization() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        lambda: Some(0.0),
        noiseless: true,
        ..in_dir(&dir)
    };
    let report = run_reconstruction(&cfg).unwrap();
    let inst = ProblemInstance::build(&cfg).unwrap();
    let total: f64 = inst.measurements.total();
    assert!(report.runs[0].terminal_fidelity <= 1e-6 * total);
}

#[test]
fn stationary_start_terminates_immediately() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        lambda: Some(0.0),
        noiseless: true,
        ..small(&dir)
    };
    let inst = ProblemInstance::build(&cfg).unwrap();
    let l = inst.fidelity().unwrap();
    let problem = CompositeProblem::new(&l, &ZeroTerm);
    let (x, trace) = pn_solve(&problem, &inst.phantom.data, &cfg.solver_config).unwrap();
    assert!(trace.iterations() <= 2, "{:?}", trace.status);
    assert!(!trace.status.is_failure());
    let g = l.gradient(&x);
    assert!(prox_gradient_residual(&x, &g, &ZeroTerm, 1.0) < 1e-6);
}

#[test]
fn runs_are_reproducible() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let strip = |t: &ConvergenceTrace| -> Vec<_> {
        t.rows
            .iter()
            .map(|r| {
                (
                    r.iter,
                    r.f.to_bits(),
                    r.step.to_bits(),
                    r.inner_iters,
                    r.eta.to_bits(),
                )
            })
            .collect()
    };
    let mut traces = Vec::new();
    for d in [&d1, &d2] {
        let cfg = small(d);
        run_reconstruction(&cfg).unwrap();
        traces.push(ConvergenceTrace::read_csv(d.path().join("trace_pn-exact.csv")).unwrap());
    }
    assert_eq!(strip(&traces[0]), strip(&traces[1]));
    let a = std::fs::read(d1.path().join("recon_pn-exact.csv")).unwrap();
    let b = std::fs::read(d2.path().join("recon_pn-exact.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn emitted_traces_satisfy_solver_invariants() {
    let dir = tempfile::tempdir().unwrap();
    for solver in [SolverKind::PnExact, SolverKind::PnLbfgs] {
        let cfg = ExperimentConfig {
            solver,
            ..small(&dir)
        };
        run_reconstruction(&cfg).unwrap();
        let t = ConvergenceTrace::read_csv(dir.path().join(format!("trace_{solver}.csv"))).unwrap();
        assert!(t.is_monotone());
        for r in &t.rows[1..] {
            assert!(r.eta > 0.0 && r.eta <= 0.1);
            assert!(r.f.is_finite());
        }
    }
}

#[test]
fn scalability_reports_pixel_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        sizes: vec![16, 32],
        angles: 30,
        rays: 30,
        ..in_dir(&dir)
    };
    let report = experiment_scalability(&cfg).unwrap();
    let px: Vec<f64> = report.runs.iter().map(|r| r.pixel_size_mm).collect();
    assert_eq!(px, vec![32.0, 16.0]);
    let lambdas: Vec<f64> = report.runs.iter().map(|r| r.lambda).collect();
    assert_eq!(lambdas, vec![2.5e-5, 5e-5]);
    assert!(report.summary.contains_key("iteration_spread"));
    assert!(dir.path().join("trace_pn-exact_n32.csv").exists());
}

#[test]
fn hessian_variants_reach_the_same_objective() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig {
        sizes: vec![24],
        ..small(&dir)
    };
    cfg.solver_config.tol_f = 1e-7;
    cfg.solver_config.tol_x = 1e-10;
    let (report, pairs) = experiment_hessian_variants(&cfg).unwrap();
    let (exact, lbfgs) = &pairs[0];
    let (a, b) = (exact.trace.final_objective(), lbfgs.trace.final_objective());
    assert!((a - b).abs() <= 1e-3 * a.abs(), "{a} vs {b}");
    assert_eq!(report.runs.len(), 2);
    assert_ne!(lbfgs.trace.status, SolverStatus::LineSearchFailed);
}
