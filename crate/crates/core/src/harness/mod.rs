//! Experiment drivers: data simulation, solver runs, and the artifacts they leave on disk.

mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::info;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use config::{default_lambda, ExperimentConfig, SolverKind, BASE_LAMBDA, BASE_SIZE};

use crate::error::{Error, Result};
use crate::fidelity::FidelityOracle;
use crate::geometry::{Geometry, SystemMatrix};
use crate::image::{Image, Sinogram};
use crate::io;
use crate::metrics;
use crate::phantom;
use crate::regularizer::TotalVariation;
use crate::solvers::{
    fista, pn_solve, CompositeProblem, ConvergenceTrace, HessianMode, SolverConfig, SolverStatus,
};

/// Simulated data and operators for one configuration.
pub struct ProblemInstance {
    pub config: ExperimentConfig,
    pub geometry: Geometry,
    pub matrix: Arc<SystemMatrix<f64>>,
    pub phantom: Image<f64>,
    /// Attenuation per phantom unit applied to the raw Shepp–Logan image (1/mm).
    pub phantom_scale: f64,
    pub expected_counts: Sinogram<f64>,
    pub measurements: Sinogram<f64>,
}

impl ProblemInstance {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let geometry = Geometry::new(
            cfg.size,
            cfg.fov_mm,
            cfg.angles,
            cfg.angular_span_deg,
            cfg.rays,
        )?;
        let matrix = Arc::new(SystemMatrix::build(&geometry));
        let raw = phantom::shepp_logan(cfg.size)?;
        let (phantom, phantom_scale) =
            phantom::scale_to_max_line_integral(&matrix, &raw, cfg.max_line_integral)?;
        let expected_counts =
            phantom::simulate_noiseless(&matrix, &phantom, cfg.i0, cfg.angles, cfg.rays)?;
        let measurements = if cfg.noiseless {
            expected_counts.clone()
        } else {
            phantom::simulate_noisy(&expected_counts, cfg.seed)?
        };
        Ok(Self {
            config: cfg.clone(),
            geometry,
            matrix,
            phantom,
            phantom_scale,
            expected_counts,
            measurements,
        })
    }

    /// Data term with its own oracle counters.
    pub fn fidelity(&self) -> Result<FidelityOracle<f64>> {
        Ok(
            FidelityOracle::new(Arc::clone(&self.matrix), &self.measurements, self.config.i0)?
                .with_i0_in_hessian(self.config.include_i0_in_hessian),
        )
    }

    pub fn regularizer(&self, cfg: &SolverConfig) -> Result<TotalVariation<f64>> {
        TotalVariation::new(
            self.config.lambda(),
            self.config.size,
            self.config.size,
            cfg.prox,
        )
    }

    /// Runs one solver from the zero image. Time spent building the instance is not included
    /// in the trace.
    pub fn solve(&self, kind: SolverKind, cfg: &SolverConfig) -> Result<SolveOutcome> {
        let l = self.fidelity()?;
        let h = self.regularizer(cfg)?;
        let x0 = vec![0.0; self.geometry.n_unknowns()];
        let base = CompositeProblem::new(&l, &h);
        let (x, trace) = match kind {
            SolverKind::Fista => fista(&base, &x0, cfg)?,
            SolverKind::PnExact => pn_solve(&base, &x0, cfg)?,
            SolverKind::PnLbfgs => {
                let problem = base.with_hessian(HessianMode::Lbfgs {
                    memory: self.config.lbfgs_memory,
                });
                pn_solve(&problem, &x0, cfg)?
            }
        };
        info!(
            "{kind} at {0}x{0}: {1:?} after {2} iterations, f = {3:.10e}, {4:.2} s",
            self.config.size,
            trace.status,
            trace.iterations(),
            trace.final_objective(),
            trace.total_seconds()
        );
        let image = Image::from_vec(self.config.size, self.config.size, x)?;
        Ok(SolveOutcome { kind, image, trace })
    }

    /// Writes the phantom, the measured sinogram and its log display, and optionally `A`.
    pub fn write_data(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut out = Vec::new();
        let hi = self.phantom.max_value();
        let p = dir.join("phantom.pgm");
        io::write_pgm16(&p, &self.phantom, 0.0, hi)?;
        out.push(p);
        let p = dir.join("phantom.csv");
        io::write_image_csv(&p, &self.phantom)?;
        out.push(p);
        let p = dir.join("sinogram.csv");
        io::write_sinogram_csv(&p, &self.measurements)?;
        out.push(p);
        let clip = self.config.log_clip_max;
        let log = phantom::negative_log_display(&self.measurements, self.config.i0, clip)?;
        let p = dir.join("sinogram_log.pgm");
        io::write_pgm16(&p, &log, 0.0, clip)?;
        out.push(p);
        if self.config.export_matrix {
            let p = dir.join("system_matrix.csv");
            self.matrix.write_triplets(&p)?;
            out.push(p);
        }
        Ok(out)
    }

    /// Writes `trace_<label>.csv`, `recon_<label>.pgm` and `recon_<label>.csv`.
    pub fn write_run(&self, dir: &Path, label: &str, run: &SolveOutcome) -> Result<RunSummary> {
        std::fs::create_dir_all(dir)?;
        let trace_csv = dir.join(format!("trace_{label}.csv"));
        run.trace.write_csv(&trace_csv)?;
        let image_pgm = dir.join(format!("recon_{label}.pgm"));
        io::write_pgm16(&image_pgm, &run.image, 0.0, self.phantom.max_value())?;
        let image_csv = dir.join(format!("recon_{label}.csv"));
        io::write_image_csv(&image_csv, &run.image)?;

        let last = run.trace.rows.last();
        let range = self.phantom.max_value() - self.phantom.min_value();
        let ssim = if self.config.size >= 11 {
            Some(metrics::ssim(&run.image, &self.phantom, range)?)
        } else {
            None
        };
        Ok(RunSummary {
            label: label.to_string(),
            solver: run.kind,
            size: self.config.size,
            lambda: self.config.lambda(),
            pixel_size_mm: self.geometry.pixel_size(),
            status: run.trace.status,
            iterations: run.trace.iterations(),
            inner_iterations: run.trace.total_inner_iterations(),
            terminal_objective: run.trace.final_objective(),
            terminal_fidelity: last.map_or(f64::NAN, |r| r.l),
            seconds: run.trace.total_seconds(),
            grad_evals: last.map_or(0, |r| r.grad_evals),
            hess_applies: last.map_or(0, |r| r.hess_applies),
            ssim,
            relative_error: metrics::relative_error(&run.image, &self.phantom)?,
            trace_csv,
            image_pgm,
            image_csv,
        })
    }
}

pub struct SolveOutcome {
    pub kind: SolverKind,
    pub image: Image<f64>,
    pub trace: ConvergenceTrace,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub solver: SolverKind,
    pub size: usize,
    pub lambda: f64,
    pub pixel_size_mm: f64,
    pub status: SolverStatus,
    pub iterations: usize,
    pub inner_iterations: usize,
    pub terminal_objective: f64,
    pub terminal_fidelity: f64,
    pub seconds: f64,
    pub grad_evals: usize,
    pub hess_applies: usize,
    pub ssim: Option<f64>,
    pub relative_error: f64,
    pub trace_csv: PathBuf,
    pub image_pgm: PathBuf,
    pub image_csv: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub config: ExperimentConfig,
    pub runs: Vec<RunSummary>,
    /// Study-specific numbers (targets, ratios, per-size counts).
    pub summary: BTreeMap<String, Value>,
    pub artifacts: Vec<PathBuf>,
    /// Runs that ended in a failure status.
    pub failures: Vec<String>,
}

impl ExperimentReport {
    fn new(experiment: &str, config: &ExperimentConfig) -> Self {
        Self {
            experiment: experiment.to_string(),
            config: config.clone(),
            runs: Vec::new(),
            summary: BTreeMap::new(),
            artifacts: Vec::new(),
            failures: Vec::new(),
        }
    }

    fn add_run(&mut self, run: RunSummary) {
        if run.status.is_failure() {
            self.failures
                .push(format!("{}: {:?}", run.label, run.status));
        }
        self.artifacts.extend([
            run.trace_csv.clone(),
            run.image_pgm.clone(),
            run.image_csv.clone(),
        ]);
        self.runs.push(run);
    }

    pub fn run(&self, label: &str) -> Option<&RunSummary> {
        self.runs.iter().find(|r| r.label == label)
    }

    /// Writes `report.json` into `dir` and returns its path.
    pub fn write_json(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let p = dir.join("report.json");
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&p, text)?;
        Ok(p)
    }
}

/// One solver run on simulated data; writes data, reconstruction, trace and report.
pub fn run_reconstruction(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let inst = ProblemInstance::build(cfg)?;
    let dir = cfg.out_dir.as_path();
    let mut report = ExperimentReport::new("reconstruct", cfg);
    report.artifacts.extend(inst.write_data(dir)?);
    let run = inst.solve(cfg.solver, &cfg.solver_config)?;
    report.add_run(inst.write_run(dir, cfg.solver.name(), &run)?);
    report
        .summary
        .insert("phantom_scale".into(), json!(inst.phantom_scale));
    report.write_json(dir)?;
    Ok(report)
}

/// Proximal Newton against FISTA on identical data. FISTA runs until it reaches the PN
/// terminal objective within `1e-4` relative, or exhausts its iteration budget.
pub fn experiment_pn_vs_fista(cfg: &ExperimentConfig) -> Result<(ExperimentReport, PairedRuns)> {
    const MATCH_TOL: f64 = 1e-4;
    let inst = ProblemInstance::build(cfg)?;
    let dir = cfg.out_dir.as_path();
    let mut report = ExperimentReport::new("compare", cfg);
    report.artifacts.extend(inst.write_data(dir)?);

    let pn_kind = match cfg.solver {
        SolverKind::Fista => SolverKind::PnExact,
        k => k,
    };
    let pn = inst.solve(pn_kind, &cfg.solver_config)?;
    let target = pn.trace.final_objective();
    let threshold = target + MATCH_TOL * target.abs();
    let mut fcfg = cfg.solver_config;
    fcfg.fista.target_objective = Some(threshold);
    let fi = inst.solve(SolverKind::Fista, &fcfg)?;
    report.add_run(inst.write_run(dir, pn_kind.name(), &pn)?);
    report.add_run(inst.write_run(dir, "fista", &fi)?);

    let hit = fi.trace.first_reaching(threshold).copied();
    let pn_last = pn.trace.rows.last().copied();
    let pn_grads = pn_last.map_or(0, |r| r.grad_evals);
    let s = &mut report.summary;
    s.insert("pn_terminal_objective".into(), json!(target));
    s.insert("match_threshold".into(), json!(threshold));
    s.insert("pn_outer_iterations".into(), json!(pn.trace.iterations()));
    s.insert(
        "pn_inner_iterations".into(),
        json!(pn.trace.total_inner_iterations()),
    );
    s.insert("pn_gradient_evaluations".into(), json!(pn_grads));
    s.insert("pn_seconds".into(), json!(pn.trace.total_seconds()));
    s.insert("fista_reached_target".into(), json!(hit.is_some()));
    s.insert("fista_iterations".into(), json!(fi.trace.iterations()));
    s.insert(
        "fista_iterations_to_target".into(),
        json!(hit.map(|r| r.iter)),
    );
    s.insert(
        "fista_seconds_to_target".into(),
        json!(hit.map(|r| r.seconds)),
    );
    s.insert("fista_seconds".into(), json!(fi.trace.total_seconds()));
    let fista_iters = hit.map_or(fi.trace.iterations(), |r| r.iter);
    s.insert(
        "pn_gradient_fraction_of_fista_iterations".into(),
        json!(pn_grads as f64 / fista_iters.max(1) as f64),
    );
    s.insert(
        "pn_inner_over_fista_iterations".into(),
        json!(pn.trace.total_inner_iterations() as f64 / fista_iters.max(1) as f64),
    );
    report.write_json(dir)?;
    Ok((report, PairedRuns { pn, fista: fi }))
}

pub struct PairedRuns {
    pub pn: SolveOutcome,
    pub fista: SolveOutcome,
}

fn run_sizes<R: Send>(
    cfg: &ExperimentConfig,
    job: impl Fn(&ExperimentConfig) -> Result<R> + Sync,
) -> Result<Vec<R>> {
    let configs: Vec<ExperimentConfig> = cfg.sizes.iter().map(|&n| cfg.at_size(n)).collect();
    if cfg.parallel {
        std::thread::scope(|scope| {
            let handles: Vec<_> = configs.iter().map(|c| scope.spawn(|| job(c))).collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("experiment thread panicked"))
                .collect()
        })
    } else {
        configs.iter().map(job).collect()
    }
}

/// Proximal Newton across image sizes, with λ following the resolution doubling rule.
pub fn experiment_scalability(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if cfg.sizes.is_empty() {
        return Err(Error::InvalidParameter("no sizes given".into()));
    }
    let kind = match cfg.solver {
        SolverKind::Fista => SolverKind::PnExact,
        k => k,
    };
    let dir = cfg.out_dir.as_path();
    let runs = run_sizes(cfg, |c| {
        let inst = ProblemInstance::build(c)?;
        let run = inst.solve(kind, &c.solver_config)?;
        inst.write_run(dir, &format!("{kind}_n{}", c.size), &run)
    })?;
    let mut report = ExperimentReport::new("scale", cfg);
    let mut per_size = Vec::new();
    for r in runs {
        per_size.push(json!({
            "size": r.size,
            "pixel_size_mm": r.pixel_size_mm,
            "lambda": r.lambda,
            "outer_iterations": r.iterations,
            "terminal_objective": r.terminal_objective,
            "seconds": r.seconds,
        }));
        report.add_run(r);
    }
    let counts: Vec<usize> = report.runs.iter().map(|r| r.iterations).collect();
    let spread = counts.iter().max().unwrap() - counts.iter().min().unwrap();
    report
        .summary
        .insert("per_size".into(), Value::Array(per_size));
    report
        .summary
        .insert("outer_iterations".into(), json!(counts));
    report
        .summary
        .insert("iteration_spread".into(), json!(spread));
    report.write_json(dir)?;
    Ok(report)
}

/// Exact Hessian against the L-BFGS model at each size, on identical data.
pub fn experiment_hessian_variants(
    cfg: &ExperimentConfig,
) -> Result<(ExperimentReport, Vec<(SolveOutcome, SolveOutcome)>)> {
    const EARLY_ITERATION: usize = 3;
    let dir = cfg.out_dir.as_path();
    let pairs = run_sizes(cfg, |c| {
        let inst = ProblemInstance::build(c)?;
        let exact = inst.solve(SolverKind::PnExact, &c.solver_config)?;
        let lbfgs = inst.solve(SolverKind::PnLbfgs, &c.solver_config)?;
        let re = inst.write_run(dir, &format!("pn-exact_n{}", c.size), &exact)?;
        let rl = inst.write_run(dir, &format!("pn-lbfgs_n{}", c.size), &lbfgs)?;
        Ok((re, rl, exact, lbfgs))
    })?;
    let mut report = ExperimentReport::new("hessian", cfg);
    let mut per_size = Vec::new();
    let mut outcomes = Vec::new();
    for (re, rl, exact, lbfgs) in pairs {
        let fe = exact.trace.final_objective();
        let fl = lbfgs.trace.final_objective();
        let early = exact.trace.rows.get(EARLY_ITERATION).copied();
        per_size.push(json!({
            "size": re.size,
            "exact_iterations": re.iterations,
            "lbfgs_iterations": rl.iterations,
            "exact_seconds": re.seconds,
            "lbfgs_seconds": rl.seconds,
            "exact_terminal_objective": fe,
            "lbfgs_terminal_objective": fl,
            "terminal_relative_gap": (fe - fl).abs() / fe.abs().min(fl.abs()),
            "exact_seconds_at_iteration_3": early.map(|r| r.seconds),
            "exact_objective_at_iteration_3": early.map(|r| r.f),
            "lbfgs_objective_at_that_time": early.map(|r| lbfgs.trace.objective_at_time(r.seconds)),
        }));
        report.add_run(re);
        report.add_run(rl);
        outcomes.push((exact, lbfgs));
    }
    report
        .summary
        .insert("per_size".into(), Value::Array(per_size));
    report.write_json(dir)?;
    Ok((report, outcomes))
}
