use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pnct_core::harness::{
    experiment_hessian_variants, experiment_pn_vs_fista, experiment_scalability,
    run_reconstruction, ExperimentConfig, ExperimentReport, SolverKind,
};

#[derive(Parser)]
#[command(
    name = "pnct",
    version,
    about = "Poisson-likelihood TV reconstruction for transmission CT"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate data and reconstruct it with one solver.
    Reconstruct(Common),
    /// Proximal Newton against FISTA on the same data.
    Compare(Common),
    /// Proximal Newton over several image sizes.
    Scale(Common),
    /// Exact Hessian against the L-BFGS model over several image sizes.
    Hessian(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    #[value(name = "pn-exact")]
    PnExact,
    #[value(name = "pn-lbfgs")]
    PnLbfgs,
    Fista,
}

#[derive(Args)]
struct Common {
    /// key=value file applied before the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Image side in pixels.
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    angles: Option<usize>,
    #[arg(long)]
    rays: Option<usize>,
    /// Field of view in mm.
    #[arg(long)]
    fov: Option<f64>,
    #[arg(long)]
    i0: Option<f64>,
    /// Regularization weight (default 1e-4 at 64x64, doubling per size doubling).
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    adaptive_stop: Option<Switch>,
    /// Comma-separated image sizes for `scale` and `hessian`.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long)]
    tol_f: Option<f64>,
    #[arg(long)]
    max_outer: Option<usize>,
    #[arg(long)]
    fista_max_iter: Option<usize>,
    /// Use expected counts instead of Poisson samples.
    #[arg(long)]
    noiseless: bool,
    /// Also write the system matrix as row,col,value triplets.
    #[arg(long)]
    export_matrix: bool,
    /// Run the sizes of a study concurrently.
    #[arg(long)]
    parallel: bool,
    /// Extra key=value overrides, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)
                .with_context(|| format!("reading config {}", p.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.size {
            c.size = v;
        }
        if let Some(v) = self.angles {
            c.angles = v;
        }
        if let Some(v) = self.rays {
            c.rays = v;
        }
        if let Some(v) = self.fov {
            c.fov_mm = v;
        }
        if let Some(v) = self.i0 {
            c.i0 = v;
        }
        if let Some(v) = self.lambda {
            c.lambda = Some(v);
        }
        if let Some(v) = self.solver {
            c.solver = match v {
                SolverArg::PnExact => SolverKind::PnExact,
                SolverArg::PnLbfgs => SolverKind::PnLbfgs,
                SolverArg::Fista => SolverKind::Fista,
            };
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.adaptive_stop {
            c.solver_config.adaptive_stop = matches!(v, Switch::On);
        }
        if let Some(v) = &self.sizes {
            c.sizes = v.clone();
        }
        if let Some(v) = self.tol_f {
            c.solver_config.tol_f = v;
        }
        if let Some(v) = self.max_outer {
            c.solver_config.max_outer = v;
        }
        if let Some(v) = self.fista_max_iter {
            c.solver_config.fista.max_iter = v;
        }
        c.noiseless |= self.noiseless;
        c.export_matrix |= self.export_matrix;
        c.parallel |= self.parallel;
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .with_context(|| format!("--set expects KEY=VALUE, got {kv:?}"))?;
            c.set(k, v)?;
        }
        if let Some(v) = &self.out {
            c.out_dir = v.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

fn print_report(r: &ExperimentReport) {
    for run in &r.runs {
        println!(
            "{:<18} {:>4}x{:<4} {:?}: {} iterations ({} inner), f = {:.10e}, {:.2} s{}",
            run.label,
            run.size,
            run.size,
            run.status,
            run.iterations,
            run.inner_iterations,
            run.terminal_objective,
            run.seconds,
            run.ssim.map_or(String::new(), |s| format!(", SSIM {s:.3}"))
        );
    }
    for (k, v) in &r.summary {
        if !v.is_array() {
            println!("{k}: {v}");
        }
    }
    println!("report: {}", r.config.out_dir.join("report.json").display());
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let report = match &cli.command {
        Command::Reconstruct(a) => run_reconstruction(&a.resolve()?)?,
        Command::Compare(a) => experiment_pn_vs_fista(&a.resolve()?)?.0,
        Command::Scale(a) => experiment_scalability(&a.resolve()?)?,
        Command::Hessian(a) => experiment_hessian_variants(&a.resolve()?)?.0,
    };
    print_report(&report);
    if !report.failures.is_empty() {
        anyhow::bail!("solver failures: {}", report.failures.join("; "));
    }
    Ok(())
}
