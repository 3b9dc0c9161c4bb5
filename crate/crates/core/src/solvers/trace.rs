use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TRACE_CSV_HEADER: &str =
    "iter,f,l,h,step,inner_iters,eta,residual,grad_evals,hess_applies,seconds";

/// One outer iteration. Row 0 describes the starting point (step 0, no inner iterations).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub f: f64,
    pub l: f64,
    pub h: f64,
    pub step: f64,
    pub inner_iters: usize,
    pub eta: f64,
    pub residual: f64,
    pub grad_evals: usize,
    pub hess_applies: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    Running,
    ConvergedObjective,
    ConvergedStep,
    ConvergedIterate,
    Stationary,
    TargetReached,
    MaxIterations,
    LineSearchFailed,
}

impl SolverStatus {
    pub fn is_failure(self) -> bool {
        matches!(self, Self::LineSearchFailed)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub solver: String,
    pub rows: Vec<TraceRow>,
    /// Surrogate objective after each inner iteration, per outer iteration (when recorded).
    pub inner_objectives: Vec<Vec<f64>>,
    pub status: SolverStatus,
}

impl ConvergenceTrace {
    pub fn new(solver: impl Into<String>) -> Self {
        Self {
            solver: solver.into(),
            rows: Vec::new(),
            inner_objectives: Vec::new(),
            status: SolverStatus::Running,
        }
    }

    /// Number of completed iterations (rows beyond the starting point).
    pub fn iterations(&self) -> usize {
        self.rows.len().saturating_sub(1)
    }

    pub fn final_objective(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.f)
    }

    pub fn total_inner_iterations(&self) -> usize {
        self.rows.iter().map(|r| r.inner_iters).sum()
    }

    pub fn total_seconds(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.seconds)
    }

    /// First row whose objective is at or below `target`.
    pub fn first_reaching(&self, target: f64) -> Option<&TraceRow> {
        self.rows.iter().find(|r| r.f <= target)
    }

    /// Objective of the last row recorded at or before `seconds` (the starting row otherwise).
    pub fn objective_at_time(&self, seconds: f64) -> f64 {
        self.rows
            .iter()
            .take_while(|r| r.seconds <= seconds)
            .last()
            .or(self.rows.first())
            .map_or(f64::NAN, |r| r.f)
    }

    /// Whether the objective never increases from one row to the next.
    pub fn is_monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].f <= w[0].f)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        self.write_csv_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_to(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "{TRACE_CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{:e},{:e},{:e},{:e},{},{:e},{:e},{},{},{:e}",
                r.iter,
                r.f,
                r.l,
                r.h,
                r.step,
                r.inner_iters,
                r.eta,
                r.residual,
                r.grad_evals,
                r.hess_applies,
                r.seconds
            )?;
        }
        Ok(())
    }

    /// Parses rows written by [`write_csv`](Self::write_csv). Solver name and status are not
    /// part of the CSV and come back as `"csv"` / `Running`.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut lines = f.lines();
        match lines.next() {
            Some(Ok(h)) if h.trim() == TRACE_CSV_HEADER => {}
            _ => return Err(Error::Parse("missing trace CSV header".into())),
        }
        let mut trace = Self::new("csv");
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let c: Vec<&str> = line.split(',').map(str::trim).collect();
            if c.len() != 11 {
                return Err(Error::Parse(format!("trace row has {} fields", c.len())));
            }
            let fl = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("{s:?}: {e}")))
            };
            let us = |s: &str| {
                s.parse::<usize>()
                    .map_err(|e| Error::Parse(format!("{s:?}: {e}")))
            };
            trace.rows.push(TraceRow {
                iter: us(c[0])?,
                f: fl(c[1])?,
                l: fl(c[2])?,
                h: fl(c[3])?,
                step: fl(c[4])?,
                inner_iters: us(c[5])?,
                eta: fl(c[6])?,
                residual: fl(c[7])?,
                grad_evals: us(c[8])?,
                hess_applies: us(c[9])?,
                seconds: fl(c[10])?,
            });
        }
        Ok(trace)
    }
}
