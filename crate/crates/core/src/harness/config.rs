use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lbfgs::DEFAULT_MEMORY;
use crate::solvers::SolverConfig;

/// Regularization weight at 64×64; it doubles with every doubling of the image side.
pub const BASE_LAMBDA: f64 = 1e-4;
pub const BASE_SIZE: usize = 64;

pub fn default_lambda(size: usize) -> f64 {
    BASE_LAMBDA * size as f64 / BASE_SIZE as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverKind {
    #[serde(rename = "pn-exact")]
    PnExact,
    #[serde(rename = "pn-lbfgs")]
    PnLbfgs,
    #[serde(rename = "fista")]
    Fista,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::PnExact => "pn-exact",
            Self::PnLbfgs => "pn-lbfgs",
            Self::Fista => "fista",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "pn-exact" => Ok(Self::PnExact),
            "pn-lbfgs" => Ok(Self::PnLbfgs),
            "fista" => Ok(Self::Fista),
            other => Err(Error::InvalidParameter(format!(
                "unknown solver {other:?} (expected pn-exact, pn-lbfgs or fista)"
            ))),
        }
    }
}

/// Everything needed to reproduce one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub size: usize,
    pub angles: usize,
    pub rays: usize,
    pub fov_mm: f64,
    pub angular_span_deg: f64,
    pub i0: f64,
    /// Explicit regularization weight; `None` selects [`default_lambda`] for the image size.
    pub lambda: Option<f64>,
    /// Largest line integral through the scaled phantom.
    pub max_line_integral: f64,
    pub seed: u64,
    /// Use the expected counts instead of a Poisson draw.
    pub noiseless: bool,
    pub solver: SolverKind,
    pub lbfgs_memory: usize,
    pub include_i0_in_hessian: bool,
    /// Image sides for the scalability and Hessian studies.
    pub sizes: Vec<usize>,
    /// Run independent sizes of a study on separate threads.
    pub parallel: bool,
    pub export_matrix: bool,
    pub log_clip_max: f64,
    pub out_dir: PathBuf,
    pub solver_config: SolverConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            size: 64,
            angles: 90,
            rays: 90,
            fov_mm: 512.0,
            angular_span_deg: 180.0,
            i0: 1e5,
            lambda: None,
            max_line_integral: 4.0,
            seed: 0,
            noiseless: false,
            solver: SolverKind::PnExact,
            lbfgs_memory: DEFAULT_MEMORY,
            include_i0_in_hessian: true,
            sizes: vec![32, 64, 128, 256],
            parallel: false,
            export_matrix: false,
            log_clip_max: 10.0,
            out_dir: PathBuf::from("out"),
            solver_config: SolverConfig::default(),
        }
    }
}

fn parse<V: FromStr>(key: &str, value: &str) -> Result<V>
where
    V::Err: fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::Parse(format!("{key} = {value:?}: {e}")))
}

fn parse_switch(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Parse(format!("{key} = {value:?}: expected on/off"))),
    }
}

impl ExperimentConfig {
    pub fn lambda(&self) -> f64 {
        self.lambda.unwrap_or_else(|| default_lambda(self.size))
    }

    pub fn pixel_size_mm(&self) -> f64 {
        self.fov_mm / self.size as f64
    }

    /// Copy for another image side. An explicit λ is rescaled by the same doubling rule.
    pub fn at_size(&self, size: usize) -> Self {
        let mut c = self.clone();
        c.lambda = self.lambda.map(|l| l * size as f64 / self.size as f64);
        c.size = size;
        c
    }

    pub fn validate(&self) -> Result<()> {
        if self.size < 2 || self.angles == 0 || self.rays == 0 {
            return Err(Error::InvalidParameter(
                "size must be >= 2 and angles, rays >= 1".into(),
            ));
        }
        if !(self.lambda() >= 0.0) || !self.lambda().is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda()
            )));
        }
        for (name, v) in [
            ("fov", self.fov_mm),
            ("i0", self.i0),
            ("max_line_integral", self.max_line_integral),
            ("angular_span", self.angular_span_deg),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be > 0, got {v}"
                )));
            }
        }
        if self.lbfgs_memory == 0 {
            return Err(Error::InvalidParameter("lbfgs_memory must be >= 1".into()));
        }
        if self.sizes.iter().any(|&s| s < 2) {
            return Err(Error::InvalidParameter(
                "every study size must be >= 2".into(),
            ));
        }
        self.solver_config.validate()
    }

    /// Applies one `key = value` setting. Keys match the CLI flag names with `-` or `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let v = value.trim();
        let sc = &mut self.solver_config;
        match key.as_str() {
            "size" => self.size = parse(&key, v)?,
            "angles" => self.angles = parse(&key, v)?,
            "rays" => self.rays = parse(&key, v)?,
            "fov" => self.fov_mm = parse(&key, v)?,
            "angular_span" => self.angular_span_deg = parse(&key, v)?,
            "i0" => self.i0 = parse(&key, v)?,
            "lambda" => {
                self.lambda = match v {
                    "auto" => None,
                    _ => Some(parse(&key, v)?),
                }
            }
            "max_line_integral" => self.max_line_integral = parse(&key, v)?,
            "seed" => self.seed = parse(&key, v)?,
            "noiseless" => self.noiseless = parse_switch(&key, v)?,
            "solver" => self.solver = v.parse()?,
            "lbfgs_memory" => self.lbfgs_memory = parse(&key, v)?,
            "i0_in_hessian" => self.include_i0_in_hessian = parse_switch(&key, v)?,
            "sizes" => {
                self.sizes = v
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| parse(&key, s))
                    .collect::<Result<_>>()?
            }
            "parallel" => self.parallel = parse_switch(&key, v)?,
            "export_matrix" => self.export_matrix = parse_switch(&key, v)?,
            "log_clip_max" => self.log_clip_max = parse(&key, v)?,
            "out" | "out_dir" => self.out_dir = PathBuf::from(v),
            "adaptive_stop" => sc.adaptive_stop = parse_switch(&key, v)?,
            "tol_f" => sc.tol_f = parse(&key, v)?,
            "tol_x" => sc.tol_x = parse(&key, v)?,
            "max_outer" => sc.max_outer = parse(&key, v)?,
            "inner_rel_tol" => sc.inner_rel_tol = parse(&key, v)?,
            "max_inner" => sc.max_inner = parse(&key, v)?,
            "ls_alpha" => sc.ls_alpha = parse(&key, v)?,
            "ls_shrink" => sc.ls_shrink = parse(&key, v)?,
            "ls_min_step" => sc.ls_min_step = parse(&key, v)?,
            "power_iters" => sc.power_iters = parse(&key, v)?,
            "power_rel_tol" => sc.power_rel_tol = parse(&key, v)?,
            "lipschitz_safety" => sc.lipschitz_safety = parse(&key, v)?,
            "residual_prox_scale" => sc.residual_prox_scale = parse(&key, v)?,
            "prox_max_iter" => sc.prox.max_iter = parse(&key, v)?,
            "prox_rel_tol" => sc.prox.rel_tol = parse(&key, v)?,
            "fista_max_iter" => sc.fista.max_iter = parse(&key, v)?,
            "fista_rel_tol" => sc.fista.rel_tol = parse(&key, v)?,
            "fista_initial_lipschitz" => sc.fista.initial_lipschitz = parse(&key, v)?,
            "fista_lipschitz_shrink" => {
                sc.fista.lipschitz_shrink = match v {
                    "none" | "off" => None,
                    _ => Some(parse(&key, v)?),
                }
            }
            _ => return Err(Error::Parse(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a `key = value` text, one setting per line; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", n + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(&std::fs::read_to_string(path)?)?;
        Ok(c)
    }
}
