//! Transmission CT reconstruction under a Poisson noise model with total-variation
//! regularization, solved by proximal Newton (exact or L-BFGS curvature) and FISTA.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fidelity;
pub mod geometry;
pub mod harness;
pub mod image;
pub mod io;
pub mod lbfgs;
pub mod linalg;
pub mod metrics;
pub mod phantom;
pub mod regularizer;
pub mod scalar;
pub mod solvers;

pub use error::{Error, Result};
pub use fidelity::{CurvatureOperator, ExactCurvature, FidelityOracle, OracleCounts};
pub use geometry::{Geometry, SystemMatrix};
pub use image::{Image, Sinogram};
pub use lbfgs::LbfgsState;
pub use regularizer::{ProxConfig, TotalVariation};
pub use scalar::Real;
pub use solvers::{
    fista, pn_solve, CompositeProblem, ConvergenceTrace, HessianMode, SolverConfig, SolverStatus,
};

pub type Image64 = Image<f64>;
pub type Image32 = Image<f32>;
pub type Sinogram64 = Sinogram<f64>;
pub type SystemMatrix64 = SystemMatrix<f64>;
pub type SystemMatrix32 = SystemMatrix<f32>;
pub type FidelityOracle64 = FidelityOracle<f64>;
pub type FidelityOracle32 = FidelityOracle<f32>;
pub type TotalVariation64 = TotalVariation<f64>;
