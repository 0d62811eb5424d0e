//! Damped nonlinear least squares (Levenberg–Marquardt) over typed
//! parameter blocks with per-residual robust losses.
//!
//! Residual evaluation fans out through [`crate::par`]; the normal equations
//! are accumulated in residual order so both execution modes produce the
//! same bits. The dense Cholesky solve is sized for the problems this crate
//! builds (tens of anchor unknowns, or a few hundred pose coordinates).

mod check;
mod lm;
mod loss;
mod problem;

use thiserror::Error;

pub use check::{check_jacobians, FD_STEP};
pub use lm::{solve, SolveReport, SolverOptions, Termination};
pub use loss::{cauchy_cost, Loss};
pub use problem::{
    wrap_angle, BlockId, BlockKind, BlockValue, Evaluation, ParameterBlock, Problem, Residual, ResidualBlock,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("structural error: {0}")]
    Structural(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}
