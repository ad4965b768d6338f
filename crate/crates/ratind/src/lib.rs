//! Finite-dimensional laboratory for doubly nonlinear rate-independent
//! stochastic evolutions.
//!
//! The pipeline simulates the viscously regularized system with a
//! semi-implicit Euler-Maruyama scheme, reparametrizes trajectories by arc
//! length into parametrized (rescaled-time) records, and verifies the
//! structural identities of the model class (energy balances, subdifferential
//! inclusions, the rescaling constraint, quadratic variation of the rescaled
//! noise) against independent reference solvers.

pub mod config;
pub mod diagnostics;
pub mod dissipation;
pub mod energy;
pub mod model;
pub mod noise;
pub mod oracles;
pub mod reparam;
pub mod run;
pub mod svg;
pub mod viscous;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value in {context}")]
    NonFinite { context: String },
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("argument out of domain: {0}")]
    OutOfDomain(String),
    #[error("non-monotone input: {0}")]
    NonMonotone(String),
    #[error("jump detected: rescaled time stalls on tau in [{tau_lo}, {tau_hi}] (min speed {min_speed} < delta {delta})")]
    JumpDetected {
        tau_lo: f64,
        tau_hi: f64,
        min_speed: f64,
        delta: f64,
    },
    #[error("blow-up on path {path_index} at step {step} (t = {t}): state norm {norm:.3e} exceeds threshold; reduce dt")]
    Blowup {
        path_index: usize,
        step: usize,
        t: f64,
        norm: f64,
    },
    #[error("ensemble too small: need at least {need} paths, have {have}")]
    EnsembleTooSmall { need: usize, have: usize },
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
