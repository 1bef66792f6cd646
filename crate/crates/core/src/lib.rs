//! Sequential Gaussian-process estimation of extreme tail probabilities and
//! quantiles of expensive deterministic simulators.
//!
//! A run fits a GP surrogate to a small design, predicts a large Monte Carlo
//! set through the surrogate, estimates the tail quantity, and adds the
//! candidate point chosen by an acquisition criterion. Correlation parameters
//! are handled by MCMC so predictions carry parameter uncertainty.

pub mod config;
pub mod criteria;
pub mod diagnostics;
pub mod designs;
pub mod error;
pub mod estimation;
pub mod gp;
pub mod input_models;
pub mod io;
pub mod points;
pub mod posterior;
pub mod problems;
pub mod seed;
pub mod sensitivity;
pub mod sequential;
pub mod study;

pub use error::{Error, Result};
pub use points::PointSet;
