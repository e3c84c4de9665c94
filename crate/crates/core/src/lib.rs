//! Bayesian filtering for conditionally linear Gaussian state-space models:
//! Gaussian and particle message algebra, classic filters (EKF, SIR, RBPF,
//! MPF), dual and multiple Bayesian filter networks, closed-form complexity
//! models and a Monte-Carlo harness.

pub mod complexity;
pub mod conditional;
pub mod dbf;
pub mod error;
pub mod filters;
pub mod gaussian;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod multitarget;
pub mod particle;
pub mod scenario;

pub use error::{Error, Result};
