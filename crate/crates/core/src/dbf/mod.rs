//! Networks of cooperating Bayesian filters.

mod dual;
mod mbfa;
mod simplified;
pub mod steps;

pub use dual::{dbf_step, Dbf, DbfModel, DbfRecursionState};
pub use mbfa::{mbfa_step, Mbfa, MbfaState};
pub use simplified::{sdbf_step, Sdbf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which filter supplies the `x^N` estimate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimateSource {
    /// Weighted mean of F2's final filtered particles.
    #[default]
    Particles,
    /// The `x^N` block of F1's final filtered mean.
    Gaussian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DbfConfig {
    /// Iterations `n_i` per recursion.
    pub iterations: usize,
    /// Particle count `N_p`.
    pub particles: usize,
    /// Relative ridge added to singular pseudo-measurement precisions.
    pub pm_regularization: f64,
    pub estimate: EstimateSource,
}

impl Default for DbfConfig {
    fn default() -> Self {
        Self { iterations: 1, particles: 100, pm_regularization: 1e-9, estimate: EstimateSource::Particles }
    }
}

impl DbfConfig {
    pub fn new(particles: usize, iterations: usize) -> Self {
        Self { particles, iterations, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("at least one iteration per recursion is required".into()));
        }
        if self.particles == 0 {
            return Err(Error::EmptyParticleSet);
        }
        if !(self.pm_regularization >= 0.0) {
            return Err(Error::InvalidParameter("pm_regularization must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Shape of a filter network: the dimension each filter estimates and the
/// resulting redundancy `N_d = Σ D_i − D`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkInfo {
    pub filter_dims: Vec<usize>,
    pub state_dim: usize,
}

impl NetworkInfo {
    pub fn new(filter_dims: Vec<usize>, state_dim: usize) -> Self {
        Self { filter_dims, state_dim }
    }

    pub fn filters(&self) -> usize {
        self.filter_dims.len()
    }

    pub fn redundancy(&self) -> usize {
        self.filter_dims.iter().sum::<usize>() - self.state_dim
    }
}
