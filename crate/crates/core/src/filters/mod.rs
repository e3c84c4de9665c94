//! Reference filters and the common stepping interface.

mod ekf;
mod mpf;
mod rbpf;
mod sir;

pub use ekf::{ekf_step, information_update, time_update, Ekf, EkfState, InformationPosterior};
pub use mpf::{default_cross_draws, draw_indices, mpf_step, mpf_target_log_likelihoods, CrossDraw, Mpf, MpfState};
pub use rbpf::{rbpf_step, Rbpf, RbpfState};
pub use sir::{sir_pf_step, SirPf};

use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use crate::error::{Error, Result};
use crate::gaussian::GaussianBelief;

/// A recursive filter fed one measurement at a time.
pub trait Filter: Send {
    fn name(&self) -> &str;

    /// Consumes `y_k` and returns the filtered estimate of `x_k` in the
    /// model's `[x^L; x^N]` layout.
    fn step(&mut self, k: usize, y: &DVector<f64>, rng: &mut dyn RngCore) -> Result<DVector<f64>>;
}

/// Covariance entries beyond this are treated as a lost track.
pub const MAX_VARIANCE: f64 = 1e12;

/// Rejects beliefs with non-finite entries or exploding variances.
pub fn check_belief(g: &GaussianBelief) -> Result<()> {
    check_moments(g.mean(), g.cov())
}

pub fn check_moments(mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<()> {
    if mean.iter().any(|v| !v.is_finite()) || cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::FilterDiverged("non-finite moments".into()));
    }
    if cov.diagonal().iter().any(|&v| v > MAX_VARIANCE) {
        return Err(Error::FilterDiverged("variance above 1e12".into()));
    }
    Ok(())
}
