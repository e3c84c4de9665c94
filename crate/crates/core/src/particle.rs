//! Weighted particle sets.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ParticleBelief {
    particles: Vec<DVector<f64>>,
    weights: Vec<f64>,
}

impl ParticleBelief {
    pub fn new(particles: Vec<DVector<f64>>, weights: Vec<f64>) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::EmptyParticleSet);
        }
        if particles.len() != weights.len() {
            return Err(Error::LengthMismatch { left: particles.len(), right: weights.len() });
        }
        let dim = particles[0].len();
        if let Some(p) = particles.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: p.len() });
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter("particle weights must be finite and nonnegative".into()));
        }
        Ok(Self { particles, weights })
    }

    /// Equal weights `1/N_p`.
    pub fn uniform(particles: Vec<DVector<f64>>) -> Result<Self> {
        let n = particles.len();
        Self::new(particles, vec![1.0 / n.max(1) as f64; n])
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.particles[0].len()
    }

    pub fn particles(&self) -> &[DVector<f64>] {
        &self.particles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_particles(self) -> Vec<DVector<f64>> {
        self.particles
    }

    /// Rescales the weights to sum to one and returns the normaliser
    /// `1/Σw`.
    pub fn normalize(&self) -> Result<(ParticleBelief, f64)> {
        let (weights, c) = normalize_weights(&self.weights)?;
        Ok((ParticleBelief { particles: self.particles.clone(), weights }, c))
    }

    pub fn effective_sample_size(&self) -> f64 {
        effective_sample_size(&self.weights)
    }

    /// Systematic resampling; the output carries uniform weights.
    pub fn systematic_resample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParticleBelief {
        let idx = systematic_indices(&self.weights, self.len(), rng);
        let particles: Vec<_> = idx.iter().map(|&i| self.particles[i].clone()).collect();
        let n = particles.len();
        ParticleBelief { particles, weights: vec![1.0 / n as f64; n] }
    }

    /// Weighted mean and covariance (weights are normalised internally).
    pub fn empirical_moments(&self) -> (DVector<f64>, DMatrix<f64>) {
        weighted_moments(&self.particles, &self.weights)
    }

    /// Weighted mean only.
    pub fn mean(&self) -> DVector<f64> {
        weighted_mean(&self.particles, &self.weights)
    }
}

pub fn normalize_weights(weights: &[f64]) -> Result<(Vec<f64>, f64)> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::AllWeightsZero);
    }
    let c = 1.0 / total;
    Ok((weights.iter().map(|w| w * c).collect(), c))
}

/// Normalised weights from log-weights with a single max subtraction.
pub fn normalize_log_weights(log_w: &[f64]) -> Result<Vec<f64>> {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::AllWeightsZero);
    }
    let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    Ok(normalize_weights(&w)?.0)
}

pub fn effective_sample_size(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// Indices chosen by systematic resampling of `n` draws from normalised
/// `weights`.
pub fn systematic_indices<R: Rng + ?Sized>(weights: &[f64], n: usize, rng: &mut R) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let step = total / n as f64;
    let mut u = rng.random::<f64>() * step;
    let mut out = Vec::with_capacity(n);
    let mut cum = weights[0];
    let mut i = 0;
    for _ in 0..n {
        while u >= cum && i + 1 < weights.len() {
            i += 1;
            cum += weights[i];
        }
        out.push(i);
        u += step;
    }
    out
}

pub fn weighted_mean(points: &[DVector<f64>], weights: &[f64]) -> DVector<f64> {
    let total: f64 = weights.iter().sum();
    let mut mean = DVector::zeros(points[0].len());
    for (p, w) in points.iter().zip(weights) {
        mean.axpy(w / total, p, 1.0);
    }
    mean
}

pub fn weighted_moments(points: &[DVector<f64>], weights: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let total: f64 = weights.iter().sum();
    let mean = weighted_mean(points, weights);
    let d = mean.len();
    let mut cov = DMatrix::zeros(d, d);
    for (p, w) in points.iter().zip(weights) {
        let dev = p - &mean;
        cov.ger(w / total, &dev, &dev, 1.0);
    }
    (mean, crate::linalg::symmetrize(&cov))
}
