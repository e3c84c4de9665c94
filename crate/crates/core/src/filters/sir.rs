use nalgebra::DVector;
use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::gaussian::GaussianBelief;
use crate::linalg::{self, Spd};
use crate::model::{sample_gaussian, GeneralSsm};
use crate::particle::{normalize_log_weights, ParticleBelief};

use super::Filter;

/// Weights by the likelihood of `y`, resamples systematically and
/// propagates through the transition. Returns the propagated set and the
/// filtered (pre-resampling) weighted mean.
pub fn sir_pf_step<R: Rng + ?Sized>(
    b: &ParticleBelief,
    m: &GeneralSsm,
    e_factor: &Spd,
    y: &DVector<f64>,
    k: usize,
    rng: &mut R,
) -> Result<(ParticleBelief, DVector<f64>)> {
    let log_w: Vec<f64> = b
        .particles()
        .iter()
        .zip(b.weights())
        .map(|(x, w)| w.ln() + e_factor.log_density(&(y - m.measurement(k, x))))
        .collect();
    let weights = normalize_log_weights(&log_w).map_err(Error::diverged)?;
    let filtered = ParticleBelief::new(b.particles().to_vec(), weights)?;
    let estimate = filtered.mean();
    let resampled = filtered.systematic_resample(rng);
    let propagated = resampled
        .into_particles()
        .into_iter()
        .map(|x| m.sample_transition(k, &x, rng))
        .collect();
    Ok((ParticleBelief::uniform(propagated)?, estimate))
}

/// Bootstrap particle filter over the full state.
#[derive(Clone, Debug)]
pub struct SirPf {
    model: GeneralSsm,
    e_factor: Spd,
    belief: ParticleBelief,
}

impl SirPf {
    pub fn new<R: Rng + ?Sized>(model: GeneralSsm, prior: &GaussianBelief, n_p: usize, rng: &mut R) -> Result<Self> {
        if n_p == 0 {
            return Err(Error::EmptyParticleSet);
        }
        let sqrt = linalg::psd_sqrt(prior.cov())?;
        let particles = (0..n_p).map(|_| sample_gaussian(prior.mean(), &sqrt, rng)).collect();
        let e_factor = Spd::new(model.cov_e())?;
        Ok(Self { model, e_factor, belief: ParticleBelief::uniform(particles)? })
    }

    pub fn belief(&self) -> &ParticleBelief {
        &self.belief
    }
}

impl Filter for SirPf {
    fn name(&self) -> &str {
        "sir"
    }

    fn step(&mut self, k: usize, y: &DVector<f64>, rng: &mut dyn RngCore) -> Result<DVector<f64>> {
        let (next, estimate) = sir_pf_step(&self.belief, &self.model, &self.e_factor, y, k, rng)?;
        self.belief = next;
        Ok(estimate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use std::sync::Arc;

    fn identity(cw: f64, ce: f64) -> GeneralSsm {
        GeneralSsm::new(
            Arc::new(|_, x| x.clone()),
            Arc::new(|_, x| x.clone()),
            DMatrix::from_element(1, 1, cw),
            DMatrix::from_element(1, 1, ce),
        )
        .unwrap()
    }

    #[test]
    fn noiseless_identity_keeps_support() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let m = identity(0.0, 1.0);
        let b = ParticleBelief::uniform((0..8).map(|i| DVector::from_element(1, i as f64)).collect()).unwrap();
        let e = Spd::new(m.cov_e()).unwrap();
        let (out, _) = sir_pf_step(&b, &m, &e, &DVector::from_element(1, 3.5), 0, &mut rng).unwrap();
        assert!(out.particles().iter().all(|p| b.particles().contains(p)));
        assert_eq!(out.len(), 8);
    }

    #[test]
    fn vanishing_likelihood_diverges() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let m = identity(1.0, 1e-300);
        let b = ParticleBelief::uniform((0..8).map(|i| DVector::from_element(1, i as f64)).collect()).unwrap();
        let e = Spd::new(m.cov_e()).unwrap();
        let err = sir_pf_step(&b, &m, &e, &DVector::from_element(1, 1e200), 0, &mut rng).unwrap_err();
        assert!(matches!(err, Error::FilterDiverged(_)));
    }
}
