use nalgebra::DVector;
use rand::{Rng, RngCore};

use crate::conditional::{conditional_linear_prior, innovation};
use crate::error::{Error, Result};
use crate::gaussian::GaussianBelief;
use crate::linalg::{self, Spd};
use crate::model::{sample_gaussian, stack, ClgModel};
use crate::particle::{normalize_log_weights, systematic_indices, weighted_mean, ParticleBelief};

use super::{check_belief, Filter};

/// Particles over `x^N`, each carrying a Gaussian over `x^L`. Both describe
/// the prediction for the next measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct RbpfState {
    pub nonlinear: ParticleBelief,
    pub linear: Vec<GaussianBelief>,
}

impl RbpfState {
    /// Samples `x^N` from the prior marginal and attaches the conditional
    /// prior of `x^L` to every particle.
    pub fn from_prior<R: Rng + ?Sized>(prior: &GaussianBelief, dim_l: usize, n_p: usize, rng: &mut R) -> Result<Self> {
        if n_p == 0 {
            return Err(Error::EmptyParticleSet);
        }
        let dn = prior.dim() - dim_l;
        let marginal = crate::gaussian::block_marginal(prior, dim_l..prior.dim())?;
        let sqrt = linalg::psd_sqrt(marginal.cov())?;
        let mut particles = Vec::with_capacity(n_p);
        let mut linear = Vec::with_capacity(n_p);
        for _ in 0..n_p {
            let x = sample_gaussian(marginal.mean(), &sqrt, rng);
            debug_assert_eq!(x.len(), dn);
            linear.push(conditional_linear_prior(prior, dim_l, &x)?);
            particles.push(x);
        }
        Ok(Self { nonlinear: ParticleBelief::uniform(particles)?, linear })
    }

    pub fn len(&self) -> usize {
        self.linear.len()
    }

    pub fn is_empty(&self) -> bool {
        self.linear.is_empty()
    }
}

/// One recursion: nonlinear measurement update, joint resampling, linear
/// update from `y`, sampling of `x^N_{k+1}`, linear update from the
/// pseudo-measurement `z = x^N_{k+1} − f^N` and linear time update.
///
/// Returns the next state and the filtered estimate `[x̂^L; x̂^N]`.
pub fn rbpf_step<R: Rng + ?Sized>(
    s: &RbpfState,
    m: &ClgModel,
    e_factor: &Spd,
    y: &DVector<f64>,
    k: usize,
    rng: &mut R,
) -> Result<(RbpfState, DVector<f64>)> {
    let n_p = s.len();
    let particles = s.nonlinear.particles();
    let mut log_w = Vec::with_capacity(n_p);
    let mut filtered = Vec::with_capacity(n_p);
    for (x, lin) in particles.iter().zip(&s.linear) {
        let b = (m.b)(k, x);
        let g = (m.g)(k, x);
        let inn = innovation(&b, &g, lin, &m.cov_e, Some(e_factor), y).map_err(Error::diverged)?;
        log_w.push(inn.log_likelihood());
        filtered.push(inn.update(lin));
    }
    for (l, w) in log_w.iter_mut().zip(s.nonlinear.weights()) {
        *l += w.ln();
    }
    let weights = normalize_log_weights(&log_w).map_err(Error::diverged)?;
    let x_l = weighted_mean(&filtered.iter().map(|g| g.mean().clone()).collect::<Vec<_>>(), &weights);
    let x_n = weighted_mean(particles, &weights);
    let estimate = stack(&x_l, &x_n);

    let idx = systematic_indices(&weights, n_p, rng);
    let mut next_particles = Vec::with_capacity(n_p);
    let mut next_linear = Vec::with_capacity(n_p);
    for &i in &idx {
        let x = &particles[i];
        let lin = &filtered[i];
        let a_n = (m.a_n)(k, x);
        let f_n = (m.f_n)(k, x);
        let a_l = (m.a_l)(k, x);
        let f_l = (m.f_l)(k, x);

        let pred_mean = linalg::add_vec(&linalg::matvec(&a_n, lin.mean()), &f_n);
        let ac = linalg::matmul(&a_n, lin.cov());
        let pred_cov = linalg::add(&linalg::symmetrize(&linalg::matmul_tr(&ac, &a_n)), &m.cov_w_n);
        let (x_next, lin2) = match Spd::new(&pred_cov) {
            Ok(f) => {
                let x_next = sample_gaussian(&pred_mean, &f.lower(), rng);
                let z = linalg::sub_vec(&x_next, &f_n);
                let residual = linalg::sub_vec(&z, &linalg::matvec(&a_n, lin.mean()));
                let kt = f.solve(&ac);
                let mean = linalg::add_vec(lin.mean(), &linalg::tr_matvec(&kt, &residual));
                let cov = linalg::sub(lin.cov(), &linalg::tr_matmul(&ac, &kt));
                (x_next, GaussianBelief::from_parts(mean, cov))
            }
            Err(_) if ac.iter().all(|v| *v == 0.0) => {
                let x_next = sample_gaussian(&pred_mean, &linalg::psd_sqrt(&m.cov_w_n)?, rng);
                (x_next, lin.clone())
            }
            Err(e) => return Err(e.diverged()),
        };
        let pred = GaussianBelief::from_parts(
            linalg::add_vec(&linalg::matvec(&a_l, lin2.mean()), &f_l),
            linalg::add(&linalg::congruence(&a_l, lin2.cov()), &m.cov_w_l),
        );
        check_belief(&pred)?;
        next_particles.push(x_next);
        next_linear.push(pred);
    }
    let next = RbpfState { nonlinear: ParticleBelief::uniform(next_particles)?, linear: next_linear };
    Ok((next, estimate))
}

/// Rao-Blackwellised particle filter.
#[derive(Clone, Debug)]
pub struct Rbpf {
    model: ClgModel,
    e_factor: Spd,
    state: RbpfState,
}

impl Rbpf {
    pub fn new<R: Rng + ?Sized>(model: ClgModel, prior: &GaussianBelief, n_p: usize, rng: &mut R) -> Result<Self> {
        model.validate()?;
        if prior.dim() != model.dim() {
            return Err(Error::DimensionMismatch { expected: model.dim(), found: prior.dim() });
        }
        let state = RbpfState::from_prior(prior, model.dim_l, n_p, rng)?;
        let e_factor = Spd::new(&model.cov_e)?;
        Ok(Self { model, e_factor, state })
    }

    pub fn state(&self) -> &RbpfState {
        &self.state
    }

    pub fn update<R: Rng + ?Sized>(&mut self, k: usize, y: &DVector<f64>, rng: &mut R) -> Result<DVector<f64>> {
        let (next, estimate) = rbpf_step(&self.state, &self.model, &self.e_factor, y, k, rng)?;
        self.state = next;
        Ok(estimate)
    }
}

impl Filter for Rbpf {
    fn name(&self) -> &str {
        "rbpf"
    }

    fn step(&mut self, k: usize, y: &DVector<f64>, rng: &mut dyn RngCore) -> Result<DVector<f64>> {
        self.update(k, y, rng)
    }
}
