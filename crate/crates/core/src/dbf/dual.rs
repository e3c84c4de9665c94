//! Dual Bayesian filtering: an extended Kalman filter over the whole state
//! (F1) and a particle filter over `x^N` (F2) exchanging messages.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::filters::{time_update, Filter};
use crate::gaussian::{block_marginal, GaussianBelief};
use crate::linalg::{self, Spd};
use crate::model::{sample_gaussian, stack, ClgSystem};
use crate::particle::{normalize_log_weights, systematic_indices, weighted_mean, ParticleBelief};

use super::steps::{self, Phase1};
use super::{DbfConfig, EstimateSource, NetworkInfo};

/// Model-derived quantities computed once per filter.
#[derive(Clone, Debug)]
pub struct DbfModel {
    pub system: ClgSystem,
    pub w_e: DMatrix<f64>,
    pub e_factor: Spd,
    /// `(C_w^N)⁻¹`, absent when singular.
    pub w_w_n: Option<DMatrix<f64>>,
    pub cfg: DbfConfig,
}

impl DbfModel {
    pub fn new(system: ClgSystem, cfg: DbfConfig) -> Result<Self> {
        cfg.validate()?;
        let e_factor = Spd::new(&system.clg.cov_e)?;
        let w_e = e_factor.inverse();
        let w_w_n = Spd::new(&system.clg.cov_w_n).ok().map(|f| f.inverse());
        Ok(Self { system, w_e, e_factor, w_w_n, cfg })
    }

    pub fn dim_l(&self) -> usize {
        self.system.clg.dim_l
    }
}

/// Message ledger of one recursion.
#[derive(Clone, Debug)]
pub struct DbfRecursionState {
    /// `m_fp(x_k)`
    pub f1_pred: GaussianBelief,
    /// `m_fp(x^N_k)`, the particle set entering the recursion.
    pub f2_pred: ParticleBelief,
    /// `m2`, F1 after the real measurement.
    pub f1_filt1: Option<Phase1>,
    /// `m3^(n)`
    pub f1_filt2: Option<GaussianBelief>,
    /// Linear-block marginal of `m3^(n)`.
    pub f1_linear: Option<GaussianBelief>,
    /// Particle set `S_k[n]` processed by the current iteration.
    pub f2_set: Vec<DVector<f64>>,
    /// `log w1` per particle.
    pub f2_weights_ms: Vec<f64>,
    /// `log w3` per particle.
    pub f2_weights_pm: Vec<f64>,
    /// Normalised `W4` of the current iteration.
    pub f2_filtered: Vec<f64>,
    /// `S_k[n+1]`
    pub resampled: Vec<DVector<f64>>,
    /// `x̄^N_{k+1}[n+1]`
    pub predicted: Vec<DVector<f64>>,
    /// `m4^(n)`; `None` is a flat message.
    pub pm_for_f1: Option<GaussianBelief>,
    pub iteration: usize,
}

impl DbfRecursionState {
    /// F1 starts from the prior; F2 from `N_p` draws of its `x^N` marginal.
    pub fn init<R: Rng + ?Sized>(model: &DbfModel, prior: &GaussianBelief, rng: &mut R) -> Result<Self> {
        let clg = &model.system.clg;
        if prior.dim() != clg.dim() {
            return Err(Error::DimensionMismatch { expected: clg.dim(), found: prior.dim() });
        }
        crate::gaussian::to_canonical(prior)?;
        let marginal = block_marginal(prior, clg.dim_l..clg.dim())?;
        let sqrt = linalg::psd_sqrt(marginal.cov())?;
        let particles = (0..model.cfg.particles).map(|_| sample_gaussian(marginal.mean(), &sqrt, rng)).collect();
        Ok(Self::new(prior.clone(), ParticleBelief::uniform(particles)?))
    }

    fn new(f1_pred: GaussianBelief, f2_pred: ParticleBelief) -> Self {
        Self {
            f1_pred,
            f2_pred,
            f1_filt1: None,
            f1_filt2: None,
            f1_linear: None,
            f2_set: Vec::new(),
            f2_weights_ms: Vec::new(),
            f2_weights_pm: Vec::new(),
            f2_filtered: Vec::new(),
            resampled: Vec::new(),
            predicted: Vec::new(),
            pm_for_f1: None,
            iteration: 0,
        }
    }

    pub fn particle_count(&self) -> usize {
        self.f2_pred.len()
    }

    /// F1 measurement update, `H` linearised at the prediction mean.
    pub fn phase1(&mut self, model: &DbfModel, y: &DVector<f64>, k: usize) -> Result<()> {
        let g = &model.system.general;
        let x_fp = self.f1_pred.mean();
        let ht = g.measurement_jacobian(k, x_fp);
        let v = g.measurement(k, x_fp) - &ht * x_fp;
        self.f1_filt1 = Some(steps::phase1(&self.f1_pred, &ht.transpose(), &v, &model.w_e, y, model.dim_l())?);
        self.f2_set = self.f2_pred.particles().to_vec();
        self.pm_for_f1 = None;
        self.iteration = 0;
        Ok(())
    }

    fn m2(&self) -> Result<&Phase1> {
        self.f1_filt1.as_ref().ok_or_else(|| Error::InvalidParameter("phase 1 has not run".into()))
    }

    fn linear(&self) -> Result<&GaussianBelief> {
        self.f1_linear.as_ref().ok_or_else(|| Error::InvalidParameter("step 1 has not run".into()))
    }

    /// `m3^(n) = m2 · m4^(n−1)` and its linear-block marginal.
    pub fn step1(&mut self, dim_l: usize, n: usize) -> Result<()> {
        let m3 = steps::combine_with_pseudo(&self.m2()?.post, self.pm_for_f1.as_ref(), n)?;
        self.f1_linear = Some(block_marginal(&m3, 0..dim_l)?);
        self.f1_filt2 = Some(m3);
        self.iteration = n;
        Ok(())
    }

    /// Measurement weights with the linear block integrated out.
    pub fn step2(&mut self, model: &DbfModel, y: &DVector<f64>, k: usize) -> Result<()> {
        let clg = &model.system.clg;
        let lin1 = self.linear()?.clone();
        let mut weigher = steps::MeasurementWeigher::new(&lin1, &clg.cov_e, &model.e_factor, y);
        self.f2_weights_ms = self
            .f2_set
            .iter()
            .map(|x| weigher.log_weight(&(clg.b)(k, x), &(clg.g)(k, x)).map_err(Error::diverged))
            .collect::<Result<_>>()?;
        Ok(())
    }

    /// Weights from the linear-block feedback. When the combined covariance
    /// is not positive definite for some particle the weights are uniform.
    pub fn step3(&mut self, model: &DbfModel, k: usize) -> Result<()> {
        let clg = &model.system.clg;
        let lin2 = self.m2()?.linear.clone();
        let lin3 = self.linear()?.clone();
        let weights: Result<Vec<f64>> = self
            .f2_set
            .iter()
            .map(|x| steps::feedback_log_weight(&(clg.a_l)(k, x), &(clg.f_l)(k, x), &clg.cov_w_l, &lin2, &lin3))
            .collect();
        self.f2_weights_pm = weights.unwrap_or_else(|_| vec![0.0; self.f2_set.len()]);
        Ok(())
    }

    /// `w4 = w_p · w1 · w3`, normalised, then systematic resampling.
    pub fn step4<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let n_p = self.f2_set.len();
        let log_wp = -(n_p as f64).ln();
        let log_w: Vec<f64> =
            self.f2_weights_ms.iter().zip(&self.f2_weights_pm).map(|(a, b)| log_wp + a + b).collect();
        self.f2_filtered = normalize_log_weights(&log_w).map_err(Error::diverged)?;
        let idx = systematic_indices(&self.f2_filtered, n_p, rng);
        self.resampled = idx.iter().map(|&i| self.f2_set[i].clone()).collect();
        Ok(())
    }

    /// One conditional prediction per resampled particle.
    pub fn step5<R: Rng + ?Sized>(&mut self, model: &DbfModel, k: usize, rng: &mut R) -> Result<()> {
        let clg = &model.system.clg;
        let lin1 = self.linear()?.clone();
        self.predicted = self
            .resampled
            .iter()
            .map(|x| steps::sample_conditional_prediction(&(clg.a_n)(k, x), &(clg.f_n)(k, x), &clg.cov_w_n, &lin1, rng))
            .collect::<Result<_>>()
            .map_err(Error::diverged)?;
        Ok(())
    }

    /// Pseudo-measurement message `m4^(n)` over `[x^L; x^N]`.
    pub fn step6(&mut self, model: &DbfModel, k: usize) -> Result<()> {
        let clg = &model.system.clg;
        let linear: Vec<Option<GaussianBelief>> = match &model.w_w_n {
            None => vec![None; self.resampled.len()],
            Some(w) => self
                .resampled
                .iter()
                .zip(&self.predicted)
                .map(|(x, x_next)| {
                    let z = linalg::sub_vec(x_next, &(clg.f_n)(k, x));
                    steps::linear_pseudo_posterior(&(clg.a_n)(k, x), w, &z, model.cfg.pm_regularization)
                })
                .collect(),
        };
        self.pm_for_f1 = steps::pseudo_measurement_message(&self.resampled, linear)?;
        Ok(())
    }

    /// Final F1 update with the last pseudo-measurement, estimates, and the
    /// predictions handed to the next recursion.
    pub fn phase3(&mut self, model: &DbfModel, k: usize) -> Result<DVector<f64>> {
        let dim_l = model.dim_l();
        let n_i = self.iteration;
        let m3 = steps::combine_with_pseudo(&self.m2()?.post, self.pm_for_f1.as_ref(), n_i + 1)?;
        let x_n = match model.cfg.estimate {
            EstimateSource::Particles => weighted_mean(&self.f2_set, &self.f2_filtered),
            EstimateSource::Gaussian => m3.mean().rows(dim_l, m3.dim() - dim_l).into_owned(),
        };
        let estimate = stack(&m3.mean().rows(0, dim_l).into_owned(), &x_n);
        let pred = time_update(&model.system.general, &m3, k);
        crate::filters::check_belief(&pred)?;
        let handover = ParticleBelief::uniform(std::mem::take(&mut self.predicted))?;
        self.f1_filt2 = Some(m3);
        self.f1_pred = pred;
        self.f2_pred = handover;
        Ok(estimate)
    }
}

/// Full recursion: phase 1, `n_i` iterations of steps 1 to 6, phase 3.
pub fn dbf_step<R: Rng + ?Sized>(
    state: &mut DbfRecursionState,
    model: &DbfModel,
    y: &DVector<f64>,
    k: usize,
    rng: &mut R,
) -> Result<DVector<f64>> {
    state.phase1(model, y, k)?;
    for n in 1..=model.cfg.iterations {
        if n > 1 {
            state.f2_set = std::mem::take(&mut state.resampled);
        }
        state.step1(model.dim_l(), n)?;
        state.step2(model, y, k)?;
        state.step3(model, k)?;
        state.step4(rng)?;
        state.step5(model, k, rng)?;
        state.step6(model, k)?;
    }
    state.phase3(model, k)
}

/// Dual Bayesian filter.
#[derive(Clone, Debug)]
pub struct Dbf {
    model: DbfModel,
    state: DbfRecursionState,
}

impl Dbf {
    pub fn new<R: Rng + ?Sized>(system: ClgSystem, prior: &GaussianBelief, cfg: DbfConfig, rng: &mut R) -> Result<Self> {
        let model = DbfModel::new(system, cfg)?;
        let state = DbfRecursionState::init(&model, prior, rng)?;
        Ok(Self { model, state })
    }

    pub fn model(&self) -> &DbfModel {
        &self.model
    }

    pub fn state(&self) -> &DbfRecursionState {
        &self.state
    }

    pub fn network(&self) -> NetworkInfo {
        let clg = &self.model.system.clg;
        NetworkInfo::new(vec![clg.dim(), clg.dim_n], clg.dim())
    }

    pub fn update<R: Rng + ?Sized>(&mut self, k: usize, y: &DVector<f64>, rng: &mut R) -> Result<DVector<f64>> {
        dbf_step(&mut self.state, &self.model, y, k, rng)
    }
}

impl Filter for Dbf {
    fn name(&self) -> &str {
        "dbf"
    }

    fn step(&mut self, k: usize, y: &DVector<f64>, rng: &mut dyn RngCore) -> Result<DVector<f64>> {
        self.update(k, y, rng)
    }
}
