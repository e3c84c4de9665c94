//! Simplified DBF: F1 tracks only `x^L`, conditioning its measurement and
//! time updates on point estimates of `x^N` supplied by F2.

use nalgebra::DVector;
use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::filters::Filter;
use crate::gaussian::{block_marginal, GaussianBelief};
use crate::linalg;
use crate::model::{stack, ClgSystem};
use crate::particle::{weighted_mean, ParticleBelief};

use super::dual::{DbfModel, DbfRecursionState};
use super::steps;
use super::{DbfConfig, NetworkInfo};

#[derive(Clone, Debug)]
pub struct Sdbf {
    model: DbfModel,
    state: DbfRecursionState,
}

impl Sdbf {
    pub fn new<R: Rng + ?Sized>(system: ClgSystem, prior: &GaussianBelief, cfg: DbfConfig, rng: &mut R) -> Result<Self> {
        let model = DbfModel::new(system, cfg)?;
        let mut state = DbfRecursionState::init(&model, prior, rng)?;
        state.f1_pred = block_marginal(prior, 0..model.dim_l())?;
        Ok(Self { model, state })
    }

    pub fn state(&self) -> &DbfRecursionState {
        &self.state
    }

    pub fn network(&self) -> NetworkInfo {
        let clg = &self.model.system.clg;
        NetworkInfo::new(vec![clg.dim_l, clg.dim_n], clg.dim())
    }

    pub fn update<R: Rng + ?Sized>(&mut self, k: usize, y: &DVector<f64>, rng: &mut R) -> Result<DVector<f64>> {
        sdbf_step(&mut self.state, &self.model, y, k, rng)
    }
}

/// One SDBF recursion on a state whose F1 beliefs live on `x^L`.
pub fn sdbf_step<R: Rng + ?Sized>(
    state: &mut DbfRecursionState,
    model: &DbfModel,
    y: &DVector<f64>,
    k: usize,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let clg = &model.system.clg;
    let dim_l = clg.dim_l;

    let x_fp_n = state.f2_pred.mean();
    let b = (clg.b)(k, &x_fp_n);
    let g = (clg.g)(k, &x_fp_n);
    state.f1_filt1 = Some(steps::phase1(&state.f1_pred, &b.transpose(), &g, &model.w_e, y, dim_l)?);
    state.f2_set = state.f2_pred.particles().to_vec();
    state.pm_for_f1 = None;

    for n in 1..=model.cfg.iterations {
        if n > 1 {
            state.f2_set = std::mem::take(&mut state.resampled);
        }
        state.step1(dim_l, n)?;
        state.step2(model, y, k)?;
        state.step3(model, k)?;
        state.step4(rng)?;
        state.step5(model, k, rng)?;
        state.step6(model, k)?;
        state.pm_for_f1 = match state.pm_for_f1.take() {
            Some(m4) => Some(block_marginal(&m4, 0..dim_l)?),
            None => None,
        };
    }

    let m2 = &state.f1_filt1.as_ref().expect("phase 1 ran").post;
    let m3 = steps::combine_with_pseudo(m2, state.pm_for_f1.as_ref(), state.iteration + 1)?;
    let x_fe_n = weighted_mean(&state.f2_set, &state.f2_filtered);
    let a_l = (clg.a_l)(k, &x_fe_n);
    let f_l = (clg.f_l)(k, &x_fe_n);
    let pred = GaussianBelief::from_parts(
        linalg::add_vec(&linalg::matvec(&a_l, m3.mean()), &f_l),
        linalg::add(&clg.cov_w_l, &linalg::congruence(&a_l, m3.cov())),
    );
    crate::filters::check_belief(&pred).map_err(Error::diverged)?;
    let estimate = stack(m3.mean(), &x_fe_n);
    state.f1_filt2 = Some(m3);
    state.f1_pred = pred;
    state.f2_pred = ParticleBelief::uniform(std::mem::take(&mut state.predicted))?;
    Ok(estimate)
}

impl Filter for Sdbf {
    fn name(&self) -> &str {
        "sdbf"
    }

    fn step(&mut self, k: usize, y: &DVector<f64>, rng: &mut dyn RngCore) -> Result<DVector<f64>> {
        self.update(k, y, rng)
    }
}
