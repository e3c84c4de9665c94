use nalgebra::DVector;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::GaussianBelief;
use crate::linalg::{self, Spd};
use crate::model::sample_gaussian;
use crate::multitarget::MultiTargetModel;
use crate::particle::{normalize_log_weights, ParticleBelief};

use super::Filter;

/// How the other filters' particles are picked when marginalising them out.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrossDraw {
    /// Independent uniform indices per draw.
    #[default]
    Random,
    /// Draw `l` uses particle `l mod M` of every other filter.
    Sequential,
}

/// One particle set per target, each over `[x^L_i; x^N_i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MpfState {
    pub filters: Vec<ParticleBelief>,
    pub cross_draws: usize,
}

impl MpfState {
    pub fn particles_per_filter(&self) -> usize {
        self.filters[0].len()
    }
}

/// Default cross-draw count, a third of the particles per filter.
pub fn default_cross_draws(m: usize) -> usize {
    ((m as f64 / 3.0).round() as usize).max(1)
}

/// Indices into every filter's set for each of the `l` joint draws.
/// Entry `i` of a draw is ignored when filter `i` is the one being weighted.
pub fn draw_indices<R: Rng + ?Sized>(mode: CrossDraw, filters: usize, m: usize, l: usize, rng: &mut R) -> Vec<Vec<usize>> {
    (0..l)
        .map(|d| match mode {
            CrossDraw::Random => (0..filters).map(|_| rng.random_range(0..m)).collect(),
            CrossDraw::Sequential => vec![d % m; filters],
        })
        .collect()
}

/// Log marginal likelihood of `y` for every particle of filter `target`,
/// averaging the joint likelihood over the given draws of the others.
pub fn mpf_target_log_likelihoods(
    model: &MultiTargetModel,
    e_factor: &Spd,
    sets: &[ParticleBelief],
    target: usize,
    draws: &[Vec<usize>],
    y: &DVector<f64>,
    k: usize,
) -> Vec<f64> {
    let general = &model.joint().general;
    let n = sets.len();
    let single_draw = [vec![0; n]];
    let draws = if n == 1 { &single_draw[..] } else { draws };
    let mut per_target: Vec<DVector<f64>> = (0..n).map(|i| sets[i].particles()[0].clone()).collect();
    let mut lls = vec![0.0; draws.len()];
    sets[target]
        .particles()
        .iter()
        .map(|x| {
            per_target[target] = x.clone();
            for (ll, draw) in lls.iter_mut().zip(draws) {
                for (i, slot) in per_target.iter_mut().enumerate() {
                    if i != target {
                        *slot = sets[i].particles()[draw[i]].clone();
                    }
                }
                let joint = model.assemble(&per_target);
                *ll = e_factor.log_density(&(y - general.measurement(k, &joint)));
            }
            log_mean_exp(&lls)
        })
        .collect()
}

fn log_mean_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + (v.iter().map(|x| (x - max).exp()).sum::<f64>() / v.len() as f64).ln()
}

/// Multiple particle filtering: one particle filter per target, each
/// marginalising the others through `L` joint draws from their predicted
/// sets. Returns the next predicted sets and the joint filtered estimate.
pub fn mpf_step<R: Rng + ?Sized>(
    s: &MpfState,
    model: &MultiTargetModel,
    e_factor: &Spd,
    mode: CrossDraw,
    y: &DVector<f64>,
    k: usize,
    rng: &mut R,
) -> Result<(MpfState, DVector<f64>)> {
    let n = s.filters.len();
    let m = s.particles_per_filter();
    let mut estimates = Vec::with_capacity(n);
    let mut next = Vec::with_capacity(n);
    for i in 0..n {
        let draws = draw_indices(mode, n, m, s.cross_draws, rng);
        let mut log_w = mpf_target_log_likelihoods(model, e_factor, &s.filters, i, &draws, y, k);
        for (l, w) in log_w.iter_mut().zip(s.filters[i].weights()) {
            *l += w.ln();
        }
        let weights = normalize_log_weights(&log_w)
            .map_err(|_| Error::FilterDiverged(format!("all weights of target {i} vanished")))?;
        let filtered = ParticleBelief::new(s.filters[i].particles().to_vec(), weights)?;
        estimates.push(filtered.mean());
        let propagated = filtered
            .systematic_resample(rng)
            .into_particles()
            .into_iter()
            .map(|x| model.sample_target_transition(k, &x, rng))
            .collect();
        next.push(ParticleBelief::uniform(propagated)?);
    }
    Ok((MpfState { filters: next, cross_draws: s.cross_draws }, model.assemble(&estimates)))
}

/// Multiple particle filter over a multi-target model.
#[derive(Clone, Debug)]
pub struct Mpf {
    model: MultiTargetModel,
    e_factor: Spd,
    mode: CrossDraw,
    state: MpfState,
}

impl Mpf {
    /// `n_p` is the total particle budget, split evenly over the targets.
    /// `cross_draws` defaults to a third of the per-filter count.
    pub fn new<R: Rng + ?Sized>(
        model: MultiTargetModel,
        prior: &GaussianBelief,
        n_p: usize,
        cross_draws: Option<usize>,
        mode: CrossDraw,
        rng: &mut R,
    ) -> Result<Self> {
        let n = model.targets();
        let m = n_p / n;
        if m == 0 {
            return Err(Error::InvalidParameter(format!("{n_p} particles cannot cover {n} targets")));
        }
        let l = cross_draws.unwrap_or_else(|| default_cross_draws(m));
        let mut filters = Vec::with_capacity(n);
        for i in 0..n {
            let idx: Vec<usize> = model.linear_range(i).chain(model.nonlinear_range(i)).collect();
            let mean = DVector::from_iterator(idx.len(), idx.iter().map(|&a| prior.mean()[a]));
            let cov = prior.cov().select_rows(&idx).select_columns(&idx);
            let sqrt = linalg::psd_sqrt(&cov)?;
            filters.push(ParticleBelief::uniform((0..m).map(|_| sample_gaussian(&mean, &sqrt, rng)).collect())?);
        }
        let e_factor = Spd::new(model.joint().general.cov_e())?;
        Ok(Self { model, e_factor, mode, state: MpfState { filters, cross_draws: l } })
    }

    pub fn state(&self) -> &MpfState {
        &self.state
    }

    pub fn update<R: Rng + ?Sized>(&mut self, k: usize, y: &DVector<f64>, rng: &mut R) -> Result<DVector<f64>> {
        let (next, est) = mpf_step(&self.state, &self.model, &self.e_factor, self.mode, y, k, rng)?;
        self.state = next;
        Ok(est)
    }
}

impl Filter for Mpf {
    fn name(&self) -> &str {
        "mpf"
    }

    fn step(&mut self, k: usize, y: &DVector<f64>, rng: &mut dyn RngCore) -> Result<DVector<f64>> {
        self.update(k, y, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_mean_exp_is_stable() {
        let v = [-1000.0, -1000.0];
        assert!((log_mean_exp(&v) + 1000.0).abs() < 1e-12);
        assert_eq!(default_cross_draws(100), 33);
        assert_eq!(default_cross_draws(1), 1);
    }
}
