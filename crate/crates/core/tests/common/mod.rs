//! Checks shared by the integration tests and the acceptance report.
#![allow(dead_code)]

use std::sync::Arc;

use mbf::dbf::{Dbf, DbfConfig, DbfModel, DbfRecursionState};
use mbf::filters::{Ekf, Rbpf};
use mbf::gaussian::{
    from_canonical, gaussian_correlation, gaussian_product, moment_match_mixture, to_canonical, GaussianBelief,
    MixtureComponent,
};
use mbf::harness::{simulate_scenario, ExperimentConfig, ScenarioKind};
use mbf::model::{simulate, ClgModel, ClgSystem, GeneralSsm};
use mbf::particle::{normalize_log_weights, normalize_weights, systematic_indices, ParticleBelief};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Covariance-form Kalman filter with the Joseph update.
pub struct Kalman {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl Kalman {
    pub fn update(&mut self, h: &DMatrix<f64>, c: &DVector<f64>, r: &DMatrix<f64>, y: &DVector<f64>) {
        let s = h * &self.cov * h.transpose() + r;
        let k = &self.cov * h.transpose() * s.try_inverse().unwrap();
        self.mean = &self.mean + &k * (y - h * &self.mean - c);
        let i_kh = DMatrix::identity(self.mean.len(), self.mean.len()) - &k * h;
        self.cov = &i_kh * &self.cov * i_kh.transpose() + &k * r * k.transpose();
    }

    pub fn predict(&mut self, a: &DMatrix<f64>, b: &DVector<f64>, q: &DMatrix<f64>) {
        self.mean = a * &self.mean + b;
        self.cov = a * &self.cov * a.transpose() + q;
    }
}

pub fn random_spd(d: usize, scale: f64, rng: &mut ChaCha12Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    (&a * a.transpose() + DMatrix::identity(d, d)) * scale
}

/// Largest deviation of the EKF from the Kalman filter over 100 steps of
/// a random stable linear model, across filtered means, filtered
/// covariances and predicted means.
pub fn ekf_kalman_gap(seed: u64) -> f64 {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let (d, p) = (4, 2);
    let a = DMatrix::from_fn(d, d, |i, j| if i == j { 0.9 } else { rng.random_range(-0.05..0.05) });
    let h = DMatrix::from_fn(p, d, |_, _| rng.random_range(-1.0..1.0));
    let b = DVector::from_fn(d, |_, _| rng.random_range(-0.5..0.5));
    let q = random_spd(d, 0.1, &mut rng);
    let r = random_spd(p, 0.3, &mut rng);
    let (a1, b1, h1, a2, h2) = (a.clone(), b.clone(), h.clone(), a.clone(), h.clone());
    let model = GeneralSsm::new(
        Arc::new(move |_, x| &a1 * x + &b1),
        Arc::new(move |_, x| &h1 * x),
        q.clone(),
        r.clone(),
    )
    .unwrap()
    .with_jacobians(Arc::new(move |_, _| a2.clone()), Arc::new(move |_, _| h2.clone()));
    let prior = GaussianBelief::new(DVector::from_element(d, 1.0), random_spd(d, 2.0, &mut rng)).unwrap();
    let traj = simulate(&model, &prior, 100, &mut rng).unwrap();

    let mut ekf = Ekf::new(model, prior.clone()).unwrap();
    let mut kf = Kalman { mean: prior.mean().clone(), cov: prior.cov().clone() };
    let zero = DVector::zeros(p);
    let mut gap: f64 = 0.0;
    for (k, y) in traj.measurements.iter().enumerate() {
        let filt = ekf.update(k, y).unwrap().clone();
        kf.update(&h, &zero, &r, y);
        gap = gap.max((filt.mean() - &kf.mean).amax()).max((filt.cov() - &kf.cov).amax());
        kf.predict(&a, &b, &q);
        gap = gap.max((ekf.state().pred.mean() - &kf.mean).amax());
    }
    gap
}

/// A CLG model whose nonlinear state is a clock `x^N_{k+1} = x^N_k + 0.1`
/// with process noise `cov_w_n`, so for tiny noise every particle follows
/// the same path and the linear block is an ordinary linear Gaussian
/// system.
pub struct Clock {
    pub clg: ClgModel,
    a_l: fn(f64) -> DMatrix<f64>,
    b: fn(f64) -> DMatrix<f64>,
}

fn clock_a_l(t: f64) -> DMatrix<f64> {
    let (s, c) = (0.3 * t).sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c]) * 0.97
}

fn clock_b(t: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[t.cos(), t.sin(), 1.0, -0.5])
}

pub fn clock(cov_w_n: f64, time_varying: bool) -> Clock {
    let (a_l, b): (fn(f64) -> DMatrix<f64>, fn(f64) -> DMatrix<f64>) = if time_varying {
        (clock_a_l, clock_b)
    } else {
        (|_| clock_a_l(0.5), |_| clock_b(0.5))
    };
    let clg = ClgModel {
        dim_l: 2,
        dim_n: 1,
        meas_dim: 2,
        a_n: Arc::new(|_, _| DMatrix::zeros(1, 2)),
        f_n: Arc::new(|_, x| x.add_scalar(0.1)),
        a_l: Arc::new(move |_, x| a_l(x[0])),
        f_l: Arc::new(|_, x| DVector::from_vec(vec![x[0].sin(), 0.2])),
        g: Arc::new(|_, x| DVector::from_vec(vec![x[0].cos(), x[0] * 0.5])),
        b: Arc::new(move |_, x| b(x[0])),
        cov_w_l: DMatrix::from_row_slice(2, 2, &[0.2, 0.05, 0.05, 0.1]),
        cov_w_n: DMatrix::identity(1, 1) * cov_w_n,
        cov_e: DMatrix::from_row_slice(2, 2, &[0.3, 0.0, 0.0, 0.2]),
    };
    Clock { clg, a_l, b }
}

pub fn clock_prior(n_var: f64) -> GaussianBelief {
    let mut cov = DMatrix::zeros(3, 3);
    cov[(0, 0)] = 2.0;
    cov[(1, 1)] = 1.0;
    cov[(0, 1)] = 0.3;
    cov[(1, 0)] = 0.3;
    cov[(2, 2)] = n_var;
    GaussianBelief::new(DVector::from_vec(vec![1.0, -1.0, 0.0]), cov).unwrap()
}

/// Kalman filter on the linear block of a clock model; returns the
/// filtered means.
pub fn clock_oracle(m: &Clock, prior: &GaussianBelief, ys: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let mut kf = Kalman {
        mean: prior.mean().rows(0, 2).into_owned(),
        cov: prior.cov().view((0, 0), (2, 2)).into_owned(),
    };
    let mut t = prior.mean()[2];
    let mut out = Vec::new();
    for y in ys {
        let x = DVector::from_element(1, t);
        kf.update(&(m.b)(t), &(m.clg.g)(0, &x), &m.clg.cov_e, y);
        out.push(kf.mean.clone());
        kf.predict(&(m.a_l)(t), &(m.clg.f_l)(0, &x), &m.clg.cov_w_l);
        t += 0.1;
    }
    out
}

/// Worst linear-block deviation of the RBPF from the Kalman filter on a
/// noiseless clock, and worst clock error.
pub fn rbpf_kalman_gap(seed: u64) -> (f64, f64) {
    let m = clock(0.0, true);
    let prior = clock_prior(0.0);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let traj = simulate(&m.clg.to_general().unwrap(), &prior, 100, &mut rng).unwrap();
    let expected = clock_oracle(&m, &prior, &traj.measurements);
    let mut rbpf = Rbpf::new(m.clg.clone(), &prior, 20, &mut rng).unwrap();
    let (mut gap, mut clock_err): (f64, f64) = (0.0, 0.0);
    for (k, y) in traj.measurements.iter().enumerate() {
        let est = rbpf.update(k, y, &mut rng).unwrap();
        gap = gap.max((est.rows(0, 2) - &expected[k]).amax());
        clock_err = clock_err.max((est[2] - 0.1 * k as f64).abs());
    }
    (gap, clock_err)
}

/// Worst linear-block deviation of the DBF from the Kalman filter on an
/// almost noiseless clock with constant matrices, and worst clock error.
pub fn dbf_kalman_gap(seed: u64) -> (f64, f64) {
    let m = clock(1e-10, false);
    let prior = clock_prior(1e-10);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let system = ClgSystem::from_clg(m.clg.clone()).unwrap();
    let traj = simulate(&system.general, &prior, 100, &mut rng).unwrap();
    let expected = clock_oracle(&m, &prior, &traj.measurements);
    let mut dbf = Dbf::new(system, &prior, DbfConfig::new(50, 1), &mut rng).unwrap();
    let (mut gap, mut clock_err): (f64, f64) = (0.0, 0.0);
    for (k, y) in traj.measurements.iter().enumerate() {
        let est = dbf.update(k, y, &mut rng).unwrap();
        gap = gap.max((est.rows(0, 2) - &expected[k]).amax());
        clock_err = clock_err.max((est[2] - 0.1 * k as f64).abs());
    }
    (gap, clock_err)
}

pub fn spd(d: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0..1.0f64, d * d).prop_map(move |v| {
        let a = DMatrix::from_vec(d, d, v);
        &a * a.transpose() + DMatrix::identity(d, d) * 0.2
    })
}

pub fn belief(d: usize) -> impl Strategy<Value = GaussianBelief> {
    (prop::collection::vec(-3.0..3.0f64, d), spd(d))
        .prop_map(|(m, c)| GaussianBelief::new(DVector::from_vec(m), c).unwrap())
}

fn product(a: &GaussianBelief, b: &GaussianBelief) -> GaussianBelief {
    let p = gaussian_product(&to_canonical(a).unwrap(), &to_canonical(b).unwrap()).unwrap();
    from_canonical(&p).unwrap()
}

fn close(a: &GaussianBelief, b: &GaussianBelief, tol: f64) -> bool {
    let scale = 1.0 + a.mean().amax().max(a.cov().amax());
    (a.mean() - b.mean()).amax() < tol * scale && (a.cov() - b.cov()).amax() < tol * scale
}

/// Outcome of one invariant: `Err` holds the shrunk counterexample.
pub type Check = Result<(), String>;

fn run<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Check
where
    S::Value: std::fmt::Debug,
{
    TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() })
        .run(&strategy, test)
        .map_err(|e| e.to_string())
}

pub fn product_commutes() -> Check {
    run(64, (belief(3), belief(3)), |(a, b)| {
        prop_assert!(close(&product(&a, &b), &product(&b, &a), 1e-10));
        Ok(())
    })
}

pub fn product_associates() -> Check {
    run(64, (belief(3), belief(3), belief(3)), |(a, b, c)| {
        let left = product(&product(&a, &b), &c);
        let right = product(&a, &product(&b, &c));
        prop_assert!(close(&left, &right, 1e-9));
        Ok(())
    })
}

pub fn correlation_matches_quadrature() -> Check {
    run(64, (-3.0..3.0f64, -3.0..3.0f64, 0.1..4.0f64, 0.1..4.0f64), |(ma, mb, va, vb)| {
        let a = GaussianBelief::new(DVector::from_element(1, ma), DMatrix::from_element(1, 1, va)).unwrap();
        let b = GaussianBelief::new(DVector::from_element(1, mb), DMatrix::from_element(1, 1, vb)).unwrap();
        let pdf = |x: f64, m: f64, v: f64| (-(x - m).powi(2) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
        // composite Simpson over ±12 standard deviations
        let (lo, hi, n) = (-30.0, 30.0, 20_000);
        let h = (hi - lo) / n as f64;
        let mut s = 0.0;
        for i in 0..=n {
            let x = lo + i as f64 * h;
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * pdf(x, ma, va) * pdf(x, mb, vb);
        }
        let quad = s * h / 3.0;
        prop_assert!((gaussian_correlation(&a, &b).unwrap() - quad).abs() < 1e-6);
        Ok(())
    })
}

pub fn moment_matching_is_exact() -> Check {
    let comps = prop::collection::vec((0.05..1.0f64, belief(2), prop::collection::vec(-5.0..5.0f64, 2)), 1..6);
    run(64, comps, |comps| {
        let mix: Vec<MixtureComponent> = comps
            .iter()
            .map(|(w, g, p)| MixtureComponent { weight: *w, point: DVector::from_vec(p.clone()), gauss: Some(g.clone()) })
            .collect();
        let got = moment_match_mixture(&mix).unwrap();
        let total: f64 = comps.iter().map(|c| c.0).sum();
        let full = |g: &GaussianBelief, p: &[f64]| DVector::from_vec([g.mean().as_slice(), p].concat());
        let mean = comps.iter().fold(DVector::zeros(4), |acc, (w, g, p)| acc + full(g, p) * (*w / total));
        let mut cov = DMatrix::zeros(4, 4);
        for (w, g, p) in &comps {
            let dev = full(g, p) - &mean;
            let mut c = &dev * dev.transpose();
            let mut block = c.view_mut((0, 0), (2, 2));
            block += g.cov();
            cov += c * (*w / total);
        }
        prop_assert!((got.mean() - &mean).amax() < 1e-10);
        prop_assert!((got.cov() - &cov).amax() < 1e-10);
        Ok(())
    })
}

pub fn weights_normalise() -> Check {
    let w = prop::collection::vec(0.0..10.0f64, 1..50).prop_filter("nonzero", |w| w.iter().any(|x| *x > 0.0));
    run(64, w, |w| {
        let (n, _) = normalize_weights(&w).unwrap();
        prop_assert!((n.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(n.iter().all(|x| *x >= 0.0));
        let logs: Vec<f64> = w.iter().map(|x| x.ln() - 800.0).collect();
        let from_logs = normalize_log_weights(&logs).unwrap();
        for (a, b) in n.iter().zip(&from_logs) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        Ok(())
    })
}

pub fn resampling_conserves_particle_count() -> Check {
    run(64, (prop::collection::vec(0.01..1.0f64, 1..60), 1usize..80, any::<u64>()), |(w, n, seed)| {
        let (w, _) = normalize_weights(&w).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let idx = systematic_indices(&w, n, &mut rng);
        prop_assert_eq!(idx.len(), n);
        prop_assert!(idx.iter().all(|&i| i < w.len()));
        let belief = ParticleBelief::new((0..w.len()).map(|i| DVector::from_element(1, i as f64)).collect(), w).unwrap();
        prop_assert_eq!(belief.systematic_resample(&mut rng).len(), belief.len());
        Ok(())
    })
}

/// With one iteration the step-3 pseudo-measurement weights are constant
/// across particles, and the particle count survives every step.
pub fn first_iteration_feedback_is_neutral() -> Check {
    run(8, any::<u64>(), |seed| {
        let cfg = ExperimentConfig::default();
        let sim = simulate_scenario(&cfg, ScenarioKind::Ssm1, 1, seed).unwrap();
        let model = DbfModel::new(sim.scenario.model.joint().clone(), DbfConfig::new(64, 1)).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut st = DbfRecursionState::init(&model, &sim.scenario.prior, &mut rng).unwrap();
        for k in 0..5 {
            let y = &sim.truth.measurements[k];
            st.phase1(&model, y, k).unwrap();
            st.step1(model.dim_l(), 1).unwrap();
            st.step3(&model, k).unwrap();
            let w = &st.f2_weights_pm;
            let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = w.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert!((max - min) <= 1e-12 * max.abs().max(1.0));
            st.step2(&model, y, k).unwrap();
            st.step4(&mut rng).unwrap();
            st.step5(&model, k, &mut rng).unwrap();
            st.step6(&model, k).unwrap();
            st.phase3(&model, k).unwrap();
            prop_assert_eq!(st.particle_count(), 64);
        }
        Ok(())
    })
}

pub fn seeded_runs_are_bit_identical() -> Check {
    run(8, any::<u64>(), |seed| {
        let cfg = ExperimentConfig::default();
        let sim = simulate_scenario(&cfg, ScenarioKind::Ssm1, 1, seed).unwrap();
        let run = || {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let mut f = Dbf::new(sim.scenario.model.joint().clone(), &sim.scenario.prior, DbfConfig::new(32, 2), &mut rng).unwrap();
            sim.truth.measurements.iter().enumerate().take(50).map(|(k, y)| f.update(k, y, &mut rng).unwrap()).collect::<Vec<_>>()
        };
        prop_assert_eq!(run(), run());
        Ok(())
    })
}

/// Every message-algebra invariant, by name.
pub fn invariant_suite() -> Vec<(&'static str, fn() -> Check)> {
    vec![
        ("Gaussian product commutativity", product_commutes),
        ("Gaussian product associativity", product_associates),
        ("correlation vs 1-D quadrature", correlation_matches_quadrature),
        ("moment-matching exactness", moment_matching_is_exact),
        ("weight normalisation", weights_normalise),
        ("particle-count conservation", resampling_conserves_particle_count),
        ("iteration-1 pseudo-measurement neutrality", first_iteration_feedback_is_neutral),
        ("seeded bit-determinism", seeded_runs_are_bit_identical),
    ]
}
