//! `N` targets on a plane observed by a square grid of received signal
//! strength sensors.
//!
//! Each target has state `[v; p]`: velocity is the conditionally linear
//! block and position the nonlinear one. Position and velocity noise are
//! driven by the same random acceleration, so the exact per-target process
//! covariance is singular.

use std::f64::consts::{LN_10, PI};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Vector2};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClgModel, ClgSystem, GeneralSsm};
use crate::multitarget::MultiTargetModel;

/// Squared distances below this are clamped inside model callbacks.
const MIN_RANGE2: f64 = 1e-18;
/// Rejection sampling budget for initial placements.
pub const PLACEMENT_ATTEMPTS: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Ssm2Params {
    pub sensors: usize,
    pub side: f64,
    pub ts: f64,
    pub rho: f64,
    pub sigma_a2: f64,
    pub sigma_e2_db: f64,
    pub psi: f64,
    pub d0: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub targets: usize,
    pub horizon: usize,
    pub min_separation: f64,
}

impl Default for Ssm2Params {
    fn default() -> Self {
        Self {
            sensors: 25,
            side: 1000.0,
            ts: 1.0,
            rho: 1.0,
            sigma_a2: 0.1,
            sigma_e2_db: -35.0,
            psi: 1.0,
            d0: 1.0,
            v_min: 0.0,
            v_max: 0.1,
            targets: 5,
            horizon: 120,
            min_separation: 2.0,
        }
    }
}

impl Ssm2Params {
    pub fn grid_side(&self) -> usize {
        (self.sensors as f64).sqrt().round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.grid_side();
        if g * g != self.sensors || g < 2 {
            return Err(Error::InvalidParameter(format!("sensor count {} is not a square ≥ 4", self.sensors)));
        }
        if !(self.v_min < self.v_max) || self.v_min < 0.0 {
            return Err(Error::InvalidParameter("require 0 ≤ v_min < v_max".into()));
        }
        if self.targets == 0 {
            return Err(Error::InvalidParameter("at least one target is required".into()));
        }
        if self.targets > (g - 1) * (g - 1) {
            return Err(Error::InvalidParameter("more targets than grid cells".into()));
        }
        let scales = [self.side, self.ts, self.sigma_a2, self.psi, self.d0];
        if scales.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidParameter("ssm2 scales must be positive".into()));
        }
        Ok(())
    }

    /// Measurement noise variance in linear units (dB²).
    pub fn sigma_e2(&self) -> f64 {
        10f64.powf(self.sigma_e2_db / 10.0)
    }

    /// Sensor positions on a `√P × √P` grid spanning the square, row by row.
    pub fn sensor_grid(&self) -> Vec<Vector2<f64>> {
        let g = self.grid_side();
        let step = self.side / (g - 1) as f64;
        (0..g)
            .flat_map(|r| (0..g).map(move |c| Vector2::new(c as f64 * step, r as f64 * step)))
            .collect()
    }

    /// Exact per-target process covariance in `[v; p]` order.
    pub fn target_cov(&self) -> DMatrix<f64> {
        let t = self.ts;
        let s = self.sigma_a2;
        let mut c = DMatrix::zeros(4, 4);
        for i in 0..2 {
            c[(i, i)] = s * t * t;
            c[(i + 2, i + 2)] = s * t.powi(4) / 4.0;
            c[(i, i + 2)] = s * t.powi(3) / 2.0;
            c[(i + 2, i)] = s * t.powi(3) / 2.0;
        }
        c
    }
}

/// `10 log₁₀(Ψ Σᵢ d₀² / ‖s − pᵢ‖²)`
pub fn ssm2_rss_mean(sensor: &Vector2<f64>, targets: &[Vector2<f64>], psi: f64, d0: f64) -> Result<f64> {
    let mut total = 0.0;
    for p in targets {
        let r2 = (sensor - p).norm_squared();
        if r2.sqrt() <= 1e-9 {
            return Err(Error::TargetOnSensor);
        }
        total += d0 * d0 / r2;
    }
    Ok(10.0 * (psi * total).log10())
}

fn rss_vector(sensors: &[Vector2<f64>], pos: &DVector<f64>, psi: f64, d0: f64) -> DVector<f64> {
    let n = pos.len() / 2;
    DVector::from_iterator(
        sensors.len(),
        sensors.iter().map(|s| {
            let total: f64 = (0..n)
                .map(|i| {
                    let r2 = ((s[0] - pos[2 * i]).powi(2) + (s[1] - pos[2 * i + 1]).powi(2)).max(MIN_RANGE2);
                    d0 * d0 / r2
                })
                .sum();
            10.0 * (psi * total).log10()
        }),
    )
}

/// Derivative of [`rss_vector`] with respect to the stacked positions. The
/// reference power drops out of the logarithm's derivative.
fn rss_jacobian(sensors: &[Vector2<f64>], pos: &DVector<f64>, d0: f64) -> DMatrix<f64> {
    let n = pos.len() / 2;
    let mut j = DMatrix::zeros(sensors.len(), pos.len());
    for (q, s) in sensors.iter().enumerate() {
        let mut total = 0.0;
        for i in 0..n {
            let dx = s[0] - pos[2 * i];
            let dy = s[1] - pos[2 * i + 1];
            let r2 = (dx * dx + dy * dy).max(MIN_RANGE2);
            total += d0 * d0 / r2;
            let c = 2.0 * d0 * d0 / (r2 * r2);
            j[(q, 2 * i)] = c * dx;
            j[(q, 2 * i + 1)] = c * dy;
        }
        let scale = 10.0 / (LN_10 * total);
        j.row_mut(q).scale_mut(scale);
    }
    j
}

/// Shortest distance between segments `[a0, a1]` and `[b0, b1]`.
pub fn segment_distance(a0: &Vector2<f64>, a1: &Vector2<f64>, b0: &Vector2<f64>, b1: &Vector2<f64>) -> f64 {
    fn cross(u: &Vector2<f64>, v: &Vector2<f64>) -> f64 {
        u[0] * v[1] - u[1] * v[0]
    }
    fn point_segment(p: &Vector2<f64>, s0: &Vector2<f64>, s1: &Vector2<f64>) -> f64 {
        let d = s1 - s0;
        let len2 = d.norm_squared();
        let t = if len2 > 0.0 { ((p - s0).dot(&d) / len2).clamp(0.0, 1.0) } else { 0.0 };
        (p - (s0 + d * t)).norm()
    }
    let da = a1 - a0;
    let db = b1 - b0;
    let denom = cross(&da, &db);
    if denom != 0.0 {
        let t = cross(&(b0 - a0), &db) / denom;
        let u = cross(&(b0 - a0), &da) / denom;
        if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
            return 0.0;
        }
    }
    point_segment(a0, b0, b1)
        .min(point_segment(a1, b0, b1))
        .min(point_segment(b0, a0, a1))
        .min(point_segment(b1, a0, a1))
}

/// A built SSM#2 instance.
#[derive(Clone, Debug)]
pub struct Ssm2Instance {
    pub model: MultiTargetModel,
    pub sensors: Vec<Vector2<f64>>,
    /// Joint initial state `[v_1, …, v_N, p_1, …, p_N]`.
    pub initial_state: DVector<f64>,
}

/// Initial `(position, velocity)` pairs, one target per distinct grid cell,
/// with noiseless straight-line paths kept at least `min_separation` apart.
pub fn ssm2_place_targets<R: Rng + ?Sized>(params: &Ssm2Params, rng: &mut R) -> Result<Vec<(Vector2<f64>, Vector2<f64>)>> {
    params.validate()?;
    let cells_per_side = params.grid_side() - 1;
    let cell = params.side / cells_per_side as f64;
    let travel = params.ts * (params.horizon.saturating_sub(1)) as f64;
    let mut cells: Vec<usize> = (0..cells_per_side * cells_per_side).collect();
    for _ in 0..PLACEMENT_ATTEMPTS {
        cells.shuffle(rng);
        let placed: Vec<_> = cells[..params.targets]
            .iter()
            .map(|&c| {
                let (cx, cy) = ((c % cells_per_side) as f64, (c / cells_per_side) as f64);
                let p = Vector2::new((cx + rng.random::<f64>()) * cell, (cy + rng.random::<f64>()) * cell);
                let speed = rng.random_range(params.v_min..params.v_max);
                let heading = rng.random_range(0.0..2.0 * PI);
                (p, Vector2::new(speed * heading.cos(), speed * heading.sin()))
            })
            .collect();
        let clear = (0..placed.len()).all(|i| {
            (i + 1..placed.len()).all(|j| {
                let (pi, vi) = placed[i];
                let (pj, vj) = placed[j];
                segment_distance(&pi, &(pi + vi * travel), &pj, &(pj + vj * travel)) >= params.min_separation
            })
        });
        if clear {
            return Ok(placed);
        }
    }
    Err(Error::PlacementFailure { attempts: PLACEMENT_ATTEMPTS })
}

/// Model, sensor grid and a random admissible initial state.
pub fn ssm2_build<R: Rng + ?Sized>(params: &Ssm2Params, rng: &mut R) -> Result<Ssm2Instance> {
    let placed = ssm2_place_targets(params, rng)?;
    let n = params.targets;
    let mut initial_state = DVector::zeros(4 * n);
    for (i, (p, v)) in placed.iter().enumerate() {
        initial_state.rows_mut(2 * i, 2).copy_from(v);
        initial_state.rows_mut(2 * n + 2 * i, 2).copy_from(p);
    }
    let model = ssm2_model(params)?;
    Ok(Ssm2Instance { model, sensors: params.sensor_grid(), initial_state })
}

/// The model alone, without an initial placement.
pub fn ssm2_model(params: &Ssm2Params) -> Result<MultiTargetModel> {
    params.validate()?;
    let n = params.targets;
    let sensors = Arc::new(params.sensor_grid());
    let p_count = sensors.len();
    let (ts, rho, psi, d0) = (params.ts, params.rho, params.psi, params.d0);
    let cov_e = DMatrix::identity(p_count, p_count) * params.sigma_e2();

    let clg_for = |targets: usize| -> ClgModel {
        let d = 2 * targets;
        let s1 = sensors.clone();
        ClgModel {
            dim_l: d,
            dim_n: d,
            meas_dim: p_count,
            a_n: Arc::new(move |_, _| DMatrix::identity(d, d) * ts),
            f_n: Arc::new(|_, p| p.clone()),
            a_l: Arc::new(move |_, _| DMatrix::identity(d, d) * rho),
            f_l: Arc::new(move |_, _| DVector::zeros(d)),
            g: Arc::new(move |_, p| rss_vector(&s1, p, psi, d0)),
            b: Arc::new(move |_, _| DMatrix::zeros(p_count, d)),
            cov_w_l: DMatrix::identity(d, d) * (params.sigma_a2 * ts * ts),
            cov_w_n: DMatrix::identity(d, d) * (params.sigma_a2 * ts.powi(4) / 4.0),
            cov_e: cov_e.clone(),
        }
    };
    let template = clg_for(1);
    let joint_clg = clg_for(n);

    let d = 4 * n;
    let f = Arc::new(move |_: usize, x: &DVector<f64>| {
        let mut out = x.clone();
        for i in 0..2 * n {
            out[i] = rho * x[i];
            out[2 * n + i] = x[2 * n + i] + ts * x[i];
        }
        out
    });
    let jac_f = Arc::new(move |_: usize, _: &DVector<f64>| {
        let mut j = DMatrix::zeros(d, d);
        for i in 0..2 * n {
            j[(i, i)] = rho;
            j[(2 * n + i, 2 * n + i)] = 1.0;
            j[(2 * n + i, i)] = ts;
        }
        j
    });
    let (s1, s2) = (sensors.clone(), sensors.clone());
    let h = Arc::new(move |_: usize, x: &DVector<f64>| rss_vector(&s1, &x.rows(2 * n, 2 * n).into_owned(), psi, d0));
    let jac_h = Arc::new(move |_: usize, x: &DVector<f64>| {
        let mut j = DMatrix::zeros(p_count, d);
        let jp = rss_jacobian(&s2, &x.rows(2 * n, 2 * n).into_owned(), d0);
        j.view_mut((0, 2 * n), (p_count, 2 * n)).copy_from(&jp);
        j
    });

    let per_target = params.target_cov();
    let mut cov_w = DMatrix::zeros(d, d);
    for i in 0..n {
        for a in 0..2 {
            for b in 0..2 {
                let (ra, rb) = (a * 2 * n + 2 * i, b * 2 * n + 2 * i);
                cov_w.view_mut((ra, rb), (2, 2)).copy_from(&per_target.view((2 * a, 2 * b), (2, 2)));
            }
        }
    }
    let general = GeneralSsm::new(f, h, cov_w, cov_e.clone())?.with_jacobians(jac_f, jac_h);
    let joint = ClgSystem::new(general, joint_clg)?;
    MultiTargetModel::new(template, per_target, n, joint)
}
