use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::time::Instant;

use nalgebra::DVector;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::complexity::{self, Algorithm, Dims, MpfDims};
use crate::dbf::{Dbf, DbfConfig, Mbfa, Sdbf};
use crate::error::{Error, Result};
use crate::filters::{default_cross_draws, Ekf, Filter, Mpf, Rbpf};
use crate::model::{simulate, Trajectory};
use crate::scenario::{Scenario, Ssm2Params};

use super::config::{ExperimentConfig, FilterKind, ScenarioKind};
use super::metrics::{divergence_probability, lost_track, rmse};

/// Outcome of one filter on one simulated trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub scenario: String,
    pub filter: FilterKind,
    pub n_p: usize,
    /// Iterations per recursion, for the iterative networks only.
    pub n_i: Option<usize>,
    /// Seed of the simulated trajectory, shared by every filter on it.
    pub seed: u64,
    /// Absent when the run diverged.
    pub rmse_l: Option<f64>,
    pub rmse_n: Option<f64>,
    pub diverged: bool,
    /// Analytic flops per recursion, when a closed form exists.
    pub flops: Option<f64>,
    pub wall_ms: Option<f64>,
    /// Filtered estimates up to divergence; not part of the CSV.
    pub estimates: Vec<DVector<f64>>,
}

pub const CSV_HEADER: [&str; 10] = ["scenario", "filter", "Np", "ni", "seed", "rmse_l", "rmse_n", "diverged", "flops", "wall_ms"];

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic child seed of `parent` for counter `i`.
pub fn derive_seed(parent: u64, i: u64) -> u64 {
    splitmix(parent ^ splitmix(i))
}

/// One scenario instance of the sweep.
#[derive(Clone, Debug)]
struct ScenarioSpec {
    kind: ScenarioKind,
    targets: usize,
}

impl ScenarioSpec {
    fn tag(&self) -> u64 {
        match self.kind {
            ScenarioKind::Ssm1 => 0,
            ScenarioKind::Ssm2 => self.targets as u64,
        }
    }

    fn build(&self, cfg: &ExperimentConfig, rng: &mut ChaCha12Rng) -> Result<Scenario> {
        match self.kind {
            ScenarioKind::Ssm1 => Scenario::ssm1(&cfg.ssm1, &cfg.prior),
            ScenarioKind::Ssm2 => {
                Scenario::ssm2(&Ssm2Params { targets: self.targets, ..cfg.ssm2.clone() }, &cfg.prior, rng)
            }
        }
    }
}

/// Seed of trajectory `run` of the scenario identified by `tag`.
fn run_seed(master: u64, tag: u64, run: usize) -> u64 {
    derive_seed(derive_seed(master, tag), run as u64)
}

fn filter_seed(run_seed: u64, filter: FilterKind, n_p: usize) -> u64 {
    derive_seed(derive_seed(run_seed, filter as u64 + 1), n_p as u64)
}

/// A scenario instance and its simulated ground truth.
#[derive(Clone, Debug)]
pub struct Simulated {
    pub scenario: Scenario,
    pub truth: Trajectory,
    pub seed: u64,
}

/// Builds the scenario and simulates its ground truth from `seed`.
pub fn simulate_scenario(cfg: &ExperimentConfig, kind: ScenarioKind, targets: usize, seed: u64) -> Result<Simulated> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let scenario = ScenarioSpec { kind, targets }.build(cfg, &mut rng)?;
    let truth = simulate(&scenario.model.joint().general, &scenario.truth_prior(), scenario.horizon, &mut rng)?;
    Ok(Simulated { scenario, truth, seed })
}

fn dbf_config(cfg: &ExperimentConfig, n_p: usize) -> DbfConfig {
    DbfConfig {
        iterations: cfg.experiment.iterations,
        particles: n_p,
        pm_regularization: cfg.dbf.pm_regularization,
        estimate: cfg.dbf.estimate,
    }
}

/// Constructs a filter of the given kind on `scenario`.
pub fn build_filter(
    kind: FilterKind,
    scenario: &Scenario,
    cfg: &ExperimentConfig,
    n_p: usize,
    rng: &mut ChaCha12Rng,
) -> Result<Box<dyn Filter>> {
    let system = scenario.model.joint();
    let prior = &scenario.prior;
    Ok(match kind {
        FilterKind::Ekf => Box::new(Ekf::new(system.general.clone(), prior.clone())?),
        FilterKind::Rbpf => Box::new(Rbpf::new(system.clg.clone(), prior, n_p, rng)?),
        FilterKind::Dbf => Box::new(Dbf::new(system.clone(), prior, dbf_config(cfg, n_p), rng)?),
        FilterKind::Sdbf => Box::new(Sdbf::new(system.clone(), prior, dbf_config(cfg, n_p), rng)?),
        FilterKind::Mpf => {
            Box::new(Mpf::new(scenario.model.clone(), prior, n_p, cfg.mpf.cross_draws, cfg.mpf.mode, rng)?)
        }
        FilterKind::Mbfa => Box::new(Mbfa::new(
            scenario.model.clone(),
            prior,
            dbf_config(cfg, n_p),
            cfg.mpf.cross_draws,
            cfg.mpf.mode,
            rng,
        )?),
    })
}

/// Whether an error means the filter lost the track rather than a misuse.
fn is_divergence(e: &Error) -> bool {
    matches!(
        e,
        Error::FilterDiverged(_)
            | Error::AllWeightsZero
            | Error::SingularCovariance
            | Error::InvalidCovariance
            | Error::EmptyMixture
    )
}

/// Feeds every measurement to `filter`. Returns the estimates produced
/// before any divergence, whether it diverged, and the loop's wall time.
pub fn run_filter(filter: &mut dyn Filter, truth: &Trajectory, rng: &mut dyn RngCore) -> Result<(Vec<DVector<f64>>, bool, f64)> {
    let mut estimates = Vec::with_capacity(truth.horizon());
    let start = Instant::now();
    let mut diverged = false;
    for (k, y) in truth.measurements.iter().enumerate() {
        match filter.step(k, y, rng) {
            Ok(x) if x.iter().all(|v| v.is_finite()) => estimates.push(x),
            Ok(_) => {
                diverged = true;
                break;
            }
            Err(e) if is_divergence(&e) => {
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok((estimates, diverged, start.elapsed().as_secs_f64() * 1e3))
}

/// Mean instrumented flops per recursion of `filter` over `truth`.
pub fn attach_counter(filter: &mut dyn Filter, truth: &Trajectory, rng: &mut dyn RngCore) -> Result<f64> {
    let (out, flops) = complexity::counter::measure(|| run_filter(filter, truth, rng));
    let (estimates, _, _) = out?;
    Ok(if estimates.is_empty() { 0.0 } else { flops / estimates.len() as f64 })
}

/// Closed-form flops per recursion of `kind` on `scenario`.
pub fn analytic_flops(kind: FilterKind, scenario: &Scenario, cfg: &ExperimentConfig, n_p: usize) -> Option<f64> {
    let clg = &scenario.model.joint().clg;
    let mut dims = Dims::clg(clg.meas_dim, clg.dim_l, clg.dim_n, n_p, cfg.experiment.iterations);
    let alg = match kind {
        FilterKind::Ekf => Algorithm::Ekf,
        FilterKind::Rbpf => Algorithm::Rbpf,
        FilterKind::Dbf => Algorithm::Dbf,
        FilterKind::Sdbf => Algorithm::Sdbf,
        FilterKind::Mpf => {
            let n = scenario.targets();
            let m = n_p / n;
            dims.mpf = Some(MpfDims {
                n,
                m,
                l: if n == 1 { 1 } else { cfg.mpf.cross_draws.unwrap_or_else(|| default_cross_draws(m)) },
                d_y: clg.meas_dim,
                d_x_i: scenario.model.template().dim(),
            });
            Algorithm::Mpf
        }
        FilterKind::Mbfa => return None,
    };
    complexity::flops_total(alg, &dims).ok()
}

/// Runs one filter on one simulated trajectory.
pub fn run_single(cfg: &ExperimentConfig, sim: &Simulated, kind: FilterKind, n_p: usize) -> Result<RunRecord> {
    let scenario = &sim.scenario;
    let mut rng = ChaCha12Rng::seed_from_u64(filter_seed(sim.seed, kind, n_p));
    let mut filter = build_filter(kind, scenario, cfg, n_p, &mut rng)?;
    let (estimates, mut diverged, wall_ms) = run_filter(filter.as_mut(), &sim.truth, &mut rng)?;
    let truth = &sim.truth.states[..estimates.len()];
    diverged = diverged
        || lost_track(
            truth,
            &estimates,
            scenario.position_blocks(),
            cfg.divergence_threshold(),
            cfg.experiment.divergence_steps,
        );
    let model = &scenario.model;
    let groups = |f: &dyn Fn(usize) -> std::ops::Range<usize>| -> Vec<Vec<usize>> {
        (0..model.targets()).map(|i| f(i).collect()).collect()
    };
    let (rmse_l, rmse_n) = if diverged {
        (None, None)
    } else {
        (
            Some(rmse(truth, &estimates, &groups(&|i| model.linear_range(i)))?),
            Some(rmse(truth, &estimates, &groups(&|i| model.nonlinear_range(i)))?),
        )
    };
    let iterative = matches!(kind, FilterKind::Dbf | FilterKind::Sdbf | FilterKind::Mbfa);
    Ok(RunRecord {
        scenario: scenario.label.clone(),
        filter: kind,
        n_p,
        n_i: iterative.then_some(cfg.experiment.iterations),
        seed: sim.seed,
        rmse_l,
        rmse_n,
        diverged,
        flops: analytic_flops(kind, scenario, cfg, n_p),
        wall_ms: cfg.experiment.timing.then_some(wall_ms),
        estimates,
    })
}

/// Every `(scenario, filter, N_p, run)` of the configuration, executed on
/// a worker pool. Records come back in sweep order whatever the schedule.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let e = &cfg.experiment;
    let specs: Vec<ScenarioSpec> = match e.scenario {
        ScenarioKind::Ssm1 => vec![ScenarioSpec { kind: ScenarioKind::Ssm1, targets: 1 }],
        ScenarioKind::Ssm2 => {
            cfg.target_counts().into_iter().map(|targets| ScenarioSpec { kind: ScenarioKind::Ssm2, targets }).collect()
        }
    };
    let mut jobs = Vec::new();
    for spec in &specs {
        for &filter in &e.filters {
            for &n_p in &e.particles {
                for run in 0..e.runs {
                    jobs.push((spec, filter, n_p, run));
                }
            }
        }
    }
    let work = || -> Result<Vec<RunRecord>> {
        jobs.par_iter()
            .map(|&(spec, filter, n_p, run)| {
                let sim = simulate_scenario(cfg, spec.kind, spec.targets, run_seed(e.seed, spec.tag(), run))?;
                let mut rec = run_single(cfg, &sim, filter, n_p)?;
                rec.estimates = Vec::new();
                Ok(rec)
            })
            .collect()
    };
    match e.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|err| Error::InvalidParameter(err.to_string()))?
            .install(work),
        None => work(),
    }
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(String::new, T::to_string)
}

/// Writes the records as CSV with the fixed header.
pub fn write_csv<W: Write>(records: &[RunRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.scenario.clone(),
            r.filter.to_string(),
            r.n_p.to_string(),
            opt(&r.n_i),
            r.seed.to_string(),
            opt(&r.rmse_l),
            opt(&r.rmse_n),
            r.diverged.to_string(),
            opt(&r.flops),
            opt(&r.wall_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads records written by [`write_csv`]; estimates come back empty.
pub fn read_csv<R: Read>(input: R) -> Result<Vec<RunRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Io(format!("unexpected CSV header `{}`", header.iter().collect::<Vec<_>>().join(","))));
    }
    let parse_err = |line: u64, what: &str| Error::Io(format!("line {line}: bad {what}"));
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let num = |i: usize, what: &str| -> Result<Option<f64>> {
            match &row[i] {
                "" => Ok(None),
                s => s.parse().map(Some).map_err(|_| parse_err(line, what)),
            }
        };
        out.push(RunRecord {
            scenario: row[0].to_string(),
            filter: row[1].parse()?,
            n_p: row[2].parse().map_err(|_| parse_err(line, "Np"))?,
            n_i: match &row[3] {
                "" => None,
                s => Some(s.parse().map_err(|_| parse_err(line, "ni"))?),
            },
            seed: row[4].parse().map_err(|_| parse_err(line, "seed"))?,
            rmse_l: num(5, "rmse_l")?,
            rmse_n: num(6, "rmse_n")?,
            diverged: row[7].parse().map_err(|_| parse_err(line, "diverged"))?,
            flops: num(8, "flops")?,
            wall_ms: num(9, "wall_ms")?,
            estimates: Vec::new(),
        });
    }
    Ok(out)
}

/// Aggregates of one `(scenario, filter, N_p, n_i)` cell.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub scenario: String,
    pub filter: FilterKind,
    pub n_p: usize,
    pub n_i: Option<usize>,
    pub runs: usize,
    /// Mean over the runs that did not diverge.
    pub rmse_l: Option<f64>,
    pub rmse_n: Option<f64>,
    pub p_fd: f64,
    pub flops: Option<f64>,
    pub wall_ms: Option<f64>,
}

/// Order-independent mean: values are sorted before summation.
fn mean(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(v.iter().sum::<f64>() / v.len() as f64)
}

/// Groups records by cell; the result is sorted by cell and does not
/// depend on the order of `records`.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut cells: BTreeMap<(String, FilterKind, usize, Option<usize>), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        cells.entry((r.scenario.clone(), r.filter, r.n_p, r.n_i)).or_default().push(r);
    }
    cells
        .into_iter()
        .map(|((scenario, filter, n_p, n_i), rs)| SummaryRow {
            runs: rs.len(),
            rmse_l: mean(rs.iter().filter_map(|r| r.rmse_l).collect()),
            rmse_n: mean(rs.iter().filter_map(|r| r.rmse_n).collect()),
            p_fd: divergence_probability(rs.iter().map(|r| r.diverged)).expect("cells are nonempty"),
            flops: rs[0].flops,
            wall_ms: mean(rs.iter().filter_map(|r| r.wall_ms).collect()),
            scenario,
            filter,
            n_p,
            n_i,
        })
        .collect()
}

/// Fixed-width text table of [`summarize`] output.
pub fn format_summary(rows: &[SummaryRow]) -> String {
    let f = |v: Option<f64>, p: usize| v.map_or_else(|| "-".to_string(), |x| format!("{x:.p$}"));
    let mut s = format!(
        "{:<10} {:<6} {:>6} {:>3} {:>5} {:>10} {:>10} {:>6} {:>12} {:>10}\n",
        "scenario", "filter", "Np", "ni", "runs", "rmse_l", "rmse_n", "P_FD", "flops", "wall_ms"
    );
    for r in rows {
        s += &format!(
            "{:<10} {:<6} {:>6} {:>3} {:>5} {:>10} {:>10} {:>6.3} {:>12} {:>10}\n",
            r.scenario,
            r.filter.name(),
            r.n_p,
            r.n_i.map_or_else(|| "-".to_string(), |n| n.to_string()),
            r.runs,
            f(r.rmse_l, 5),
            f(r.rmse_n, 5),
            r.p_fd,
            f(r.flops, 1),
            f(r.wall_ms, 2),
        );
    }
    s
}
