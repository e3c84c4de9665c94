//! Closed-form flop models.
//!
//! [`flops_total`] evaluates the dominant-order polynomial of each
//! algorithm; [`flop_ledger`] lists the cost of every task of one
//! recursion so the two can be compared. Counts for the instrumented
//! implementation come from [`counter`].

pub mod counter;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimensions entering the cost formulas. Fields an algorithm needs but
/// which are absent make the evaluation fail with
/// [`Error::MissingDimension`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Dims {
    pub p: Option<usize>,
    pub d: Option<usize>,
    pub d_l: Option<usize>,
    pub d_n: Option<usize>,
    pub n_p: Option<usize>,
    pub n_i: Option<usize>,
    pub mpf: Option<MpfDims>,
    #[serde(default)]
    pub callbacks: CallbackCosts,
}

/// Dimensions of a multiple particle filter: `n` filters with `M`
/// particles each, `L` cross draws, measurement size `d_y` and per-filter
/// state size `d_x_i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MpfDims {
    pub n: usize,
    pub m: usize,
    pub l: usize,
    pub d_y: usize,
    pub d_x_i: usize,
}

/// Cost of evaluating the model callbacks, and the per-particle cost of
/// resampling. All zero unless overridden.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CallbackCosts {
    /// `H_k`
    pub h: f64,
    /// `h_k(x)`
    pub h_fn: f64,
    /// `F_k`
    pub f: f64,
    /// `f_k(x)`
    pub f_fn: f64,
    pub b: f64,
    pub g: f64,
    pub a_l: f64,
    pub a_n: f64,
    pub f_l: f64,
    pub f_n: f64,
    /// MPF measurement function.
    pub f_y: f64,
    /// MPF transition function.
    pub f_x: f64,
    /// Resampling cost per particle; `C_R(N) = resampling · N`.
    pub resampling: f64,
}

impl Dims {
    /// Dimensions of a single-model comparison: measurement size `p`,
    /// substates `d_l` and `d_n`, `n_p` particles and `n_i` iterations.
    pub fn clg(p: usize, d_l: usize, d_n: usize, n_p: usize, n_i: usize) -> Self {
        Self {
            p: Some(p),
            d: Some(d_l + d_n),
            d_l: Some(d_l),
            d_n: Some(d_n),
            n_p: Some(n_p),
            n_i: Some(n_i),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let (Some(d), Some(l), Some(n)) = (self.d, self.d_l, self.d_n) {
            if d != l + n {
                return Err(Error::DimensionMismatch { expected: l + n, found: d });
            }
        }
        Ok(())
    }

    fn get(v: Option<usize>, name: &'static str) -> Result<f64> {
        v.map(|x| x as f64).ok_or(Error::MissingDimension(name))
    }

    fn p(&self) -> Result<f64> {
        Self::get(self.p, "P")
    }
    fn d(&self) -> Result<f64> {
        match (self.d, self.d_l, self.d_n) {
            (Some(d), _, _) => Ok(d as f64),
            (None, Some(l), Some(n)) => Ok((l + n) as f64),
            _ => Err(Error::MissingDimension("D")),
        }
    }
    fn d_l(&self) -> Result<f64> {
        Self::get(self.d_l, "D_L")
    }
    fn d_n(&self) -> Result<f64> {
        Self::get(self.d_n, "D_N")
    }
    fn n_p(&self) -> Result<f64> {
        Self::get(self.n_p, "N_p")
    }
    fn n_i(&self) -> Result<f64> {
        Self::get(self.n_i, "n_i")
    }
    fn mpf(&self) -> Result<MpfDims> {
        self.mpf.ok_or(Error::MissingDimension("MPF dimensions"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Dbf,
    Sdbf,
    Ekf,
    Rbpf,
    Mpf,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dbf" => Ok(Self::Dbf),
            "sdbf" => Ok(Self::Sdbf),
            "ekf" => Ok(Self::Ekf),
            "rbpf" => Ok(Self::Rbpf),
            "mpf" => Ok(Self::Mpf),
            other => Err(Error::InvalidParameter(format!("unknown algorithm `{other}`"))),
        }
    }
}

/// Dominant-order flops of one recursion.
pub fn flops_total(alg: Algorithm, dims: &Dims) -> Result<f64> {
    dims.validate()?;
    Ok(match alg {
        Algorithm::Ekf => {
            let (p, d) = (dims.p()?, dims.d()?);
            2.0 * p * d * d + 2.0 * p * p * d + 2.0 * p.powi(3) / 3.0 + 6.0 * d.powi(3)
        }
        Algorithm::Rbpf => {
            let (p, l, n, np) = (dims.p()?, dims.d_l()?, dims.d_n()?, dims.n_p()?);
            np * (4.0 * p * l * l
                + 6.0 * p * p * l
                + 2.0 * p.powi(3) / 3.0
                + 6.0 * l.powi(3)
                + 4.0 * l * l * n
                + 6.0 * l * n * n
                + n.powi(3) / 3.0)
        }
        Algorithm::Dbf => {
            let d = dims.d()?;
            dual_total(dims, d)?
        }
        Algorithm::Sdbf => {
            let l = dims.d_l()?;
            dual_total(dims, l)?
        }
        Algorithm::Mpf => {
            let m = dims.mpf()?;
            let (n, mm, l, dy, dx) = (m.n as f64, m.m as f64, m.l as f64, m.d_y as f64, m.d_x_i as f64);
            n * (2.0 * mm * l * dy.powi(3) / 3.0 + mm * dx.powi(3) / 3.0)
        }
    })
}

/// Shared form of the DBF and SDBF totals; `d1` is the dimension of F1.
fn dual_total(dims: &Dims, d1: f64) -> Result<f64> {
    let (p, l, n, np, ni) = (dims.p()?, dims.d_l()?, dims.d_n()?, dims.n_p()?, dims.n_i()?);
    Ok(2.0 * p * d1 * d1 + 4.0 * p * p * d1 + 16.0 * d1.powi(3) / 3.0 + 14.0 * ni * d1.powi(3) / 3.0
        + ni * np
            * (2.0 * p * l * l
                + 2.0 * p * p * l
                + 2.0 * p.powi(3) / 3.0
                + 6.0 * l.powi(3)
                + 6.0 * l * n * n
                + 4.0 * l * l * n
                + n.powi(3) / 3.0))
}

/// Itemised cost of one recursion.
#[derive(Clone, Debug, PartialEq)]
pub struct FlopLedger {
    pub items: Vec<(String, f64)>,
    pub total: f64,
}

impl FlopLedger {
    fn from_items(items: Vec<(String, f64)>) -> Self {
        let total = items.iter().map(|(_, f)| f).sum();
        Self { items, total }
    }

    /// Flops of the first item whose name starts with `prefix`.
    pub fn get(&self, prefix: &str) -> Option<f64> {
        self.items.iter().find(|(n, _)| n.starts_with(prefix)).map(|(_, f)| *f)
    }

    /// Sum over the items whose name starts with `prefix`.
    pub fn sum(&self, prefix: &str) -> f64 {
        self.items.iter().filter(|(n, _)| n.starts_with(prefix)).map(|(_, f)| f).sum()
    }

    /// CSV with a `task,flops` header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["task", "flops"])?;
        for (task, flops) in &self.items {
            w.write_record([task.as_str(), &flops.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Cholesky factorisation plus triangular inversion of an `n × n` matrix.
fn chol_inverse(n: f64) -> f64 {
    2.0 * n.powi(3) / 3.0 + 3.0 * n * n / 2.0 + 5.0 * n / 6.0
}

/// Per-task costs of one recursion, callbacks included.
pub fn flop_ledger(alg: Algorithm, dims: &Dims) -> Result<FlopLedger> {
    dims.validate()?;
    let items = match alg {
        Algorithm::Ekf => ekf_items(dims)?,
        Algorithm::Rbpf => rbpf_items(dims)?,
        Algorithm::Dbf => dual_items(dims, false)?,
        Algorithm::Sdbf => dual_items(dims, true)?,
        Algorithm::Mpf => mpf_items(dims)?,
    };
    Ok(FlopLedger::from_items(items.into_iter().map(|(n, f)| (n.to_string(), f)).collect()))
}

fn ekf_items(dims: &Dims) -> Result<Vec<(&'static str, f64)>> {
    let (p, d) = (dims.p()?, dims.d()?);
    let c = &dims.callbacks;
    Ok(vec![
        ("MU: Omega", c.h + 2.0 * p * p * d + 2.0 * p * d * d - p * d),
        ("MU: L", 2.0 * p.powi(3) / 3.0 + 3.0 * p * p / 2.0 + 5.0 * p / 6.0 + 2.0 * p * d * d + 2.0 * p * p * d - 2.0 * p * d),
        ("MU: eta", c.h_fn + 2.0 * p * d + p),
        ("MU: C", 2.0 * d.powi(3) + 2.0 * p * d * d - d * d),
        ("TU: eta", c.f_fn),
        ("TU: C", c.f + 4.0 * d.powi(3) - d * d),
    ])
}

fn rbpf_items(dims: &Dims) -> Result<Vec<(&'static str, f64)>> {
    let (p, l, n, np) = (dims.p()?, dims.d_l()?, dims.d_n()?, dims.n_p()?);
    let d = l + n;
    let c = &dims.callbacks;
    Ok(vec![
        ("MU nonlinear: eta1", np * (c.b + c.g + 2.0 * p * l)),
        ("MU nonlinear: C1", np * (2.0 * p * l * l + 2.0 * p * p * l - p * l)),
        ("MU nonlinear: w", np * (4.0 * p.powi(3) + 21.0 * p * p + 17.0 * p + 6.0) / 6.0),
        ("MU nonlinear: normalisation", 2.0 * np - 1.0),
        ("MU nonlinear: resampling", c.resampling * np),
        ("MU1 linear: w1", np * (c.b + c.g + 2.0 * p * p * l + 2.0 * p * l - p * l - l + p)),
        ("MU1 linear: W1", np * (2.0 * p * l * l + 2.0 * p * p * l - l * l - p * l)),
        ("MU1 linear: C2", np * (4.0 * l.powi(3) / 3.0 + 4.0 * l * l + 5.0 * l / 3.0)),
        ("MU1 linear: eta2", np * l * (4.0 * l - 1.0)),
        ("MU2 linear: z", np * (c.f_n + n)),
        (
            "MU2 linear: C4",
            np * (c.a_n + 2.0 * l.powi(3) / 3.0 + 2.0 * l * l * n + 2.0 * l * n * n + 3.0 * l * l / 2.0 - l * n
                + 5.0 * l / 6.0),
        ),
        ("MU2 linear: eta4", np * (2.0 * l * n * n + 2.0 * l * l + l * n - 2.0 * l + n)),
        ("TU nonlinear: eta3", np * (c.a_n + c.f_n + 2.0 * l * n)),
        ("TU nonlinear: C3", np * l * n * (2.0 * d - 1.0)),
        ("TU nonlinear: sample", np * (n.powi(3) / 3.0 + 3.0 * n * n + 5.0 * n / 3.0)),
        ("TU linear: eta", np * (c.a_l + c.f_l + 2.0 * l * l)),
        ("TU linear: C", np * l * l * (4.0 * l - 1.0)),
    ])
}

/// DBF tasks; with `simplified` the SDBF substitutions apply.
fn dual_items(dims: &Dims, simplified: bool) -> Result<Vec<(&'static str, f64)>> {
    let (p, l, n, np, ni) = (dims.p()?, dims.d_l()?, dims.d_n()?, dims.n_p()?, dims.n_i()?);
    let d_full = l + n;
    let c = &dims.callbacks;
    // Dimension and nonlinear size as seen by F1.
    let (d1, n1) = if simplified { (l, 0.0) } else { (dims.d()?, n) };
    let c4 = if simplified {
        ni * (2.0 * np * l * l + 2.0 * l * l + np)
    } else {
        ni * (2.0 * np * l * l + np * n * n + 2.0 * l * l + 2.0 * n * n + np * l * n + 2.0 * l * n + 3.0 * np)
    };
    Ok(vec![
        ("F1 MU1: W2", c.h + 2.0 * p * d1 * d1 + 2.0 * p * p * d1 - p * d1),
        ("F1 MU1: w2", c.b + c.g + 2.0 * p * p * d1 + 5.0 * p * l + 3.0 * p * n1 - p),
        ("F1 MU1: C2", chol_inverse(d1)),
        ("F1 MU1: eta2", d1 * (2.0 * d1 - 1.0)),
        ("F1 MU2: C3", ni * d1 * d1 * (2.0 * d1 - 1.0)),
        ("F1 MU2: eta3", ni * (4.0 * d1 * d1 - d1)),
        ("F2 MU1: eta1", ni * np * (c.b + c.g + 2.0 * p * l)),
        ("F2 MU1: C1", ni * np * (2.0 * p * l * l + 2.0 * p * p * l - p * l)),
        ("F2 MU1: w1", ni * np * (4.0 * p.powi(3) + 21.0 * p * p + 17.0 * p + 6.0) / 6.0),
        ("F2 MU2: w4", ni * np),
        ("F2 MU2: normalisation", ni * (2.0 * np - 1.0)),
        ("F2 MU2: resampling", ni * c.resampling * np),
        ("PM to F2: eta_z", ni * np * (c.a_l + c.f_l + 2.0 * l * l + l)),
        ("PM to F2: C_z", ni * np * 4.0 * l.powi(3)),
        ("PM to F2: W_z", ni * np * chol_inverse(l)),
        ("PM to F2: w_z", ni * np * l * (2.0 * l - 1.0)),
        ("PM to F2: W3", ni * np * l * l),
        ("PM to F2: w3 vector", ni * np * 2.0 * l * l),
        ("PM to F2: C3", ni * np * chol_inverse(l)),
        ("PM to F2: eta3", ni * np * l * (2.0 * l - 1.0)),
        ("PM to F2: w3", ni * np * (6.0 * l * l + 3.0 * l + 1.0)),
        ("PM to F1: z", ni * np * n),
        ("PM to F1: W4", ni * np * d_full * l * (2.0 * n - 1.0)),
        ("PM to F1: w4", ni * np * l * (2.0 * n * n + n - 1.0)),
        ("PM to F1: C4 per particle", ni * np * chol_inverse(l)),
        ("PM to F1: eta4 per particle", ni * np * l * (2.0 * l - 1.0)),
        ("PM to F1: C4", c4),
        ("PM to F1: eta4", ni * (d1 * (np - 1.0) + 1.0)),
        ("PM to F1: W", ni * (16.0 * d1.powi(3) + 9.0 * d1 * d1 + 5.0 * d1) / 6.0),
        ("F1 TU: eta", c.f_fn),
        ("F1 TU: C", c.f + d1 * d1 * (4.0 * d1 - 1.0)),
        ("F1 TU: W", chol_inverse(d1)),
        ("F1 TU: w", d1 * (2.0 * d1 - 1.0)),
        ("F2 TU: eta3", ni * np * (c.a_n + c.f_n + 2.0 * l * n)),
        ("F2 TU: C3", ni * np * l * n * (2.0 * d_full - 1.0)),
        ("F2 TU: sample", ni * np * (n.powi(3) / 3.0 + 3.0 * n * n + 5.0 * n / 3.0)),
    ])
}

fn mpf_items(dims: &Dims) -> Result<Vec<(&'static str, f64)>> {
    let m = dims.mpf()?;
    let (n, mm, l, dy, dx) = (m.n as f64, m.m as f64, m.l as f64, m.d_y as f64, m.d_x_i as f64);
    let c = &dims.callbacks;
    Ok(vec![
        ("MU: cross draws", n * mm * l * (n - 1.0)),
        (
            "MU: weights",
            n * (mm * l * (6.0 * c.f_y + 4.0 * dy.powi(3) + 21.0 * dy * dy + 17.0 * dy) / 6.0 + 2.0 * mm * l + 2.0 * mm
                - 1.0),
        ),
        ("MU: estimate", n * dx * (2.0 * mm - 1.0)),
        ("MU: resampling", n * c.resampling * mm),
        ("TU: propagation", n * mm * (3.0 * c.f_x + dx.powi(3) + 9.0 * dx * dx + 5.0 * dx) / 3.0),
    ])
}
