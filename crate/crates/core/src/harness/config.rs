use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dbf::EstimateSource;
use crate::error::{Error, Result};
use crate::filters::CrossDraw;
use crate::scenario::{PriorConfig, Ssm1Params, Ssm2Params};

/// Which system a run simulates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Ssm1,
    Ssm2,
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ssm1" => Ok(Self::Ssm1),
            "ssm2" => Ok(Self::Ssm2),
            other => Err(Error::InvalidParameter(format!("unknown scenario `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Ekf,
    Rbpf,
    Dbf,
    Sdbf,
    Mpf,
    Mbfa,
}

impl FilterKind {
    pub const ALL: [FilterKind; 6] =
        [FilterKind::Ekf, FilterKind::Rbpf, FilterKind::Dbf, FilterKind::Sdbf, FilterKind::Mpf, FilterKind::Mbfa];

    pub fn name(self) -> &'static str {
        match self {
            FilterKind::Ekf => "ekf",
            FilterKind::Rbpf => "rbpf",
            FilterKind::Dbf => "dbf",
            FilterKind::Sdbf => "sdbf",
            FilterKind::Mpf => "mpf",
            FilterKind::Mbfa => "mbfa",
        }
    }
}

impl std::fmt::Display for FilterKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        FilterKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown filter `{s}`")))
    }
}

/// The `[experiment]` section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub scenario: ScenarioKind,
    pub filters: Vec<FilterKind>,
    /// Particle counts to sweep.
    pub particles: Vec<usize>,
    /// Target counts to sweep (SSM#2 only); defaults to `ssm2.targets`.
    pub targets: Option<Vec<usize>>,
    pub iterations: usize,
    pub runs: usize,
    pub seed: u64,
    /// Position error (m) beyond which a target counts as lost; defaults to
    /// 50 measurement standard deviations for SSM#1 and 100 m for SSM#2.
    pub divergence_threshold: Option<f64>,
    /// Consecutive steps above the threshold that declare divergence.
    pub divergence_steps: usize,
    /// Worker threads; all cores when absent.
    pub workers: Option<usize>,
    /// Record wall-clock time. Off makes reruns byte-identical.
    pub timing: bool,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            scenario: ScenarioKind::Ssm1,
            filters: vec![FilterKind::Ekf, FilterKind::Rbpf, FilterKind::Dbf, FilterKind::Sdbf],
            particles: vec![100],
            targets: None,
            iterations: 1,
            runs: 100,
            seed: 7,
            divergence_threshold: None,
            divergence_steps: 10,
            workers: None,
            timing: true,
            output: None,
        }
    }
}

/// The `[dbf]` section, shared by DBF, SDBF and MBFA.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DbfSection {
    pub pm_regularization: f64,
    pub estimate: EstimateSource,
}

impl Default for DbfSection {
    fn default() -> Self {
        Self { pm_regularization: 1e-9, estimate: EstimateSource::Particles }
    }
}

/// The `[mpf]` section, shared by MPF and MBFA.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpfSection {
    pub cross_draws: Option<usize>,
    pub mode: CrossDraw,
}

/// A full experiment description.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub ssm1: Ssm1Params,
    pub ssm2: Ssm2Params,
    pub prior: PriorConfig,
    pub dbf: DbfSection,
    pub mpf: MpfSection,
}

impl ExperimentConfig {
    /// Parses the `key = value` text format. Errors carry the 1-based line.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            Error::Config { line, message: e.message().to_string() }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        let bad = |m: &str| Err(Error::Config { line: 0, message: m.to_string() });
        if e.runs == 0 {
            return bad("runs must be at least 1");
        }
        if e.filters.is_empty() {
            return bad("at least one filter is required");
        }
        if e.particles.is_empty() || e.particles.contains(&0) {
            return bad("particle counts must be at least 1");
        }
        if e.iterations == 0 {
            return bad("iterations must be at least 1");
        }
        if e.divergence_steps == 0 {
            return bad("divergence_steps must be at least 1");
        }
        if matches!(e.targets.as_deref(), Some(t) if t.is_empty() || t.contains(&0)) {
            return bad("target counts must be at least 1");
        }
        if matches!(e.workers, Some(0)) {
            return bad("workers must be at least 1");
        }
        match e.scenario {
            ScenarioKind::Ssm1 => self.ssm1.validate()?,
            ScenarioKind::Ssm2 => {
                for n in self.target_counts() {
                    Ssm2Params { targets: n, ..self.ssm2.clone() }.validate()?;
                }
            }
        }
        Ok(())
    }

    /// Target counts swept for SSM#2.
    pub fn target_counts(&self) -> Vec<usize> {
        self.experiment.targets.clone().unwrap_or_else(|| vec![self.ssm2.targets])
    }

    /// Position-error threshold in metres.
    pub fn divergence_threshold(&self) -> f64 {
        self.experiment.divergence_threshold.unwrap_or(match self.experiment.scenario {
            ScenarioKind::Ssm1 => 50.0 * self.ssm1.sigma_ep,
            ScenarioKind::Ssm2 => 100.0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn sections_override_defaults() {
        let cfg = ExperimentConfig::parse(
            "[experiment]\nscenario = \"ssm2\"\nfilters = [\"rbpf\", \"mbfa\"]\nparticles = [500]\ntargets = [1, 3]\n\n[ssm2]\nsigma_a2 = 0.2\n",
        )
        .unwrap();
        assert_eq!(cfg.experiment.scenario, ScenarioKind::Ssm2);
        assert_eq!(cfg.experiment.filters, vec![FilterKind::Rbpf, FilterKind::Mbfa]);
        assert_eq!(cfg.target_counts(), vec![1, 3]);
        assert_eq!(cfg.ssm2.sigma_a2, 0.2);
        assert_eq!(cfg.divergence_threshold(), 100.0);
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let err = ExperimentConfig::parse("[experiment]\nruns = 3\n\n[ssm1]\nrho = 0.9\nbogus = 1\n").unwrap_err();
        match err {
            Error::Config { line, message } => {
                assert_eq!(line, 6, "{message}");
                assert!(message.contains("bogus"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_runs_rejected() {
        assert!(ExperimentConfig::parse("[experiment]\nruns = 0\n").is_err());
    }
}
