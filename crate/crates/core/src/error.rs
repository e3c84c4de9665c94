use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("covariance matrix is numerically singular")]
    SingularCovariance,
    #[error("covariance matrix is not symmetric positive semidefinite")]
    InvalidCovariance,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("index range {start}..{end} is out of bounds for dimension {dim}")]
    IndexOutOfRange { start: usize, end: usize, dim: usize },
    #[error("mixture has no component with positive weight")]
    EmptyMixture,
    #[error("all particle weights are zero")]
    AllWeightsZero,
    #[error("particle set is empty")]
    EmptyParticleSet,
    #[error("velocity is zero, its direction is undefined")]
    ZeroVelocity,
    #[error("a target coincides with a sensor")]
    TargetOnSensor,
    #[error("no admissible target placement found after {attempts} attempts")]
    PlacementFailure { attempts: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("filter diverged: {0}")]
    FilterDiverged(String),
    #[error("missing dimension `{0}`")]
    MissingDimension(&'static str),
    #[error("sequence lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("record set is empty")]
    EmptyRecordSet,
    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Converts any numerical failure into a divergence signal.
    pub fn diverged(self) -> Error {
        match self {
            Error::FilterDiverged(_) => self,
            other => Error::FilterDiverged(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
