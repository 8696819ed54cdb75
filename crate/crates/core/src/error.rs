use std::path::PathBuf;

use thiserror::Error;

use crate::cascade::Trajectory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite generator")]
    NonFiniteGenerator,

    #[error("bump argument must be non-negative, got {0}")]
    NegativeRadius(f64),

    #[error("kernel evaluated at origin")]
    KernelAtOrigin,

    #[error("degenerate deformation: transformed node norm {norm:e} at scale {scale}")]
    DegenerateDeformation { scale: usize, norm: f64 },

    #[error("scale unresolvable at this resolution: {0}")]
    Unresolvable(String),

    #[error("vorticity must have zero mean (mean = {0:e})")]
    NonZeroMean(f64),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid quadrature resolution: {0}")]
    InvalidQuadrature(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown preset '{0}' (expected radial, quadrupole, odd_odd or random_bands)")]
    UnknownPreset(String),

    #[error("blow-up detected at t={t:e}")]
    BlowUp { t: f64, partial: Box<Trajectory> },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed grid file: {0}")]
    GridFormat(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors the CLI reports with the configuration exit code.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::UnknownPreset(_) | Error::InvalidParameter(_)
        )
    }
}
