use thiserror::Error;

use crate::config::ConfigError;
use crate::continuum::ContinuumError;
use crate::dispersion::DispersionError;
use crate::gyro::GyroError;
use crate::lattice::LatticeError;

pub type Result<T> = std::result::Result<T, Error>;

/// Top-level error type; every module error converts into it.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Gyro(#[from] GyroError),
    #[error(transparent)]
    Dispersion(#[from] DispersionError),
    #[error(transparent)]
    Continuum(#[from] ContinuumError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("json output failed: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Short machine-readable category used in the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Lattice(_) => "lattice",
            Error::Gyro(_) => "gyro",
            Error::Dispersion(_) => "dispersion",
            Error::Continuum(_) => "continuum",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
