use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("measure is not probability-normalized (total mass {total})")]
    NotNormalized { total: f64 },

    #[error("measure has empty support")]
    EmptySupport,

    #[error("degenerate measure: {0}")]
    Degenerate(String),

    #[error("time step {dt} violates the CFL condition; the maximal admissible step is {max_dt}")]
    CflViolation { dt: f64, max_dt: f64 },

    #[error(
        "density reached the boundary buffer (cell mass {mass:e} at cell ({i}, {j})); enlarge the computational box"
    )]
    BoundaryReached { i: usize, j: usize, mass: f64 },

    #[error("atom at ({x}, {y}) lies outside the grid")]
    AtomOutsideGrid { x: f64, y: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid config key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("incompatible runs: {0}")]
    Incompatible(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(key: &str, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.to_string(),
            message: message.into(),
        }
    }
}
