//! Error type shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {message}")]
    Parse {
        file: PathBuf,
        line: usize,
        message: String,
    },

    #[error("empty measurement file: {path}")]
    EmptyFile { path: PathBuf },

    #[error("{file}:{line}: unit mismatch: declared '{declared}', file says '{found}'")]
    UnitMismatch {
        file: PathBuf,
        line: usize,
        declared: String,
        found: String,
    },

    #[error("duplicate abscissa z = {z_nm} nm in model '{model}'")]
    DuplicateAbscissa { model: String, z_nm: f64 },

    #[error("duplicate model name '{name}'")]
    DuplicateModel { name: String },

    #[error("z = {z_nm} nm outside grid span [{lo} nm, {hi} nm]; extrapolation refused")]
    OutsideGrid { z_nm: f64, lo: f64, hi: f64 },

    #[error("insufficient replication: no subinterval holds two or more points")]
    InsufficientReplication,

    #[error("variance of the mean undefined for {m} member(s); merge bins first")]
    UndefinedVariance { m: usize },

    #[error("{available} bin(s) available but the smoothing window needs {window}")]
    WindowTooLarge { available: usize, window: usize },

    #[error("empty smoothing window")]
    EmptyWindow,

    #[error("measurement grids differ across sets; use the subinterval path")]
    GridsNotAligned,

    #[error("quantile domain: p = {p} must lie in (0.5, 1) and f = {dof} must be >= 1")]
    QuantileDomain { p: f64, dof: u32 },

    #[error("no k coefficient tabulated for beta = {beta}, J = {j}; supply one in the config")]
    MissingCoefficient { beta: f64, j: usize },

    #[error("systematic source '{name}' is singular at z = {z_nm} nm (zero detuning)")]
    SingularSource { name: String, z_nm: f64 },

    #[error("relative error undefined at z = {z_nm} nm: measured magnitude is zero")]
    ZeroMagnitude { z_nm: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}
