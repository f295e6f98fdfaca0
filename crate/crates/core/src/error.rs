use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid distribution parameter {name}: {value} ({reason})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid empirical distribution: {0}")]
    InvalidEmpirical(String),

    #[error("load must lie in (0, 1), got {0}")]
    InvalidLoad(f64),

    #[error("argument {name} = {value} outside [{lo}, {hi}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("size class below threshold {0} is empty")]
    EmptyClass(f64),

    #[error("quadrature did not converge: estimated relative error {achieved:.3e} exceeds {requested:.3e}")]
    QuadratureNonConvergence { achieved: f64, requested: f64 },

    #[error("no sign change on bracket [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    #[error("invalid policy configuration: {0}")]
    InvalidPolicy(String),

    #[error("invalid flow input: {0}")]
    InvalidFlows(String),

    #[error("no flows match the requested class filter")]
    EmptyFilter,

    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}
