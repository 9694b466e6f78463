use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("periodicity mismatch: {0}")]
    PeriodicityMismatch(String),

    #[error("unknown name: {0}")]
    Lookup(String),

    #[error("parse error at byte {offset}: {msg}")]
    Parse { msg: String, offset: usize },

    #[error("ellipticity violation: {0}")]
    Ellipticity(String),

    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),

    #[error("capability error: {0}")]
    Capability(String),

    #[error("solver failure in {what}: relative residual {residual:.3e}")]
    SolverFailure { what: String, residual: f64 },

    #[error("mesh too coarse: {0}")]
    HTooCoarse(String),

    #[error("point ({0}, {1}) not located in mesh")]
    Location(f64, f64),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
