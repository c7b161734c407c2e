use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("support error: {0}")]
    Support(String),

    #[error("capacity error: {0}")]
    Capacity(String),

    #[error("rank error: state is singular (min eigenvalue {0:e})")]
    Rank(f64),

    #[error("structure error: {0}")]
    Structure(String),

    #[error("boundary error: {0}")]
    Boundary(String),

    #[error("feasibility error: {0}")]
    Feasibility(String),

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("infinite Fisher information: {0}")]
    InfiniteFisher(String),

    #[error("convergence error: {0}")]
    Convergence(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Stable short tag used in machine-readable diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation",
            Error::Domain(_) => "domain",
            Error::Support(_) => "support",
            Error::Capacity(_) => "capacity",
            Error::Rank(_) => "rank",
            Error::Structure(_) => "structure",
            Error::Boundary(_) => "boundary",
            Error::Feasibility(_) => "feasibility",
            Error::Estimation(_) => "estimation",
            Error::Configuration(_) => "configuration",
            Error::InfiniteFisher(_) => "infinite-fisher",
            Error::Convergence(_) => "convergence",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
