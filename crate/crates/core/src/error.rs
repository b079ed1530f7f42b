use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A state left the validity domain of an equation of state or of the mixture.
    #[error("domain error: {0}")]
    Domain(String),

    /// A phase with (numerically) zero mass fraction was asked to carry volume or energy.
    #[error("absent phase: {0}")]
    AbsentPhase(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("non-hyperbolic state: squared sound speed {c2:e}")]
    NonHyperbolic { c2: f64 },

    #[error("relaxation step rejected: entropy decreased by {decrease:e}")]
    StepRejected { decrease: f64 },

    #[error("time step underflow: dt = {dt:e}")]
    CflFailure { dt: f64 },

    #[error("cell {index}: {source}")]
    Cell {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn at_cell(self, index: usize) -> Self {
        match self {
            Error::Cell { .. } => self,
            other => Error::Cell {
                index,
                source: Box::new(other),
            },
        }
    }

    /// The innermost error, looking through cell localization.
    pub fn root(&self) -> &Error {
        match self {
            Error::Cell { source, .. } => source.root(),
            other => other,
        }
    }
}
