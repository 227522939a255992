use thiserror::Error;

/// Errors raised by the distribution, estimation and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter or argument lies outside its admissible range.
    #[error("domain error: {0}")]
    Domain(String),
    /// Input that carries no information for the requested estimate.
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// Shapes of covariates, coefficients or responsibilities disagree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// A non-finite value appeared while evaluating the likelihood.
    #[error("numerical failure at row {row}: {message}")]
    Numerical { row: usize, message: String },
    /// A mixture component lost all of its responsibility mass.
    #[error("component {component} collapsed (responsibility mass {mass:e})")]
    ComponentCollapse { component: usize, mass: f64 },
    /// Every EM restart failed.
    #[error("fit failed after {attempts} initializations: {last}")]
    FitFailure { attempts: usize, last: String },
}

pub type Result<T> = std::result::Result<T, Error>;
