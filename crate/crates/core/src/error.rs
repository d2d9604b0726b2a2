use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("site {site} out of range for a space with {n_factors} factors")]
    SiteOutOfRange { site: usize, n_factors: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("biorthonormalization failed (residual {residual:.3e}); suspect clusters: {clusters}")]
    Biorthonormalization { residual: f64, clusters: String },

    #[error("{count} eigenvalues lie within {tol:.3e} of zero; the steady state is not unique")]
    MultipleSteadyStates { count: usize, tol: f64 },

    #[error("numerical steady state has eigenvalue {0:.3e} below the positivity floor")]
    NotPositive(f64),

    #[error("leading steady-state populations are degenerate: {0}")]
    DegenerateSteadyState(String),

    #[error("jump probability {dp:.4} per step exceeds {max}; reduce dt")]
    StepTooLarge { dp: f64, max: f64 },

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("unfolding polynomial of degree {0} is not monotone on the data range")]
    NonMonotoneFit(usize),

    #[error("state became non-finite at t = {t}")]
    BlowUp { t: f64 },

    #[error("Liouvillian dimension {dim} exceeds the limit {limit}; force is required")]
    ResourceGuard { dim: usize, limit: usize },

    #[error("not converged: {0}")]
    NotConverged(String),

    #[error("cache: {0}")]
    Cache(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
