use thiserror::Error;

/// Errors raised by the numerical kernels and the expansion driver.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("point {im} is outside the analyticity strip of half-width {radius}")]
    StripViolation { im: f64, radius: f64 },

    #[error("argument lies on the real axis; use the boundary-value routines instead")]
    RealAxisInput,

    #[error("coincident points at indices {0} and {1}")]
    CoincidentPoints(usize, usize),

    #[error("evaluation point {0} lies in the convex hull of the poles")]
    ConvexHullViolation(String),

    #[error("enumeration budget of {budget} nodes exceeded")]
    ResourceLimit { budget: u64 },

    #[error("integer overflow while computing {0}")]
    Overflow(&'static str),

    #[error("radius violation: {0}")]
    RadiusViolation(String),

    #[error("no potential supplied for site {0:?}")]
    MissingPotential(Vec<i32>),

    #[error("linear solver failed: {0}")]
    SolverFailure(String),

    #[error("quadrature did not reach tolerance {tol:e} (estimate {estimate:e})")]
    ToleranceNotMet { tol: f64, estimate: f64 },

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
