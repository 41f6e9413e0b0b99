use thiserror::Error;

/// Failure modes shared by every computation in the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point is not strictly inside the body")]
    NotInside,
    #[error("ray leaves the body domain before reaching the surface")]
    NoIntersection,
    #[error("point is not on the surface (residual {0:.3e})")]
    NotOnSurface(f64),
    #[error("affine map is singular")]
    SingularMap,
    #[error("surface is not strictly convex: {0}")]
    NotConvex(String),
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),
    #[error("quadrature depth must be positive, got {0}")]
    NonpositiveDepth(f64),
    #[error("section is not transversal to the surface")]
    NotTransversal,
    #[error("section leaves the surface domain")]
    DomainExceeded,
    #[error("section has no positive area")]
    DegenerateSection,
    #[error("cap on the negative side of the plane is unbounded")]
    UnboundedCap,
    #[error("section Hessian is not positive definite")]
    NotPositiveDefinite,
    #[error("solver did not converge in {0} iterations")]
    MaxIterations(usize),
    #[error("finite-difference step leaves the valid neighborhood")]
    StepTooLarge,
    #[error("ladder needs at least {needed} points, got {got}")]
    InsufficientLadder { needed: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Variant name, as written into machine-readable reports.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NotInside => "NotInside",
            Error::NoIntersection => "NoIntersection",
            Error::NotOnSurface(_) => "NotOnSurface",
            Error::SingularMap => "SingularMap",
            Error::NotConvex(_) => "NotConvex",
            Error::UnsupportedDimension(_) => "UnsupportedDimension",
            Error::NonpositiveDepth(_) => "NonpositiveDepth",
            Error::NotTransversal => "NotTransversal",
            Error::DomainExceeded => "DomainExceeded",
            Error::DegenerateSection => "DegenerateSection",
            Error::UnboundedCap => "UnboundedCap",
            Error::NotPositiveDefinite => "NotPositiveDefinite",
            Error::MaxIterations(_) => "MaxIterations",
            Error::StepTooLarge => "StepTooLarge",
            Error::InsufficientLadder { .. } => "InsufficientLadder",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::InvalidInput(_) => "InvalidInput",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
