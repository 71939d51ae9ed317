use thiserror::Error;

/// Errors raised by the solver stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("strong convexity violated: mu = {mu}, {dim}*lambda + 2*mu = {value}")]
    StrongConvexity { mu: f64, dim: usize, value: f64 },

    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("invalid grid size {n}: {reason}")]
    GridSize { n: usize, reason: &'static str },

    #[error("kernel evaluated at the singular point x = 0")]
    SingularEvaluation,

    #[error("unsupported derivative order {0}")]
    UnsupportedOrder(usize),

    #[error("normal vector is not unit length (|n| = {0})")]
    NotUnitNormal(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is singular to working precision (pivot ratio {pivot_ratio:.3e})")]
    Singular { pivot_ratio: f64 },

    #[error("curves {0} and {1} are not disjoint")]
    NotDisjoint(usize, usize),

    #[error("point {0:?} is too close to the boundary for this evaluation")]
    TooCloseToBoundary([f64; 2]),

    #[error("missing moment tensor entry: {0}")]
    MissingEntry(String),

    #[error("rate fit needs at least 3 positive records, {0}")]
    RateFit(String),

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
