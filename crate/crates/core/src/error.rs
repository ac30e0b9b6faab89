use thiserror::Error;

/// Errors raised by the geometry, solver and diagnostics layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("boundary polygon is not simple: {0}")]
    SelfIntersection(String),
    #[error("matrix is singular to working tolerance (pivot {pivot:.3e} at column {column})")]
    SingularMatrix { column: usize, pivot: f64 },
    #[error("point ({x}, {y}) is outside the domain or inside the near-field band")]
    NearBoundary { x: f64, y: f64 },
    #[error("outside the domain of definition: {0}")]
    Domain(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
