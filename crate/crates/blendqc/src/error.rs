//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, BlendError>;

#[derive(Error, Debug, Clone)]
pub enum BlendError {
    /// A stencil entered the excluded near-collapse region of a potential's
    /// smoothness domain (two atoms closer than half their reference
    /// separation). Solvers treat this as a line-search rejection.
    #[error("stencil collapse at site ({site_x}, {site_y}): |g| = {len:.3e} < {min:.3e} for bond ({rho_x}, {rho_y})")]
    StencilCollapse {
        site_x: i32,
        site_y: i32,
        rho_x: i32,
        rho_y: i32,
        len: f64,
        min: f64,
    },

    /// Geometry construction rejected its inputs (radii ordering, annulus
    /// width, polygon sizing). The message names the violated constraint
    /// and suggests a feasible sizing.
    #[error("geometry: {0}")]
    Geometry(String),

    /// Configuration parse or validation failure.
    #[error("config: {0}")]
    Config(String),

    /// A linear solve failed (singular factor, preconditioned iteration
    /// stagnated).
    #[error("linear solve: {0}")]
    Linear(String),

    /// A nonlinear solve did not reach its tolerance.
    #[error("solver: {0}")]
    Solve(String),

    /// A diagnostic was queried outside its domain of validity (e.g. a
    /// stress probe too close to a dislocation core).
    #[error("query refused: {0}")]
    Refused(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for BlendError {
    fn from(e: std::io::Error) -> Self {
        BlendError::Io(e.to_string())
    }
}
