//! Centralized tolerances used by runtime checks and the test suite.
//!
//! Everything here is a plain `f64` threshold with a stated origin, so no
//! magic numbers live in assertion sites.

/// Identities that hold exactly in real arithmetic and are evaluated by a
/// short chain of f64 operations (partition of unity, point symmetry,
/// telescoping force sums, degenerate-blend agreement).
pub const EXACT: f64 = 1e-12;

/// Exact identities evaluated through longer accumulation chains (global
/// energy sums over a few thousand sites, quadrature loops).
pub const EXACT_ACCUM: f64 = 1e-10;

/// Agreement between independently coded routes to the same quantity when
/// one side is iterative (eigensolver cross-checks, descent-vs-Newton).
pub const CROSS_CHECK: f64 = 1e-6;

/// Default Newton convergence: Euclidean norm of the gradient / residual.
pub const NEWTON_GRAD: f64 = 1e-10;

/// Relative tolerance for eigenvalue computations.
pub const EIG_REL: f64 = 1e-8;

/// Minimum observed order for second-order finite-difference derivative
/// checks; 2.0 in exact arithmetic, reduced for rounding in the difference
/// quotient.
pub const FD_MIN_ORDER: f64 = 1.9;
