//! The coupled approximation methods: a blended energy functional, a
//! blended force operator, the plain Cauchy–Born FE functional they share,
//! and the projection of lattice fields into the coupled trial space.

pub mod approx;
pub mod bqce;
pub mod bqcf;
pub(crate) mod cbfe;
pub mod state;

pub use approx::quasi_best_approx;
pub use bqce::{bqce_energy, bqce_gradient, bqce_hessian};
pub use bqcf::{bqcf_apply, bqcf_jacobian};
pub use cbfe::{cbfe_energy, cbfe_gradient, cbfe_hessian};
pub use state::CoupledState;
