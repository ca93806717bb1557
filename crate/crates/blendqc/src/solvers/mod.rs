//! Newton solvers for the reference lattice problem and the two coupled
//! methods, plus generalized eigensolvers for stability constants.

pub mod coupled;
pub mod eig;
pub mod newton;
pub mod pack;
pub mod reference;
pub mod stiffness;

pub use coupled::{h1_dual_norm, solve_bqce, solve_bqcf};
pub use eig::stability_constant;
pub use newton::quadratic_tail_ok;
pub use pack::DofMap;
pub use reference::{solve_atomistic_reference, ReferenceSolution};
pub use stiffness::{ball_stiffness, expand_components, mesh_stiffness};

/// How a nonlinear solve ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    /// Backtracking could not find an acceptable step.
    LineSearchFailure,
    /// Every trial step ran into a collapsing stencil.
    Collapse,
    MaxIter,
    /// Converged to a critical point whose second variation is not
    /// positive definite.
    Saddle,
    /// The force-method jacobian stayed singular after the shifted retry.
    Singular,
}

/// Outcome summary of one nonlinear solve.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Accepted Newton steps.
    pub iterations: usize,
    /// Euclidean residual norms, the value before the first step first.
    pub residual_history: Vec<f64>,
    /// Energy after each accepted step (empty for the force method).
    pub energy_history: Vec<f64>,
    /// Final gradient/residual measured in the dual norm of the H¹
    /// seminorm, √(gᵀ K⁻¹ g) with K the stiffness of the ambient
    /// triangulation.
    pub residual_dual: f64,
    /// Final gradient/residual max-norm over the unknowns.
    pub residual_linf: f64,
    /// Final energy, where the method defines one.
    pub energy: Option<f64>,
    /// λI-shifted factorization retries that were needed (force method).
    pub shifted_retries: u32,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}
