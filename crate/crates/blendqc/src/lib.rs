//! Blended atomistic-to-continuum coupling for 2D lattice defects.
//!
//! This crate implements two energy/force-based coupling schemes on the
//! square lattice Z²: a blended quasicontinuum energy method (B-QCE) and a
//! blended force-based method (B-QCF). Both resolve a point defect or an
//! anti-plane screw dislocation atomistically inside a core ball, switch to
//! a Cauchy–Born finite-element model outside, and ramp between the two with
//! a smooth radial blending function. The crate ships
//!
//! * the lattice machinery: interaction ranges, finite-difference stencils,
//!   site potentials (Morse pair, an embedded-atom toy, a slip-periodic
//!   anti-plane potential) and a localized impurity term ([`lattice`]),
//! * the continuum side: Cauchy–Born energy density with first and second
//!   derivatives, homogeneous lattice stability constants, and the linear
//!   elasticity predictor for a screw dislocation ([`continuum`]),
//! * geometry: the canonical lattice triangulation and its P1 interpolant,
//!   bond-averaged hat weights, a C^{2,1} piecewise-quintic interpolant,
//!   radial blending profiles, and a graded annular coarse mesh ([`geometry`]),
//! * the coupled energies and forces themselves ([`methods`]),
//! * Newton solvers, direct banded and preconditioned iterative linear
//!   algebra, and stability-constant eigensolvers ([`solvers`], [`la`]),
//! * error norms, lattice stress diagnostics, decay probes and the
//!   convergence study harness ([`analysis`]),
//! * runtime self-checks ([`checks`]) and the experiment configuration
//!   format ([`config`]).
//!
//! All lattice and element sums reduce in a fixed chunk order, so results are
//! bitwise reproducible and independent of the thread count; see [`exec`].

pub mod analysis;
pub mod continuum;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod la;
pub mod lattice;
pub mod methods;
pub mod solvers;
pub mod tol;

pub use error::{BlendError, Result};
