//! Square-lattice atomistic models.
//!
//! Interaction ranges and site sets, the shipped potentials, localized
//! defects, and the energy/force/Hessian engine over finite site sets.

pub mod defect;
pub mod field;
pub mod model;
pub mod potential;
pub mod range;

pub use defect::Impurity;
pub use field::{LatticeField, SiteSet};
pub use model::{AtomisticLinearization, AtomisticModel, AtomisticOperator, HomogeneousMap, ReferenceMap};
pub use potential::{AntiplanePeriodic, EamToy, MorsePair, SitePotential};
pub use range::{InteractionRange, Site};
