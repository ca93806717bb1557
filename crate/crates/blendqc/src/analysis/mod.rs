//! Error norms, stress and ghost-force diagnostics, regularity probes,
//! and the convergence-study harness that produces dof-vs-error tables.

pub mod fit;
pub mod norms;
pub mod regularity;
pub mod stress;
pub mod study;

pub use fit::{line_fit, log_log_fit, LineFit};
pub use norms::{energy_error, h1_error};
pub use regularity::{regularity_probe, RegularityTable};
pub use stress::{atomistic_stress, bond_weight_gate, bqce_stress_error};
pub use study::{
    convergence_study, guarded_slope, records_to_csv, ConvergenceRecord, Method, MethodSlopes,
    SlopeFitOutcome, StudyConfig, StudyReport,
};
