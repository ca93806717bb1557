//! Sparse and banded linear algebra used by the solvers.

pub mod banded;
pub mod csr;
pub mod fftpc;
pub mod pcg;
pub mod rcm;

pub use banded::{BandedLu, SymBanded, SymBandedLdlt};
pub use csr::Csr;
pub use fftpc::{CirculantPrecond, Stencil};
pub use pcg::{block_dot, block_norm, pcg, IterStats};
pub use rcm::reverse_cuthill_mckee;
