//! Meshes, interpolation, quadrature, and the blending geometry.

pub mod blend;
pub mod canonical;
pub mod interp;
pub mod mesh;
pub mod omega;
pub mod quad;
pub mod smooth;

pub use blend::{BlendProfile, MIN_BLEND_WIDTH};
pub use interp::MeshField;
pub use mesh::{Mesh, MeshParams};
