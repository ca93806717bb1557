//! Projection of lattice displacement fields into the coupled trial space:
//! subtract the far-field annulus mean, taper with the radial cutoff, and
//! interpolate at the mesh nodes. The result vanishes identically at radii
//! beyond the cutoff, so it is admissible whenever the cutoff stays inside
//! the triangulated domain.

use nalgebra::SVector;

use crate::error::{BlendError, Result};
use crate::geometry::{interp, Mesh};
use crate::lattice::Site;

/// Interpolates the truncated site field `site_value` onto `mesh`. The
/// returned coefficients are exactly zero at nodes with |ν| ≥ `radius`.
pub fn quasi_best_approx<const M: usize>(
    mesh: &Mesh,
    radius: f64,
    site_value: impl FnMut(Site) -> SVector<f64, M>,
) -> Result<Vec<SVector<f64, M>>> {
    if radius > mesh.r_inscribed() {
        return Err(BlendError::Config(format!(
            "truncation radius {radius} reaches the mesh boundary \
             (inscribed radius {})",
            mesh.r_inscribed()
        )));
    }
    interp::project_to_mesh(mesh, radius, site_value)
}
