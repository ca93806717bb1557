//! Transfer between lattice fields and mesh coefficient vectors.
//!
//! Mesh functions are piecewise linear in the nodal basis; the helpers here
//! evaluate them, interpolate arbitrary functions onto the nodes, and push a
//! decaying lattice field onto a mesh through a smooth radial cutoff that
//! recenters by the field's far-field average, so the transferred function is
//! exactly zero on and outside the cutoff radius.

use nalgebra::{SMatrix, SVector};

use crate::error::{BlendError, Result};
use crate::geometry::canonical;
use crate::geometry::blend::quintic_step;
use crate::geometry::mesh::Mesh;
use crate::lattice::range::Site;

/// Radial cutoff: 1 inside half the radius, 0 outside the radius, with a
/// quintic ramp between.
pub fn cutoff(r: f64, radius: f64) -> f64 {
    1.0 - quintic_step(2.0 * (r / radius - 0.5))
}

/// Evaluate a function at every mesh node.
pub fn nodal_interpolant<const M: usize>(
    mesh: &Mesh,
    mut f: impl FnMut([f64; 2]) -> SVector<f64, M>,
) -> Vec<SVector<f64, M>> {
    (0..mesh.node_count() as u32).map(|i| f(mesh.node(i))).collect()
}

/// Average of a site field over the annulus radius/2 < |ξ| ≤ radius.
pub fn annulus_average<const M: usize>(
    radius: f64,
    mut site_value: impl FnMut(Site) -> SVector<f64, M>,
) -> Result<SVector<f64, M>> {
    let r_out = radius * radius;
    let r_in = r_out / 4.0;
    let b = radius.floor() as i32;
    let mut sum = SVector::<f64, M>::zeros();
    let mut count = 0usize;
    for y in -b..=b {
        for x in -b..=b {
            let q = (x * x + y * y) as f64;
            if q > r_in && q <= r_out {
                sum += site_value([x, y]);
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(BlendError::Geometry(format!(
            "annulus at radius {radius} contains no lattice sites"
        )));
    }
    Ok(sum / count as f64)
}

/// Transfer a lattice field onto the mesh nodes through the radial cutoff:
/// the node value is cutoff · (interpolated field − far-field average).
/// Nodes on or outside the cutoff radius are exactly zero, so the result is
/// admissible for homogeneous boundary conditions whenever the mesh boundary
/// lies at or beyond `radius`.
pub fn project_to_mesh<const M: usize>(
    mesh: &Mesh,
    radius: f64,
    mut site_value: impl FnMut(Site) -> SVector<f64, M>,
) -> Result<Vec<SVector<f64, M>>> {
    if !(radius > 2.0) {
        return Err(BlendError::Config(format!(
            "cutoff radius {radius} is too small"
        )));
    }
    let mean = annulus_average(radius, &mut site_value)?;
    let mut out = Vec::with_capacity(mesh.node_count());
    for i in 0..mesh.node_count() as u32 {
        let p = mesh.node(i);
        let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
        let eta = cutoff(r, radius);
        if eta == 0.0 {
            out.push(SVector::zeros());
        } else {
            let v = canonical::interpolate(&mut site_value, p);
            out.push((v - mean) * eta);
        }
    }
    Ok(out)
}

/// A piecewise-linear function on a mesh, viewed through its coefficients.
pub struct MeshField<'a, const M: usize> {
    mesh: &'a Mesh,
    values: &'a [SVector<f64, M>],
}

impl<'a, const M: usize> MeshField<'a, M> {
    pub fn new(mesh: &'a Mesh, values: &'a [SVector<f64, M>]) -> Self {
        assert_eq!(values.len(), mesh.node_count(), "coefficient count");
        MeshField { mesh, values }
    }

    pub fn value_in(&self, t: u32, bary: [f64; 3]) -> SVector<f64, M> {
        let v = self.mesh.triangles()[t as usize].v;
        self.values[v[0] as usize] * bary[0]
            + self.values[v[1] as usize] * bary[1]
            + self.values[v[2] as usize] * bary[2]
    }

    /// Value at a point, or None outside the mesh.
    pub fn value(&self, p: [f64; 2]) -> Option<SVector<f64, M>> {
        let (t, bary) = self.mesh.locate(p)?;
        Some(self.value_in(t, bary))
    }

    /// Constant gradient on one triangle, as an M×2 matrix.
    pub fn gradient_on(&self, t: u32) -> SMatrix<f64, M, 2> {
        let tri = &self.mesh.triangles()[t as usize];
        let grads = self.mesh.basis_gradients(t);
        let mut g = SMatrix::<f64, M, 2>::zeros();
        for k in 0..3 {
            let val = &self.values[tri.v[k] as usize];
            for a in 0..M {
                for b in 0..2 {
                    g[(a, b)] += val[a] * grads[k][b];
                }
            }
        }
        g
    }

    /// Gradient at a point, or None outside the mesh.
    pub fn gradient(&self, p: [f64; 2]) -> Option<SMatrix<f64, M, 2>> {
        let (t, _) = self.mesh.locate(p)?;
        Some(self.gradient_on(t))
    }
}
