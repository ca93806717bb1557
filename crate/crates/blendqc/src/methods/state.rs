//! Shared assembly state for the coupled methods.
//!
//! A [`CoupledState`] binds one atomistic model to one coarse mesh and one
//! blending profile, and precomputes everything the energy and force
//! assemblies share: the lattice operators over the refined core, blend
//! values at sites, nodes and element midpoints, and the reference
//! deformation gradient per element. Displacement vectors are indexed by
//! mesh node; admissible fields vanish on the mesh boundary.

use nalgebra::{SMatrix, SVector};

use crate::continuum::CbDensity;
use crate::error::{BlendError, Result};
use crate::exec::Exec;
use crate::geometry::{BlendProfile, Mesh};
use crate::lattice::{AtomisticModel, AtomisticOperator, SiteSet};

/// Per-triangle assembly cache.
pub(crate) struct ElemCache<const M: usize> {
    pub verts: [u32; 3],
    pub grads: [[f64; 2]; 3],
    /// |T| β(x_T), the blended midpoint-rule weight.
    pub weight_blend: f64,
    /// |T|, the unblended weight.
    pub weight_full: f64,
    /// ∇y₀ at the element midpoint (single-valued, analytic).
    pub ref_grad: SMatrix<f64, M, 2>,
    /// W(∇y₀) at the midpoint.
    pub ref_w: f64,
}

pub struct CoupledState<const M: usize> {
    model: AtomisticModel<M>,
    mesh: Mesh,
    blend: BlendProfile,
    exec: Exec,
    cb: CbDensity<M>,
    /// Blended-energy lattice operator: weights 1−β, defect included.
    atoms_energy: AtomisticOperator<M>,
    /// Unweighted lattice operator with complete rows wherever β < 1 and
    /// no defect term; used for the force-blended method.
    atoms_force: AtomisticOperator<M>,
    /// Defect contributions alone (present only with a defect).
    defect_only: Option<AtomisticOperator<M>>,
    /// Gather-set site index -> mesh node index (same set for all three
    /// operators above).
    node_of_free: Vec<u32>,
    elems: Vec<ElemCache<M>>,
    /// Indices into `elems` with a positive blended weight.
    blended_elems: Vec<u32>,
    node_beta: Vec<f64>,
    interior: Vec<u32>,
}

impl<const M: usize> CoupledState<M> {
    pub fn new(
        model: AtomisticModel<M>,
        mesh: Mesh,
        blend: BlendProfile,
        exec: Exec,
    ) -> Result<Self> {
        let range = model.potential().range().clone();
        let core_sites: Vec<_> = (0..mesh.node_count() as u32)
            .filter_map(|i| mesh.site_of(i))
            .collect();
        if core_sites.is_empty() {
            return Err(BlendError::Config(
                "mesh has no lattice-site nodes to couple to".into(),
            ));
        }
        let core = SiteSet::from_sites(core_sites);

        let (eval_energy, eval_force) = match &blend {
            BlendProfile::AllAtomistic => {
                if mesh.triangles().iter().any(|t| !t.canonical) {
                    return Err(BlendError::Config(
                        "an everywhere-atomistic blend needs a fully refined mesh".into(),
                    ));
                }
                (core.dilate(&range), core.dilate(&range))
            }
            BlendProfile::AllContinuum => (SiteSet::ball(0.0), SiteSet::ball(0.0)),
            BlendProfile::Ramp { .. } => {
                let r1 = blend.outer_radius().unwrap();
                let eval = SiteSet::ball(r1);
                let force = eval.dilate(&range);
                // Every site any gather can read must carry a nodal value.
                for s in force.dilate(&range).sites() {
                    if mesh.site_node(*s).is_none() {
                        return Err(BlendError::Config(format!(
                            "blend support reaches site ({}, {}) but the mesh is not \
                             refined there; enlarge the core radius",
                            s[0], s[1]
                        )));
                    }
                }
                (eval, force)
            }
        };

        let beta_at = |s: &[i32; 2]| blend.value([s[0] as f64, s[1] as f64]);
        let energy_weights: Vec<f64> =
            eval_energy.sites().iter().map(|s| 1.0 - beta_at(s)).collect();
        let atoms_energy = model.gather_operator(
            core.clone(),
            eval_energy,
            Some(energy_weights),
            true,
            exec,
        )?;
        let atoms_force =
            model.gather_operator(core.clone(), eval_force, None, false, exec)?;
        let defect_only = if model.defect().is_some() {
            Some(model.gather_operator(
                core.clone(),
                SiteSet::ball(0.0),
                Some(vec![0.0]),
                true,
                exec,
            )?)
        } else {
            None
        };

        let node_of_free = core
            .sites()
            .iter()
            .map(|&s| mesh.site_node(s).expect("core sites are mesh nodes"))
            .collect();

        let cb = CbDensity::new(model.potential().clone());
        let reference = model.reference().clone();
        let mut elems = Vec::with_capacity(mesh.triangles().len());
        let mut blended_elems = Vec::new();
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let c = mesh.centroid(t as u32);
            let beta = blend.value(c);
            let area = mesh.area(t as u32);
            let ref_grad = reference.gradient(c);
            let ref_w = cb.energy(&ref_grad)?;
            let cache = ElemCache {
                verts: tri.v,
                grads: *mesh.basis_gradients(t as u32),
                weight_blend: area * beta,
                weight_full: area,
                ref_grad,
                ref_w,
            };
            if cache.weight_blend > 0.0 {
                blended_elems.push(t as u32);
            }
            elems.push(cache);
        }

        let node_beta = mesh.nodes().iter().map(|&p| blend.value(p)).collect();
        let interior = (0..mesh.node_count() as u32)
            .filter(|&i| !mesh.is_boundary(i))
            .collect();

        Ok(CoupledState {
            model,
            mesh,
            blend,
            exec,
            cb,
            atoms_energy,
            atoms_force,
            defect_only,
            node_of_free,
            elems,
            blended_elems,
            node_beta,
            interior,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn blend(&self) -> &BlendProfile {
        &self.blend
    }

    pub fn model(&self) -> &AtomisticModel<M> {
        &self.model
    }

    pub fn exec(&self) -> Exec {
        self.exec
    }

    pub fn node_count(&self) -> usize {
        self.mesh.node_count()
    }

    /// Nodes carrying unknowns (boundary nodes are clamped to zero).
    pub fn interior_nodes(&self) -> &[u32] {
        &self.interior
    }

    /// β at node ν.
    pub fn node_beta(&self, node: u32) -> f64 {
        self.node_beta[node as usize]
    }

    pub(crate) fn cb(&self) -> &CbDensity<M> {
        &self.cb
    }

    pub(crate) fn elems(&self) -> &[ElemCache<M>] {
        &self.elems
    }

    pub(crate) fn blended_elems(&self) -> &[u32] {
        &self.blended_elems
    }

    pub(crate) fn atoms_energy(&self) -> &AtomisticOperator<M> {
        &self.atoms_energy
    }

    pub(crate) fn atoms_force(&self) -> &AtomisticOperator<M> {
        &self.atoms_force
    }

    pub(crate) fn defect_only(&self) -> Option<&AtomisticOperator<M>> {
        self.defect_only.as_ref()
    }

    pub(crate) fn node_of_free(&self) -> &[u32] {
        &self.node_of_free
    }

    /// Copies nodal values into gather-set order.
    pub(crate) fn gather_sites(&self, u: &[SVector<f64, M>]) -> Vec<SVector<f64, M>> {
        assert_eq!(u.len(), self.node_count());
        self.node_of_free
            .iter()
            .map(|&n| u[n as usize])
            .collect()
    }

    /// Accumulates a gather-set vector into nodal slots.
    pub(crate) fn scatter_sites(
        &self,
        site_values: &[SVector<f64, M>],
        out: &mut [SVector<f64, M>],
    ) {
        for (i, &n) in self.node_of_free.iter().enumerate() {
            out[n as usize] += site_values[i];
        }
    }

    /// ∇u_h on element `e` from nodal values.
    pub(crate) fn elem_gradient(
        elem: &ElemCache<M>,
        u: &[SVector<f64, M>],
    ) -> SMatrix<f64, M, 2> {
        let mut g = SMatrix::<f64, M, 2>::zeros();
        for k in 0..3 {
            let v = u[elem.verts[k] as usize];
            for i in 0..M {
                g[(i, 0)] += v[i] * elem.grads[k][0];
                g[(i, 1)] += v[i] * elem.grads[k][1];
            }
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::MeshParams;
    use crate::lattice::{HomogeneousMap, MorsePair};
    use std::sync::Arc;

    fn morse_model() -> AtomisticModel<2> {
        AtomisticModel::new(
            Arc::new(MorsePair::default()),
            Arc::new(HomogeneousMap::new(SMatrix::<f64, 2, 2>::identity())),
            None,
        )
    }

    #[test]
    fn blend_wider_than_the_refined_core_is_rejected() {
        let mesh = Mesh::build(&MeshParams {
            r_core: 8.0,
            r_domain: 40.0,
            r_blend: 6.0,
            h_factor: 1.0,
        })
        .unwrap();
        let blend = BlendProfile::ramp(6.0, 12.0).unwrap();
        let err = CoupledState::new(morse_model(), mesh, blend, Exec::Seq)
            .err()
            .unwrap();
        assert!(format!("{err}").contains("refined"), "{err}");
    }

    #[test]
    fn coarse_mesh_with_everywhere_atomistic_blend_is_rejected() {
        let mesh = Mesh::build(&MeshParams {
            r_core: 8.0,
            r_domain: 40.0,
            r_blend: 6.0,
            h_factor: 1.0,
        })
        .unwrap();
        let err =
            CoupledState::new(morse_model(), mesh, BlendProfile::AllAtomistic, Exec::Seq)
                .err()
                .unwrap();
        assert!(format!("{err}").contains("fully refined"), "{err}");
    }

    #[test]
    fn blend_caches_follow_the_profile() {
        let mesh = Mesh::build(&MeshParams {
            r_core: 14.0,
            r_domain: 40.0,
            r_blend: 4.0,
            h_factor: 1.0,
        })
        .unwrap();
        let blend = BlendProfile::ramp(4.0, 8.0).unwrap();
        let state = CoupledState::new(morse_model(), mesh, blend, Exec::Seq).unwrap();
        for i in 0..state.node_count() as u32 {
            let p = state.mesh().node(i);
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            if r <= 4.0 {
                assert_eq!(state.node_beta(i), 0.0);
            }
            if r >= 8.0 {
                assert_eq!(state.node_beta(i), 1.0);
            }
        }
        // Elements fully inside the core are unblended and skipped.
        assert!(state.blended_elems().len() < state.elems().len());
        // Far elements carry full weight.
        let far = state
            .elems()
            .iter()
            .filter(|e| e.weight_blend == e.weight_full)
            .count();
        assert!(far > 0);
    }
}
