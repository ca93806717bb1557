//! Blended force method: nodal equations mixing atomistic forces and the
//! Cauchy–Born FE forces with the complementary weights,
//! F_ν = (1−β(ν)) f^a_ν + β(ν) f^c_ν + f^P_ν. The defect forces enter
//! unweighted. Rows of clamped boundary nodes are zeroed; they carry no
//! equation.

use nalgebra::SVector;

use crate::error::Result;

use super::cbfe::{fe_gradient, fe_hessian_triplets, Weighting};
use super::state::CoupledState;

/// Evaluates the blended force residual at nodal displacement `u` into
/// `out` (overwritten).
pub fn bqcf_apply<const M: usize>(
    state: &CoupledState<M>,
    u: &[SVector<f64, M>],
    out: &mut [SVector<f64, M>],
) -> Result<()> {
    assert_eq!(out.len(), state.node_count());
    out.iter_mut().for_each(|v| *v = SVector::zeros());
    fe_gradient(state, u, Weighting::Full, out)?;
    for (n, v) in out.iter_mut().enumerate() {
        *v *= state.node_beta(n as u32);
    }

    let us = state.gather_sites(u);
    let mut gs = vec![SVector::<f64, M>::zeros(); us.len()];
    state.atoms_force().gradient(&us, &mut gs)?;
    for (i, &n) in state.node_of_free().iter().enumerate() {
        let w = 1.0 - state.node_beta(n);
        if w != 0.0 {
            out[n as usize] += gs[i] * w;
        }
    }

    if let Some(dop) = state.defect_only() {
        let mut gd = vec![SVector::<f64, M>::zeros(); us.len()];
        dop.gradient(&us, &mut gd)?;
        state.scatter_sites(&gd, out);
    }

    let mesh = state.mesh();
    for n in 0..state.node_count() as u32 {
        if mesh.is_boundary(n) {
            out[n as usize] = SVector::zeros();
        }
    }
    Ok(())
}

/// Derivative of [`bqcf_apply`] with respect to the nodal values, as
/// node-dof triplets (dof = node·M + comp). The row scaling makes this
/// matrix unsymmetric. Boundary rows are omitted.
pub fn bqcf_jacobian<const M: usize>(
    state: &CoupledState<M>,
    u: &[SVector<f64, M>],
) -> Result<Vec<(u32, u32, f64)>> {
    let mesh = state.mesh();
    let map = state.node_of_free();
    let m = M as u32;
    let us = state.gather_sites(u);

    let mut trips = Vec::new();
    for (r, c, v) in state.atoms_force().hessian_triplets(&us)? {
        let rn = map[(r / m) as usize];
        if mesh.is_boundary(rn) {
            continue;
        }
        let w = 1.0 - state.node_beta(rn);
        if w == 0.0 {
            continue;
        }
        trips.push((rn * m + r % m, map[(c / m) as usize] * m + c % m, w * v));
    }

    let row_scale = |n: u32| {
        if mesh.is_boundary(n) {
            0.0
        } else {
            state.node_beta(n)
        }
    };
    fe_hessian_triplets(state, u, Weighting::Full, Some(&row_scale), &mut trips)?;

    if let Some(dop) = state.defect_only() {
        for (r, c, v) in dop.hessian_triplets(&us)? {
            let rn = map[(r / m) as usize];
            if mesh.is_boundary(rn) {
                continue;
            }
            trips.push((rn * m + r % m, map[(c / m) as usize] * m + c % m, v));
        }
    }
    Ok(trips)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Exec;
    use crate::geometry::{BlendProfile, Mesh, MeshParams};
    use crate::la::Csr;
    use crate::lattice::{
        AtomisticModel, HomogeneousMap, Impurity, MorsePair, SiteSet,
    };
    use crate::tol;
    use nalgebra::SMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn model(a: SMatrix<f64, 2, 2>, kappa: f64) -> AtomisticModel<2> {
        let defect = if kappa != 0.0 {
            Some(Impurity::new(kappa))
        } else {
            None
        };
        AtomisticModel::new(
            Arc::new(MorsePair::default()),
            Arc::new(HomogeneousMap::new(a)),
            defect,
        )
    }

    fn blended_state(a: SMatrix<f64, 2, 2>, kappa: f64) -> CoupledState<2> {
        let mesh = Mesh::build(&MeshParams {
            r_core: 15.0,
            r_domain: 40.0,
            r_blend: 8.0,
            h_factor: 1.0,
        })
        .unwrap();
        let blend = BlendProfile::ramp(4.0, 8.0).unwrap();
        CoupledState::new(model(a, kappa), mesh, blend, Exec::Seq).unwrap()
    }

    fn random_interior(state: &CoupledState<2>, seed: u64, scale: f64) -> Vec<SVector<f64, 2>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = vec![SVector::<f64, 2>::zeros(); state.node_count()];
        for &n in state.interior_nodes() {
            u[n as usize] =
                SVector::<f64, 2>::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale));
        }
        u
    }

    #[test]
    fn homogeneous_states_are_force_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..3 {
            let mut a = SMatrix::<f64, 2, 2>::identity();
            for i in 0..2 {
                for j in 0..2 {
                    a[(i, j)] += rng.gen_range(-0.02..0.02);
                }
            }
            let state = blended_state(a, 0.0);
            let u = vec![SVector::<f64, 2>::zeros(); state.node_count()];
            let mut f = vec![SVector::<f64, 2>::zeros(); state.node_count()];
            bqcf_apply(&state, &u, &mut f).unwrap();
            let linf = f.iter().map(|v| v.amax()).fold(0.0f64, f64::max);
            assert!(linf < 1e-12, "residual {linf:.3e} for {a}");
        }
    }

    #[test]
    fn degenerate_blend_matches_the_atomistic_forces() {
        let mesh = Mesh::build(&MeshParams {
            r_core: 10.0,
            r_domain: 8.0,
            r_blend: 8.0,
            h_factor: 1.0,
        })
        .unwrap();
        let a = SMatrix::<f64, 2, 2>::identity();
        let state =
            CoupledState::new(model(a, 0.3), mesh, BlendProfile::AllAtomistic, Exec::Seq)
                .unwrap();
        let u = random_interior(&state, 17, 0.03);

        let sites: Vec<_> = (0..state.mesh().node_count() as u32)
            .filter_map(|i| state.mesh().site_of(i))
            .collect();
        let core = SiteSet::from_sites(sites);
        let range = state.model().potential().range().clone();
        let oracle = model(a, 0.3)
            .gather_operator(core.clone(), core.dilate(&range), None, true, Exec::Seq)
            .unwrap();
        let us: Vec<SVector<f64, 2>> = core
            .sites()
            .iter()
            .map(|&s| u[state.mesh().site_node(s).unwrap() as usize])
            .collect();
        let mut go = vec![SVector::<f64, 2>::zeros(); us.len()];
        oracle.gradient(&us, &mut go).unwrap();

        let mut f = vec![SVector::<f64, 2>::zeros(); state.node_count()];
        bqcf_apply(&state, &u, &mut f).unwrap();
        for (i, &s) in core.sites().iter().enumerate() {
            let n = state.mesh().site_node(s).unwrap();
            if state.mesh().is_boundary(n) {
                continue;
            }
            assert!(
                (f[n as usize] - go[i]).norm() <= 1e-13,
                "site {s:?}: {} vs {}",
                f[n as usize],
                go[i]
            );
        }
    }

    #[test]
    fn defect_forces_enter_unblended() {
        let state = blended_state(SMatrix::<f64, 2, 2>::identity(), 0.3);
        let u = vec![SVector::<f64, 2>::zeros(); state.node_count()];
        let mut f = vec![SVector::<f64, 2>::zeros(); state.node_count()];
        bqcf_apply(&state, &u, &mut f).unwrap();

        let us = state.gather_sites(&u);
        let mut gd = vec![SVector::<f64, 2>::zeros(); us.len()];
        state.defect_only().unwrap().gradient(&us, &mut gd).unwrap();
        let mut expect = vec![SVector::<f64, 2>::zeros(); state.node_count()];
        state.scatter_sites(&gd, &mut expect);

        let mut worst = 0.0f64;
        for n in 0..state.node_count() {
            worst = worst.max((f[n] - expect[n]).amax());
        }
        assert!(worst < 1e-12, "defect force mismatch {worst:.3e}");
        // And the defect does produce a force.
        let peak = expect.iter().map(|v| v.amax()).fold(0.0f64, f64::max);
        assert!(peak > 1e-3, "expected a defect pull, got {peak:.3e}");
    }

    #[test]
    fn jacobian_matches_directional_differences_and_is_unsymmetric() {
        let state = blended_state(SMatrix::<f64, 2, 2>::identity(), 0.3);
        let u = random_interior(&state, 23, 0.02);
        let v = random_interior(&state, 24, 0.03);
        let n = state.node_count();
        let trips = bqcf_jacobian(&state, &u).unwrap();

        let a = Csr::from_triplets(2 * n, 2 * n, &trips).unwrap();
        assert!(a.asymmetry() > 1e-8, "asymmetry {}", a.asymmetry());

        let mut jv = vec![SVector::<f64, 2>::zeros(); n];
        for &(r, c, val) in &trips {
            jv[(r / 2) as usize][(r % 2) as usize] +=
                val * v[(c / 2) as usize][(c % 2) as usize];
        }
        let apply_at = |t: f64| {
            let ut: Vec<_> = u.iter().zip(&v).map(|(a, b)| a + b * t).collect();
            let mut f = vec![SVector::<f64, 2>::zeros(); n];
            bqcf_apply(&state, &ut, &mut f).unwrap();
            f
        };
        let mut errs = Vec::new();
        for &t in &[1e-2, 5e-3] {
            let fp = apply_at(t);
            let fm = apply_at(-t);
            let err: f64 = (0..n)
                .map(|i| ((fp[i] - fm[i]) / (2.0 * t) - jv[i]).norm_squared())
                .sum::<f64>()
                .sqrt();
            errs.push(err);
        }
        if errs[1] > 1e-12 {
            let order = (errs[0] / errs[1]).log2();
            assert!(order >= tol::FD_MIN_ORDER, "observed order {order}");
        }
    }
}
