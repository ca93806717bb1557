//! Blended energy method: atomistic site energies weighted by 1−β plus the
//! Cauchy–Born FE functional weighted by β, plus the unblended defect term.

use nalgebra::SVector;

use crate::error::Result;

use super::cbfe::{fe_energy, fe_gradient, fe_hessian_triplets, Weighting};
use super::state::CoupledState;

/// Blended energy difference at nodal displacement `u`:
/// Σ_ξ (1−β(ξ))[V(Dy(ξ)) − V(Dy₀(ξ))] + Σ_T |T| β(x_T)(W(∇y) − W(∇y₀)) + P.
pub fn bqce_energy<const M: usize>(
    state: &CoupledState<M>,
    u: &[SVector<f64, M>],
) -> Result<f64> {
    let us = state.gather_sites(u);
    let site_part = state.atoms_energy().energy(&us)?;
    let fe_part = fe_energy(state, u, Weighting::Blended)?;
    Ok(site_part + fe_part)
}

/// Exact partial derivatives of [`bqce_energy`] with respect to every nodal
/// value; `out` is overwritten. Boundary entries are reported too (the
/// solvers clamp them).
pub fn bqce_gradient<const M: usize>(
    state: &CoupledState<M>,
    u: &[SVector<f64, M>],
    out: &mut [SVector<f64, M>],
) -> Result<()> {
    assert_eq!(out.len(), state.node_count());
    out.iter_mut().for_each(|v| *v = SVector::zeros());
    let us = state.gather_sites(u);
    let mut gs = vec![SVector::<f64, M>::zeros(); us.len()];
    state.atoms_energy().gradient(&us, &mut gs)?;
    state.scatter_sites(&gs, out);
    fe_gradient(state, u, Weighting::Blended, out)
}

/// Second variation as symmetric node-dof triplets (dof = node·M + comp).
pub fn bqce_hessian<const M: usize>(
    state: &CoupledState<M>,
    u: &[SVector<f64, M>],
) -> Result<Vec<(u32, u32, f64)>> {
    let us = state.gather_sites(u);
    let site_trips = state.atoms_energy().hessian_triplets(&us)?;
    let map = state.node_of_free();
    let m = M as u32;
    let mut trips: Vec<(u32, u32, f64)> = site_trips
        .into_iter()
        .map(|(r, c, v)| {
            (
                map[(r / m) as usize] * m + r % m,
                map[(c / m) as usize] * m + c % m,
                v,
            )
        })
        .collect();
    fe_hessian_triplets(state, u, Weighting::Blended, None, &mut trips)?;
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
    use crate::methods::cbfe::cbfe_gradient;
    use crate::tol;
    use nalgebra::SMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn model(kappa: f64) -> AtomisticModel<2> {
        let defect = if kappa != 0.0 {
            Some(Impurity::new(kappa))
        } else {
            None
        };
        AtomisticModel::new(
            Arc::new(MorsePair::default()),
            Arc::new(HomogeneousMap::new(SMatrix::<f64, 2, 2>::identity())),
            defect,
        )
    }

    fn blended_state(kappa: f64) -> CoupledState<2> {
        let mesh = Mesh::build(&MeshParams {
            r_core: 15.0,
            r_domain: 40.0,
            r_blend: 8.0,
            h_factor: 1.0,
        })
        .unwrap();
        let blend = BlendProfile::ramp(4.0, 8.0).unwrap();
        CoupledState::new(model(kappa), mesh, blend, Exec::Seq).unwrap()
    }

    fn refined_state(kappa: f64, r: f64) -> CoupledState<2> {
        let mesh = Mesh::build(&MeshParams {
            r_core: r + 2.0,
            r_domain: r,
            r_blend: r,
            h_factor: 1.0,
        })
        .unwrap();
        CoupledState::new(model(kappa), mesh, BlendProfile::AllAtomistic, Exec::Seq).unwrap()
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
    fn zero_displacement_gives_the_defect_energy_alone() {
        let state = blended_state(0.0);
        let u = vec![SVector::<f64, 2>::zeros(); state.node_count()];
        assert_eq!(bqce_energy(&state, &u).unwrap(), 0.0);

        let state = blended_state(0.3);
        let u = vec![SVector::<f64, 2>::zeros(); state.node_count()];
        let e = bqce_energy(&state, &u).unwrap();
        // Oracle: the impurity energy on the undisplaced reference stencil.
        let imp = Impurity::new(0.3);
        let stencil: Vec<SVector<f64, 2>> = imp
            .range()
            .vectors()
            .iter()
            .map(|&rho| SVector::<f64, 2>::new(rho[0] as f64, rho[1] as f64))
            .collect();
        let expect = imp.energy(&stencil).unwrap();
        assert!((e - expect).abs() < 1e-14, "{e} vs {expect}");
    }

    #[test]
    fn degenerate_blend_reduces_to_the_clamped_atomistic_model() {
        let state = refined_state(0.3, 8.0);
        let u = random_interior(&state, 3, 0.03);

        // Oracle: a gather operator over the same site set, built directly.
        let sites: Vec<_> = (0..state.mesh().node_count() as u32)
            .filter_map(|i| state.mesh().site_of(i))
            .collect();
        let core = SiteSet::from_sites(sites);
        let range = state.model().potential().range().clone();
        let oracle = model(0.3)
            .gather_operator(core.clone(), core.dilate(&range), None, true, Exec::Seq)
            .unwrap();
        let us: Vec<SVector<f64, 2>> = core
            .sites()
            .iter()
            .map(|&s| u[state.mesh().site_node(s).unwrap() as usize])
            .collect();

        let e = bqce_energy(&state, &u).unwrap();
        let expect = oracle.energy(&us).unwrap();
        assert_eq!(e, expect);

        let mut g = vec![SVector::<f64, 2>::zeros(); state.node_count()];
        bqce_gradient(&state, &u, &mut g).unwrap();
        let mut go = vec![SVector::<f64, 2>::zeros(); us.len()];
        oracle.gradient(&us, &mut go).unwrap();
        for (i, &s) in core.sites().iter().enumerate() {
            let n = state.mesh().site_node(s).unwrap();
            assert_eq!(g[n as usize], go[i], "site {s:?}");
        }
    }

    #[test]
    fn saturated_blend_reduces_to_the_fe_functional() {
        let mesh = Mesh::build(&MeshParams {
            r_core: 6.0,
            r_domain: 16.0,
            r_blend: 4.0,
            h_factor: 1.0,
        })
        .unwrap();
        let state =
            CoupledState::new(model(0.0), mesh, BlendProfile::AllContinuum, Exec::Seq).unwrap();
        let u = random_interior(&state, 7, 0.04);
        let e = bqce_energy(&state, &u).unwrap();
        let ec = super::super::cbfe::cbfe_energy(&state, &u).unwrap();
        assert_eq!(e, ec);

        let mut g = vec![SVector::<f64, 2>::zeros(); state.node_count()];
        bqce_gradient(&state, &u, &mut g).unwrap();
        let mut gc = vec![SVector::<f64, 2>::zeros(); state.node_count()];
        cbfe_gradient(&state, &u, &mut gc).unwrap();
        for n in 0..state.node_count() {
            assert!((g[n] - gc[n]).norm() <= 1e-12, "node {n}");
        }
    }

    #[test]
    fn gradient_passes_a_central_difference_check() {
        let state = blended_state(0.3);
        let u = random_interior(&state, 11, 0.02);
        let v = random_interior(&state, 12, 0.03);
        let mut g = vec![SVector::<f64, 2>::zeros(); state.node_count()];
        bqce_gradient(&state, &u, &mut g).unwrap();
        let directional: f64 = g.iter().zip(&v).map(|(a, b)| a.dot(b)).sum();

        let energy_at = |t: f64| {
            let ut: Vec<_> = u.iter().zip(&v).map(|(a, b)| a + b * t).collect();
            bqce_energy(&state, &ut).unwrap()
        };
        let mut errs = Vec::new();
        for &t in &[1e-2, 5e-3] {
            let fd = (energy_at(t) - energy_at(-t)) / (2.0 * t);
            errs.push((fd - directional).abs());
        }
        if errs[1] > 1e-13 {
            let order = (errs[0] / errs[1]).log2();
            assert!(order >= tol::FD_MIN_ORDER, "observed order {order}");
        }
    }

    #[test]
    fn hessian_matches_gradient_differences_and_is_symmetric() {
        let state = blended_state(0.3);
        let u = random_interior(&state, 13, 0.02);
        let v = random_interior(&state, 14, 0.03);
        let n = state.node_count();
        let trips = bqce_hessian(&state, &u).unwrap();

        let a = Csr::from_triplets(2 * n, 2 * n, &trips).unwrap();
        assert!(a.asymmetry() < 1e-12, "asymmetry {}", a.asymmetry());

        // H v against central differences of the gradient.
        let mut hv = vec![SVector::<f64, 2>::zeros(); n];
        for &(r, c, val) in &trips {
            hv[(r / 2) as usize][(r % 2) as usize] +=
                val * v[(c / 2) as usize][(c % 2) as usize];
        }
        let grad_at = |t: f64| {
            let ut: Vec<_> = u.iter().zip(&v).map(|(a, b)| a + b * t).collect();
            let mut g = vec![SVector::<f64, 2>::zeros(); n];
            bqce_gradient(&state, &ut, &mut g).unwrap();
            g
        };
        let mut errs = Vec::new();
        for &t in &[1e-2, 5e-3] {
            let gp = grad_at(t);
            let gm = grad_at(-t);
            let err: f64 = (0..n)
                .map(|i| ((gp[i] - gm[i]) / (2.0 * t) - hv[i]).norm_squared())
                .sum::<f64>()
                .sqrt();
            errs.push(err);
        }
        if errs[1] > 1e-12 {
            let order = (errs[0] / errs[1]).log2();
            assert!(order >= tol::FD_MIN_ORDER, "observed order {order}");
        }
    }

    #[test]
    fn strained_homogeneous_states_carry_ghost_forces() {
        // At the stress-free reference the blend is exact: every bond sits
        // at its own minimum, so the gradient vanishes identically.
        let state = blended_state(0.0);
        let u = vec![SVector::<f64, 2>::zeros(); state.node_count()];
        let mut g = vec![SVector::<f64, 2>::zeros(); state.node_count()];
        bqce_gradient(&state, &u, &mut g).unwrap();
        assert!(g.iter().all(|v| v.amax() == 0.0));

        // Under strain the energy blend is not force-consistent: the
        // gradient is nonzero inside the blending annulus.
        let mut a = SMatrix::<f64, 2, 2>::identity();
        a[(0, 0)] = 1.03;
        a[(1, 1)] = 0.97;
        a[(0, 1)] = 0.02;
        let mesh = Mesh::build(&MeshParams {
            r_core: 15.0,
            r_domain: 40.0,
            r_blend: 8.0,
            h_factor: 1.0,
        })
        .unwrap();
        let model = AtomisticModel::new(
            Arc::new(MorsePair::default()),
            Arc::new(HomogeneousMap::new(a)),
            None,
        );
        let blend = BlendProfile::ramp(4.0, 8.0).unwrap();
        let state = CoupledState::new(model, mesh, blend, Exec::Seq).unwrap();
        let u = vec![SVector::<f64, 2>::zeros(); state.node_count()];
        let mut g = vec![SVector::<f64, 2>::zeros(); state.node_count()];
        bqce_gradient(&state, &u, &mut g).unwrap();
        let linf = state
            .interior_nodes()
            .iter()
            .map(|&n| g[n as usize].amax())
            .fold(0.0f64, f64::max);
        assert!(linf > 1e-8, "expected ghost forces, got {linf:.3e}");
        // They are confined to the blending annulus and its stencil halo;
        // boundary nodes are clamped and carry reactions instead.
        for &n in state.interior_nodes() {
            let p = state.mesh().node(n);
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            if g[n as usize].amax() > 1e-12 {
                assert!(
                    (2.0..10.0).contains(&r),
                    "ghost force of {:.2e} at radius {r}",
                    g[n as usize].amax()
                );
            }
        }
    }
}
