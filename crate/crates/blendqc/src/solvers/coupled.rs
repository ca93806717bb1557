//! Newton drivers for the two coupled methods: a line-searched energy
//! minimizer with a symmetric banded factorization for the blended energy
//! method, and a damped residual Newton with a banded LU of the
//! nonsymmetric jacobian for the blended force method.

use nalgebra::SVector;

use crate::error::Result;
use crate::la::{reverse_cuthill_mckee, BandedLu, Csr, SymBanded, SymBandedLdlt};
use crate::methods::{
    bqce_energy, bqce_gradient, bqce_hessian, bqcf_apply, bqcf_jacobian, CoupledState,
};
use crate::solvers::newton::{
    backtrack, backtrack_residual, catch_collapse, l2, linf, slope_below_resolution, Step,
};
use crate::solvers::pack::DofMap;
use crate::solvers::stiffness::{expand_components, mesh_stiffness};
use crate::solvers::{SolveReport, SolveStatus};

/// A symmetric banded LDLᵀ factorization bundled with the fill-reducing
/// permutation it was computed under.
struct SymFactor {
    perm: Vec<u32>,
    factor: SymBandedLdlt,
}

impl SymFactor {
    /// Factors the matrix given by `trips` plus `shift`·I.
    fn build(n: usize, trips: &[(u32, u32, f64)], shift: f64) -> Result<SymFactor> {
        let a = Csr::from_triplets(n, n, trips)?;
        let perm = reverse_cuthill_mckee(&a);
        let ap = a.permute_symmetric(&perm)?;
        let mut banded = SymBanded::from_csr_lower(&ap)?;
        if shift != 0.0 {
            banded = banded.shifted(-shift);
        }
        Ok(SymFactor {
            perm,
            factor: banded.ldlt()?,
        })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut pb: Vec<f64> = self.perm.iter().map(|&p| b[p as usize]).collect();
        self.factor.solve_in_place(&mut pb);
        let mut x = vec![0.0; b.len()];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p as usize] = pb[i];
        }
        x
    }
}

fn diag_scale(trips: &[(u32, u32, f64)]) -> f64 {
    trips
        .iter()
        .filter(|t| t.0 == t.1)
        .fold(0.0f64, |m, t| m.max(t.2.abs()))
        .max(1.0)
}

fn csr_triplets(a: &Csr) -> Vec<(u32, u32, f64)> {
    let mut out = Vec::with_capacity(a.nnz());
    for i in 0..a.n_rows() {
        let (cols, vals) = a.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            out.push((i as u32, c, v));
        }
    }
    out
}

/// Dual norm √(gᵀ K⁻¹ g) of a nodal residual against the H¹ seminorm,
/// with K the stiffness matrix of the ambient triangulation after
/// boundary elimination.
pub fn h1_dual_norm<const M: usize>(
    state: &CoupledState<M>,
    g: &[SVector<f64, M>],
) -> Result<f64> {
    let map = DofMap::interior(state.mesh(), M);
    if map.is_empty() {
        return Ok(0.0);
    }
    let k = map.pack_triplets(&expand_components::<M>(&mesh_stiffness(state.mesh())));
    let factor = SymFactor::build(map.len(), &k, 0.0)?;
    let gp = map.pack_vec(g);
    let z = factor.solve(&gp);
    let q: f64 = gp.iter().zip(&z).map(|(a, b)| a * b).sum();
    Ok(q.max(0.0).sqrt())
}

fn seeded_interior<const M: usize>(
    state: &CoupledState<M>,
    init: Option<&[SVector<f64, M>]>,
) -> Vec<SVector<f64, M>> {
    let n = state.node_count();
    let mut u = vec![SVector::<f64, M>::zeros(); n];
    if let Some(v) = init {
        assert_eq!(v.len(), n, "initial guess must cover every mesh node");
        for &node in state.interior_nodes() {
            u[node as usize] = v[node as usize];
        }
    }
    u
}

/// Minimizes the blended energy over the interior nodal displacements by
/// a backtracking Newton method. Converges when the Euclidean norm of the
/// reduced gradient drops to `tol`; the final report certifies positive
/// definiteness of the reduced second variation (otherwise the status is
/// [`SolveStatus::Saddle`]).
pub fn solve_bqce<const M: usize>(
    state: &CoupledState<M>,
    init: Option<&[SVector<f64, M>]>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<SVector<f64, M>>, SolveReport)> {
    let map = DofMap::interior(state.mesh(), M);
    let n = state.node_count();
    let mut u = seeded_interior(state, init);
    let mut g = vec![SVector::<f64, M>::zeros(); n];
    let mut g_trial = vec![SVector::<f64, M>::zeros(); n];
    let mut delta = vec![SVector::<f64, M>::zeros(); n];
    let mut trial = u.clone();

    let mut residual_history = Vec::new();
    let mut energy_history = Vec::new();
    let mut iterations = 0usize;
    let mut shifted_retries = 0u32;
    let mut status;

    let mut f = bqce_energy(state, &u)?;
    loop {
        bqce_gradient(state, &u, &mut g)?;
        let gp = map.pack_vec(&g);
        let r = l2(&gp);
        residual_history.push(r);
        energy_history.push(f);
        if r <= tol {
            status = SolveStatus::Converged;
            break;
        }
        if iterations >= max_iter {
            status = SolveStatus::MaxIter;
            break;
        }

        // Newton direction from the reduced second variation; a stalled
        // pivot retries with a growing diagonal shift.
        let trips = map.pack_triplets(&bqce_hessian(state, &u)?);
        let scale = diag_scale(&trips);
        let mut shift = 0.0;
        let mut direction: Option<Vec<f64>> = None;
        for _ in 0..4 {
            match SymFactor::build(map.len(), &trips, shift) {
                Ok(factor) => {
                    let rhs: Vec<f64> = gp.iter().map(|x| -x).collect();
                    direction = Some(factor.solve(&rhs));
                    break;
                }
                Err(_) => {
                    shift = if shift == 0.0 { 1e-8 * scale } else { shift * 100.0 };
                    shifted_retries += 1;
                }
            }
        }
        let mut dp = direction.unwrap_or_else(|| gp.iter().map(|x| -x).collect());
        let mut slope: f64 = gp.iter().zip(&dp).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            // Indefinite curvature can point uphill; fall back to the
            // steepest descent direction.
            dp = gp.iter().map(|x| -x).collect();
            slope = -(r * r);
        }
        map.unpack_into(&dp, &mut delta);

        // Near convergence the energy decrease of a step drops below f64
        // resolution of the total energy; certify those steps by residual
        // decrease instead.
        let quantized = slope_below_resolution(slope, f);
        let step = if quantized {
            backtrack_residual(r, |t| {
                for i in 0..n {
                    trial[i] = u[i] + t * delta[i];
                }
                match catch_collapse(bqce_gradient(state, &trial, &mut g_trial))? {
                    None => Ok(None),
                    Some(()) => Ok(Some(l2(&map.pack_vec(&g_trial)))),
                }
            })?
        } else {
            backtrack(f, slope, |t| {
                for i in 0..n {
                    trial[i] = u[i] + t * delta[i];
                }
                catch_collapse(bqce_energy(state, &trial))
            })?
        };
        match step {
            Step::Accepted(t, value) => {
                for i in 0..n {
                    u[i] += t * delta[i];
                }
                f = if quantized {
                    bqce_energy(state, &u)?
                } else {
                    value
                };
                iterations += 1;
            }
            Step::Collapse => {
                status = SolveStatus::Collapse;
                break;
            }
            Step::Failure => {
                status = SolveStatus::LineSearchFailure;
                break;
            }
        }
    }

    // Every loop exit happens right after a gradient evaluation at the
    // current iterate, so `g` is up to date here.
    if status == SolveStatus::Converged && !map.is_empty() {
        let trips = map.pack_triplets(&bqce_hessian(state, &u)?);
        let definite = SymFactor::build(map.len(), &trips, 0.0)
            .map(|factor| factor.factor.inertia().0 == 0)
            .unwrap_or(false);
        if !definite {
            status = SolveStatus::Saddle;
        }
    }
    let gp = map.pack_vec(&g);
    let report = SolveReport {
        status,
        iterations,
        residual_history,
        energy_history,
        residual_dual: h1_dual_norm(state, &g)?,
        residual_linf: linf(&gp),
        energy: Some(f),
        shifted_retries,
    };
    Ok((u, report))
}

/// Solves the blended force balance by a damped Newton method on the
/// residual, factoring the nonsymmetric jacobian with a banded LU. A
/// singular factorization is retried once with a small multiple of the
/// identity added; convergence is certified by the inertia of the
/// symmetrized jacobian.
pub fn solve_bqcf<const M: usize>(
    state: &CoupledState<M>,
    init: Option<&[SVector<f64, M>]>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<SVector<f64, M>>, SolveReport)> {
    let map = DofMap::interior(state.mesh(), M);
    let n = state.node_count();
    let mut u = seeded_interior(state, init);
    let mut fvec = vec![SVector::<f64, M>::zeros(); n];
    let mut trial_f = vec![SVector::<f64, M>::zeros(); n];
    let mut delta = vec![SVector::<f64, M>::zeros(); n];
    let mut trial = u.clone();

    let mut residual_history = Vec::new();
    let mut iterations = 0usize;
    let mut shifted_retries = 0u32;
    let mut status;

    'outer: loop {
        bqcf_apply(state, &u, &mut fvec)?;
        let fp = map.pack_vec(&fvec);
        let r = l2(&fp);
        residual_history.push(r);
        if r <= tol {
            status = SolveStatus::Converged;
            break;
        }
        if iterations >= max_iter {
            status = SolveStatus::MaxIter;
            break;
        }

        let trips = map.pack_triplets(&bqcf_jacobian(state, &u)?);
        let j = Csr::from_triplets(map.len(), map.len(), &trips)?;
        let perm = reverse_cuthill_mckee(&j);
        let jp = j.permute_symmetric(&perm)?;
        let lu = match BandedLu::factor_csr(&jp) {
            Ok(lu) => lu,
            Err(_) => {
                // One damped retry with λI added before giving up.
                shifted_retries += 1;
                let lam = 1e-8 * diag_scale(&trips);
                let mut shifted = trips.clone();
                for i in 0..map.len() as u32 {
                    shifted.push((i, i, lam));
                }
                let j2 = Csr::from_triplets(map.len(), map.len(), &shifted)?;
                match BandedLu::factor_csr(&j2.permute_symmetric(&perm)?) {
                    Ok(lu) => lu,
                    Err(_) => {
                        status = SolveStatus::Singular;
                        break 'outer;
                    }
                }
            }
        };
        let mut rhs: Vec<f64> = perm.iter().map(|&p| -fp[p as usize]).collect();
        lu.solve_in_place(&mut rhs);
        let mut dp = vec![0.0; map.len()];
        for (i, &p) in perm.iter().enumerate() {
            dp[p as usize] = rhs[i];
        }
        map.unpack_into(&dp, &mut delta);

        // Backtrack on the residual norm itself: the Newton direction
        // predicts ‖F(u + tδ)‖ ≈ (1 − t)‖F(u)‖, i.e. slope −‖F‖.
        let step = backtrack(r, -r, |t| {
            for i in 0..n {
                trial[i] = u[i] + t * delta[i];
            }
            catch_collapse(
                bqcf_apply(state, &trial, &mut trial_f).map(|()| l2(&map.pack_vec(&trial_f))),
            )
        })?;
        match step {
            Step::Accepted(t, _) => {
                for i in 0..n {
                    u[i] += t * delta[i];
                }
                iterations += 1;
            }
            Step::Collapse => {
                status = SolveStatus::Collapse;
                break;
            }
            Step::Failure => {
                status = SolveStatus::LineSearchFailure;
                break;
            }
        }
    }

    if status == SolveStatus::Converged && !map.is_empty() {
        let trips = map.pack_triplets(&bqcf_jacobian(state, &u)?);
        let j = Csr::from_triplets(map.len(), map.len(), &trips)?;
        let stable = SymFactor::build(map.len(), &csr_triplets(&j.symmetrize()?), 0.0)
            .map(|factor| factor.factor.inertia().0 == 0)
            .unwrap_or(false);
        if !stable {
            status = SolveStatus::Saddle;
        }
    }
    let fp = map.pack_vec(&fvec);
    let report = SolveReport {
        status,
        iterations,
        residual_history,
        energy_history: Vec::new(),
        residual_dual: h1_dual_norm(state, &fvec)?,
        residual_linf: linf(&fp),
        energy: None,
        shifted_retries,
    };
    Ok((u, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BlendProfile;
    use crate::exec::Exec;
    use crate::geometry::{Mesh, MeshParams};
    use crate::lattice::{AtomisticModel, HomogeneousMap, Impurity, MorsePair};
    use crate::solvers::newton::quadratic_tail_ok;
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
            r_core: 9.0,
            r_domain: 18.0,
            r_blend: 6.0,
            h_factor: 1.0,
        })
        .unwrap();
        let blend = BlendProfile::ramp(3.0, 6.0).unwrap();
        CoupledState::new(model(kappa), mesh, blend, Exec::Seq).unwrap()
    }

    fn atomistic_state(kappa: f64) -> CoupledState<2> {
        let mesh = Mesh::build(&MeshParams {
            r_core: 10.0,
            r_domain: 8.0,
            r_blend: 4.0,
            h_factor: 1.0,
        })
        .unwrap();
        CoupledState::new(model(kappa), mesh, BlendProfile::AllAtomistic, Exec::Seq).unwrap()
    }

    #[test]
    fn stress_free_states_converge_without_iterations() {
        let state = blended_state(0.0);
        let (u, report) = solve_bqce(&state, None, 1e-10, 20).unwrap();
        assert_eq!(report.status, SolveStatus::Converged);
        assert_eq!(report.iterations, 0);
        assert_eq!(report.residual_history, vec![0.0]);
        assert_eq!(report.energy, Some(0.0));
        assert!(u.iter().all(|v| *v == SVector::<f64, 2>::zeros()));

        let (_, report) = solve_bqcf(&state, None, 1e-10, 20).unwrap();
        assert_eq!(report.status, SolveStatus::Converged);
        assert_eq!(report.iterations, 0);
        assert_eq!(report.residual_history, vec![0.0]);
        assert_eq!(report.energy, None);
    }

    #[test]
    fn energy_method_minimizes_the_impurity_state() {
        let state = blended_state(0.3);
        let (u, report) = solve_bqce(&state, None, 1e-10, 30).unwrap();
        assert_eq!(report.status, SolveStatus::Converged, "{report:?}");
        assert!(report.iterations >= 1);
        assert!(*report.residual_history.last().unwrap() <= 1e-10);
        assert!(report.residual_linf <= 1e-10);
        assert!(report.residual_dual <= 1e-8);
        // The line search only ever accepts strict decrease.
        assert!(report
            .energy_history
            .windows(2)
            .all(|w| w[1] < w[0] + 1e-15));
        assert!(report.energy.unwrap() < report.energy_history[0]);
        assert!(quadratic_tail_ok(&report.residual_history));
        // The relaxation is localized around the defect.
        let peak = u
            .iter()
            .map(|v| v.norm())
            .fold(0.0f64, f64::max);
        assert!(peak > 1e-4, "{peak}");
    }

    #[test]
    fn multi_start_minimizers_agree() {
        let state = blended_state(0.3);
        let (u0, r0) = solve_bqce(&state, None, 1e-10, 30).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut init = vec![SVector::<f64, 2>::zeros(); state.node_count()];
        for &node in state.interior_nodes() {
            init[node as usize] =
                SVector::<f64, 2>::new(rng.gen_range(-0.02..0.02), rng.gen_range(-0.02..0.02));
        }
        let (u1, r1) = solve_bqce(&state, Some(&init), 1e-10, 40).unwrap();
        assert_eq!(r0.status, SolveStatus::Converged);
        assert_eq!(r1.status, SolveStatus::Converged);
        assert!((r0.energy.unwrap() - r1.energy.unwrap()).abs() <= 1e-8);
        let diff = u0
            .iter()
            .zip(&u1)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0f64, f64::max);
        assert!(diff <= 1e-6, "{diff}");
    }

    #[test]
    fn force_method_matches_the_energy_method_when_fully_atomistic() {
        let state = atomistic_state(0.3);
        let (ue, re) = solve_bqce(&state, None, 1e-10, 30).unwrap();
        let (uf, rf) = solve_bqcf(&state, None, 1e-10, 30).unwrap();
        assert_eq!(re.status, SolveStatus::Converged);
        assert_eq!(rf.status, SolveStatus::Converged, "{rf:?}");
        assert!(rf.iterations >= 1);
        let diff = ue
            .iter()
            .zip(&uf)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0f64, f64::max);
        assert!(diff <= 1e-6, "{diff}");
    }

    #[test]
    fn force_method_solves_the_blended_impurity_state() {
        let state = blended_state(0.3);
        let (u, report) = solve_bqcf(&state, None, 1e-10, 30).unwrap();
        assert_eq!(report.status, SolveStatus::Converged, "{report:?}");
        assert!(*report.residual_history.last().unwrap() <= 1e-10);
        assert!(report.shifted_retries == 0);
        let peak = u.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
        assert!(peak > 1e-4, "{peak}");
    }
}
