//! Cauchy–Born finite element functional and the shared element assembly.
//!
//! The FE energy difference is Σ_T w_T (W(∇y₀ + ∇u_h) − W(∇y₀)) with one
//! midpoint quadrature node per triangle. The same loops serve the blended
//! energy with w_T = |T| β(x_T) and the plain functional with w_T = |T|.

use nalgebra::{SMatrix, SVector};

use crate::error::Result;
use crate::exec;

use super::state::{CoupledState, ElemCache};

/// Which midpoint weight the element loop uses.
#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum Weighting {
    /// |T| β(x_T); elements with β(x_T) = 0 are skipped.
    Blended,
    /// |T| on every element.
    Full,
}

#[inline]
fn weight<const M: usize>(e: &ElemCache<M>, w: Weighting) -> f64 {
    match w {
        Weighting::Blended => e.weight_blend,
        Weighting::Full => e.weight_full,
    }
}

fn active<'a, const M: usize>(state: &'a CoupledState<M>, w: Weighting) -> Vec<&'a ElemCache<M>> {
    match w {
        Weighting::Blended => state
            .blended_elems()
            .iter()
            .map(|&t| &state.elems()[t as usize])
            .collect(),
        Weighting::Full => state.elems().iter().collect(),
    }
}

pub(crate) fn fe_energy<const M: usize>(
    state: &CoupledState<M>,
    u: &[SVector<f64, M>],
    w: Weighting,
) -> Result<f64> {
    assert_eq!(u.len(), state.node_count());
    let elems = active(state, w);
    let cb = state.cb();
    exec::try_sum_with_scratch(
        state.exec(),
        elems.len(),
        || (),
        |_, k| {
            let e = elems[k];
            let f = e.ref_grad + CoupledState::elem_gradient(e, u);
            Ok(weight(e, w) * (cb.energy(&f)? - e.ref_w))
        },
    )
}

/// Accumulates the element-loop first variation into `out` (adds; callers
/// zero the buffer). The contribution at node i of element T is
/// w_T ∂W(F_T) ∇λ_i.
pub(crate) fn fe_gradient<const M: usize>(
    state: &CoupledState<M>,
    u: &[SVector<f64, M>],
    w: Weighting,
    out: &mut [SVector<f64, M>],
) -> Result<()> {
    assert_eq!(u.len(), state.node_count());
    assert_eq!(out.len(), state.node_count());
    let elems = active(state, w);
    let cb = state.cb();
    let mut contrib = vec![SVector::<f64, M>::zeros(); 3 * elems.len()];
    exec::try_fill_blocks_with_scratch(state.exec(), &mut contrib, 3, || (), |_, k, block| {
        let e = elems[k];
        let f = e.ref_grad + CoupledState::elem_gradient(e, u);
        let (_, stress) = cb.energy_and_stress(&f)?;
        let wt = weight(e, w);
        for (i, slot) in block.iter_mut().enumerate() {
            let g = e.grads[i];
            *slot = (stress.column(0) * g[0] + stress.column(1) * g[1]) * wt;
        }
        Ok(())
    })?;
    for (k, e) in elems.iter().enumerate() {
        for i in 0..3 {
            out[e.verts[i] as usize] += contrib[3 * k + i];
        }
    }
    Ok(())
}

/// Appends element tangent triplets over node dofs (dof = node·M + comp),
/// optionally scaling each row by a per-node factor.
pub(crate) fn fe_hessian_triplets<const M: usize>(
    state: &CoupledState<M>,
    u: &[SVector<f64, M>],
    w: Weighting,
    row_scale: Option<&dyn Fn(u32) -> f64>,
    trips: &mut Vec<(u32, u32, f64)>,
) -> Result<()> {
    assert_eq!(u.len(), state.node_count());
    let elems = active(state, w);
    let cb = state.cb();
    for e in elems {
        let f = e.ref_grad + CoupledState::elem_gradient(e, u);
        let tangent = cb.tangent(&f)?;
        let wt = weight(e, w);
        for i in 0..3 {
            let ni = e.verts[i];
            let scale = row_scale.map_or(1.0, |s| s(ni)) * wt;
            if scale == 0.0 {
                continue;
            }
            for j in 0..3 {
                let nj = e.verts[j];
                let mut block = SMatrix::<f64, M, M>::zeros();
                for a in 0..2 {
                    for b in 0..2 {
                        block += tangent.block(a, b) * (e.grads[i][a] * e.grads[j][b]);
                    }
                }
                for p in 0..M {
                    for q in 0..M {
                        let v = scale * block[(p, q)];
                        if v != 0.0 {
                            trips.push((ni * M as u32 + p as u32, nj * M as u32 + q as u32, v));
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// E^c_h(y₀ + u_h) − E^c_h(y₀): the Cauchy–Born FE energy difference over
/// the whole mesh, uninfluenced by the blending profile.
pub fn cbfe_energy<const M: usize>(
    state: &CoupledState<M>,
    u: &[SVector<f64, M>],
) -> Result<f64> {
    fe_energy(state, u, Weighting::Full)
}

/// First variation of [`cbfe_energy`] paired with every nodal basis
/// function; `out` is overwritten.
pub fn cbfe_gradient<const M: usize>(
    state: &CoupledState<M>,
    u: &[SVector<f64, M>],
    out: &mut [SVector<f64, M>],
) -> Result<()> {
    out.iter_mut().for_each(|v| *v = SVector::zeros());
    fe_gradient(state, u, Weighting::Full, out)
}

/// Second variation of [`cbfe_energy`] as node-dof triplets.
pub fn cbfe_hessian<const M: usize>(
    state: &CoupledState<M>,
    u: &[SVector<f64, M>],
) -> Result<Vec<(u32, u32, f64)>> {
    let mut trips = Vec::new();
    fe_hessian_triplets(state, u, Weighting::Full, None, &mut trips)?;
    Ok(trips)
}
