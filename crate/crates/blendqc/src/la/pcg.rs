//! Preconditioned conjugate gradients over block vectors.

use nalgebra::SVector;

use crate::error::{BlendError, Result};
use crate::exec::{self, Exec};

/// Outcome of an iterative solve.
#[derive(Debug, Clone, Copy)]
pub struct IterStats {
    pub iterations: usize,
    /// Final residual norm relative to the right-hand side.
    pub relative_residual: f64,
}

/// Deterministic dot over block vectors.
pub fn block_dot<const M: usize>(
    exec: Exec,
    a: &[SVector<f64, M>],
    b: &[SVector<f64, M>],
) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    exec::sum_indexed(exec, a.len(), |i| a[i].dot(&b[i]))
}

pub fn block_norm<const M: usize>(exec: Exec, a: &[SVector<f64, M>]) -> f64 {
    block_dot(exec, a, a).sqrt()
}

/// Solves A x = b for a symmetric positive definite operator, starting from
/// the value already in `x`. `apply_a` and `apply_p` write their result into
/// the provided output slice; `apply_p` applies an SPD preconditioner
/// approximating A^-1. Terminates when the residual drops below
/// `rel_tol * max(||b||, tiny)`.
pub fn pcg<const M: usize>(
    exec: Exec,
    mut apply_a: impl FnMut(&[SVector<f64, M>], &mut [SVector<f64, M>]) -> Result<()>,
    mut apply_p: impl FnMut(&[SVector<f64, M>], &mut [SVector<f64, M>]) -> Result<()>,
    b: &[SVector<f64, M>],
    x: &mut [SVector<f64, M>],
    rel_tol: f64,
    max_iter: usize,
) -> Result<IterStats> {
    let n = b.len();
    assert_eq!(x.len(), n);
    let b_norm = block_norm(exec, b).max(1e-300);
    let target = rel_tol * b_norm;

    let mut r = vec![SVector::<f64, M>::zeros(); n];
    let mut z = vec![SVector::<f64, M>::zeros(); n];
    let mut p = vec![SVector::<f64, M>::zeros(); n];
    let mut q = vec![SVector::<f64, M>::zeros(); n];

    apply_a(x, &mut r)?;
    exec::update_indexed(exec, &mut r, |i, ri| b[i] - ri);
    let mut r_norm = block_norm(exec, &r);
    if r_norm <= target {
        return Ok(IterStats {
            iterations: 0,
            relative_residual: r_norm / b_norm,
        });
    }
    apply_p(&r, &mut z)?;
    p.copy_from_slice(&z);
    let mut rz = block_dot(exec, &r, &z);
    if !(rz.is_finite() && rz > 0.0) {
        return Err(BlendError::Linear(format!(
            "preconditioned residual product {rz:.3e} is not positive"
        )));
    }

    for it in 1..=max_iter {
        apply_a(&p, &mut q)?;
        let pq = block_dot(exec, &p, &q);
        if !(pq.is_finite() && pq > 0.0) {
            return Err(BlendError::Linear(format!(
                "conjugate gradients hit a non-positive curvature {pq:.3e} at iteration {it}"
            )));
        }
        let alpha = rz / pq;
        exec::update_indexed(exec, x, |i, xi| xi + p[i] * alpha);
        exec::update_indexed(exec, &mut r, |i, ri| ri - q[i] * alpha);
        r_norm = block_norm(exec, &r);
        if r_norm <= target {
            return Ok(IterStats {
                iterations: it,
                relative_residual: r_norm / b_norm,
            });
        }
        apply_p(&r, &mut z)?;
        let rz_next = block_dot(exec, &r, &z);
        if !(rz_next.is_finite() && rz_next > 0.0) {
            return Err(BlendError::Linear(format!(
                "preconditioned residual product {rz_next:.3e} is not positive"
            )));
        }
        let beta = rz_next / rz;
        rz = rz_next;
        exec::update_indexed(exec, &mut p, |i, pi| z[i] + pi * beta);
    }
    Err(BlendError::Solve(format!(
        "conjugate gradients stalled at relative residual {:.3e} after {max_iter} iterations",
        r_norm / b_norm
    )))
}

/// Preconditioner that copies the residual through (plain CG).
pub fn identity_preconditioner<const M: usize>(
    r: &[SVector<f64, M>],
    z: &mut [SVector<f64, M>],
) -> Result<()> {
    z.copy_from_slice(r);
    Ok(())
}
