//! Shared pieces of the Newton drivers: backtracking line search with
//! collapse-aware rejection and the convergence-tail diagnostic.

use crate::error::{BlendError, Result};

/// Armijo sufficient-decrease coefficient.
pub(crate) const ARMIJO_C: f64 = 1e-4;
/// Step-halving floor; below this the line search gives up.
pub(crate) const MIN_STEP: f64 = 1e-9;

/// Outcome of one backtracking search.
pub(crate) enum Step {
    /// Accepted step length and the merit value there.
    Accepted(f64, f64),
    /// Every trial down to the floor collapsed a stencil.
    Collapse,
    /// No trial satisfied the decrease condition.
    Failure,
}

/// Backtracks from t = 1 until `eval(t) ≤ f0 + c·t·slope`. `eval` returns
/// `Ok(None)` when the trial state is invalid (collapsing stencil), which
/// rejects the step and halves again.
pub(crate) fn backtrack(
    f0: f64,
    slope: f64,
    mut eval: impl FnMut(f64) -> Result<Option<f64>>,
) -> Result<Step> {
    debug_assert!(slope < 0.0, "search direction must be descent");
    let mut t = 1.0;
    let mut last_collapsed = false;
    while t >= MIN_STEP {
        match eval(t)? {
            Some(ft) if ft <= f0 + ARMIJO_C * t * slope => return Ok(Step::Accepted(t, ft)),
            Some(_) => last_collapsed = false,
            None => last_collapsed = true,
        }
        t *= 0.5;
    }
    Ok(if last_collapsed {
        Step::Collapse
    } else {
        Step::Failure
    })
}

/// Backtracks from t = 1 accepting on residual decrease: `eval(t)` returns
/// the trial residual norm, accepted once it drops below `0.9 · r0`. Used
/// near convergence, where the energy decrease of a Newton step falls
/// below what f64 evaluation of the total energy can resolve and the
/// sufficient-decrease test degenerates into rounding luck.
pub(crate) fn backtrack_residual(
    r0: f64,
    mut eval: impl FnMut(f64) -> Result<Option<f64>>,
) -> Result<Step> {
    let mut t = 1.0;
    let mut last_collapsed = false;
    while t >= MIN_STEP {
        match eval(t)? {
            Some(rt) if rt <= 0.9 * r0 => return Ok(Step::Accepted(t, rt)),
            Some(_) => last_collapsed = false,
            None => last_collapsed = true,
        }
        t *= 0.5;
    }
    Ok(if last_collapsed {
        Step::Collapse
    } else {
        Step::Failure
    })
}

/// True when an energy slope is too small for the sufficient-decrease test
/// to be meaningful at this energy scale: the predicted decrease is within
/// a few hundred ulps of `f`.
pub(crate) fn slope_below_resolution(slope: f64, f: f64) -> bool {
    slope.abs() <= 1e-12 * f.abs().max(1.0)
}

/// Maps a stencil-collapse error to `None` and passes other errors
/// through, for use inside line-search trials.
pub(crate) fn catch_collapse<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(BlendError::StencilCollapse { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

pub(crate) fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn linf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Checks the quadratic convergence tail of a Newton residual history:
/// every consecutive pair with r_k inside (1e-8, 1e-4) must satisfy
/// r_{k+1} < r_k^{3/2}. Below 1e-8 the next residual is dominated by
/// floating-point noise of the assembly and the bound no longer applies.
pub fn quadratic_tail_ok(history: &[f64]) -> bool {
    history
        .windows(2)
        .all(|w| !(1e-8..1e-4).contains(&w[0]) || w[1] < w[0].powf(1.5))
}
