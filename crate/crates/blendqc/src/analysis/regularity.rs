//! Decay probes of the smooth interpolant of a lattice displacement.
//!
//! For each probe radius r the table records the maxima of |∇ũ| and
//! |∇²ũ| over a dense deterministic sample of the circle |x| = r, where ũ
//! is the C² interpolant of the site values. Log-log fits of the maxima
//! against r expose the decay exponents that the far-field theory
//! predicts for equilibria around localized defects.

use nalgebra::SVector;

use crate::analysis::fit::log_log_fit;
use crate::geometry::smooth;
use crate::lattice::Site;

/// Decay table of a displacement field over probe radii, with fitted
/// log-log exponents where a fit is meaningful.
#[derive(Clone, Debug)]
pub struct RegularityTable {
    pub radii: Vec<f64>,
    /// max |∇ũ| over each circle (Frobenius norm).
    pub gradient_max: Vec<f64>,
    /// max |∇²ũ| over each circle (Frobenius norm of all second partials).
    pub curvature_max: Vec<f64>,
    /// Fitted exponent of gradient_max ~ r^p, when defined.
    pub gradient_exponent: Option<f64>,
    /// Fitted exponent of curvature_max ~ r^p, when defined.
    pub curvature_exponent: Option<f64>,
    /// Why the fit was refused or skipped, when it was.
    pub refusal: Option<String>,
}

/// Probes the smooth interpolant of `u` on circles of the given radii and
/// fits decay exponents. Radii must be positive; fewer than two radii, or
/// probes that vanish or hit zero, refuse the fit (with the reason
/// recorded) instead of producing one.
pub fn regularity_probe<const M: usize>(
    mut u: impl FnMut(Site) -> SVector<f64, M>,
    radii: &[f64],
) -> RegularityTable {
    let mut gradient_max = Vec::with_capacity(radii.len());
    let mut curvature_max = Vec::with_capacity(radii.len());
    for &r in radii {
        assert!(r > 0.0, "probe radius must be positive, got {r}");
        let samples = (16.0 * r).ceil().max(64.0) as usize;
        let mut gmax = 0.0f64;
        let mut hmax = 0.0f64;
        for k in 0..samples {
            // Offset the angles so lattice symmetry axes are not the only
            // points seen.
            let theta = std::f64::consts::TAU * (k as f64 + 0.37) / samples as f64;
            let x = [r * theta.cos(), r * theta.sin()];
            let eval = smooth::evaluate(&mut u, x);
            gmax = gmax.max(eval.gradient.norm());
            hmax = hmax.max(eval.hessian_norm());
        }
        gradient_max.push(gmax);
        curvature_max.push(hmax);
    }

    let mut refusal = None;
    if radii.len() < 2 {
        refusal = Some(format!(
            "{} probe radius(es) cannot determine a decay exponent; need at least 2",
            radii.len()
        ));
    } else if gradient_max.iter().all(|&g| g == 0.0) {
        refusal = Some("field vanishes at every probe radius; fit skipped".into());
    }

    let (gradient_exponent, curvature_exponent) = if refusal.is_some() {
        (None, None)
    } else {
        let ge = log_log_fit(radii, &gradient_max).map(|f| f.slope);
        let ce = log_log_fit(radii, &curvature_max).map(|f| f.slope);
        if ge.is_none() {
            refusal = Some("a probe maximum is zero or a radius repeats; fit skipped".into());
        }
        (ge, ce)
    };

    RegularityTable {
        radii: radii.to_vec(),
        gradient_max,
        curvature_max,
        gradient_exponent,
        curvature_exponent,
        refusal,
    }
}
