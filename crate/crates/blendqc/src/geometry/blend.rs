//! Radial blending between the atomistic core and the continuum.
//!
//! The blend β is zero on the ball |x| ≤ r₀ (pure atomistics), one outside
//! |x| ≥ r₁ (pure continuum), and follows the C² quintic step in between.
//! Degenerate profiles turn a coupled scheme into its pure-atomistic or
//! pure-continuum limit with the same code path.

use nalgebra::{SMatrix, SVector};

use crate::error::{BlendError, Result};

/// Minimum admissible ramp width r₁ − r₀.
pub const MIN_BLEND_WIDTH: f64 = 3.0;

/// The C² quintic step: q(0)=0, q(1)=1, q'=q''=0 at both ends.
pub fn quintic_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
    }
}

/// First derivative of [`quintic_step`].
pub fn quintic_step_d1(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        30.0 * t * t * (1.0 - t) * (1.0 - t)
    }
}

/// Second derivative of [`quintic_step`].
pub fn quintic_step_d2(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        60.0 * t * (1.0 - t) * (1.0 - 2.0 * t)
    }
}

#[derive(Clone, Copy, Debug)]
pub enum BlendProfile {
    /// Radial quintic ramp from 0 at r₀ to 1 at r₁.
    Ramp { r0: f64, r1: f64 },
    /// β ≡ 0.
    AllAtomistic,
    /// β ≡ 1.
    AllContinuum,
}

impl BlendProfile {
    pub fn ramp(r0: f64, r1: f64) -> Result<Self> {
        if !(r0 > 0.0) || !r1.is_finite() {
            return Err(BlendError::Config(format!(
                "blend radii must be positive and finite, got [{r0}, {r1}]"
            )));
        }
        if r1 - r0 < MIN_BLEND_WIDTH {
            return Err(BlendError::Config(format!(
                "blend width {} is below the minimum {MIN_BLEND_WIDTH}",
                r1 - r0
            )));
        }
        Ok(BlendProfile::Ramp { r0, r1 })
    }

    /// Start of the ramp; the atomistic region is |x| ≤ this.
    pub fn inner_radius(&self) -> Option<f64> {
        match self {
            BlendProfile::Ramp { r0, .. } => Some(*r0),
            _ => None,
        }
    }

    /// End of the ramp; the pure continuum is |x| ≥ this.
    pub fn outer_radius(&self) -> Option<f64> {
        match self {
            BlendProfile::Ramp { r1, .. } => Some(*r1),
            _ => None,
        }
    }

    pub fn value_radial(&self, r: f64) -> f64 {
        match self {
            BlendProfile::Ramp { r0, r1 } => quintic_step((r - r0) / (r1 - r0)),
            BlendProfile::AllAtomistic => 0.0,
            BlendProfile::AllContinuum => 1.0,
        }
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        self.value_radial((x[0] * x[0] + x[1] * x[1]).sqrt())
    }

    pub fn gradient(&self, x: [f64; 2]) -> SVector<f64, 2> {
        match self {
            BlendProfile::Ramp { r0, r1 } => {
                let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
                if r == 0.0 {
                    return SVector::zeros();
                }
                let w = r1 - r0;
                let slope = quintic_step_d1((r - r0) / w) / w;
                SVector::<f64, 2>::new(x[0] / r, x[1] / r) * slope
            }
            _ => SVector::zeros(),
        }
    }

    pub fn hessian(&self, x: [f64; 2]) -> SMatrix<f64, 2, 2> {
        match self {
            BlendProfile::Ramp { r0, r1 } => {
                let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
                if r == 0.0 {
                    return SMatrix::zeros();
                }
                let w = r1 - r0;
                let t = (r - r0) / w;
                let d1 = quintic_step_d1(t) / w;
                let d2 = quintic_step_d2(t) / (w * w);
                let n = SVector::<f64, 2>::new(x[0] / r, x[1] / r);
                let radial = n * n.transpose();
                let tangential = SMatrix::<f64, 2, 2>::identity() - radial;
                radial * d2 + tangential * (d1 / r)
            }
            _ => SMatrix::zeros(),
        }
    }

    /// Largest |∇β| over the plane: 15/(8w) for a ramp of width w.
    pub fn max_slope(&self) -> f64 {
        match self {
            BlendProfile::Ramp { r0, r1 } => 15.0 / (8.0 * (r1 - r0)),
            _ => 0.0,
        }
    }
}
