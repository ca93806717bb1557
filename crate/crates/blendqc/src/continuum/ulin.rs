//! Linear-elasticity predictor for an anti-plane screw dislocation.
//!
//! For the anti-plane tangent c (a 2×2 SPD matrix), the displacement
//!
//!   u(x) = b/2π · mod_{2π}( arg(S z) − α ),   z = x − x̂,  S = c^{−1/2},
//!
//! solves div(c ∇u) = 0 away from the core x̂ and carries a jump of
//! exactly b across the branch cut Γ = { z₁ ≥ 0, z₂ = 0 }. α is the angle
//! of S e₁, which pins the cut to Γ for any anisotropy; the on-cut value
//! is the limit from above (u = 0 on Γ⁺). The core is conventionally
//! placed at a cell midpoint so no lattice site or element quadrature
//! point touches the cut or the singularity.

use nalgebra::{SMatrix, SVector};

use crate::error::{BlendError, Result};
use crate::lattice::model::ReferenceMap;
use crate::lattice::range::Site;

const TAU: f64 = 2.0 * std::f64::consts::PI;

/// Conventional core offset: the midpoint of the unit cell at the origin.
pub const CORE_OFFSET: [f64; 2] = [0.5, 0.5];

/// Screw dislocation displacement predictor.
#[derive(Clone, Debug)]
pub struct ScrewPredictor {
    burgers: f64,
    s: SMatrix<f64, 2, 2>,
    alpha: f64,
    core: [f64; 2],
}

/// Inverse square root of a 2×2 SPD matrix, via the closed form
/// sqrt(A) = (A + √det A · I) / √(tr A + 2 √det A).
fn inv_sqrt_spd(c: &SMatrix<f64, 2, 2>) -> Result<SMatrix<f64, 2, 2>> {
    let det = c[(0, 0)] * c[(1, 1)] - c[(0, 1)] * c[(1, 0)];
    let tr = c[(0, 0)] + c[(1, 1)];
    if det <= 0.0 || tr <= 0.0 || (c[(0, 1)] - c[(1, 0)]).abs() > 1e-10 * tr.abs() {
        return Err(BlendError::Config(
            "anti-plane tangent must be symmetric positive definite".into(),
        ));
    }
    let sqrt_det = det.sqrt();
    let denom = (tr + 2.0 * sqrt_det).sqrt();
    let sqrt_c = (c + SMatrix::<f64, 2, 2>::identity() * sqrt_det) / denom;
    sqrt_c.try_inverse().ok_or_else(|| {
        BlendError::Config("anti-plane tangent square root is singular".into())
    })
}

impl ScrewPredictor {
    /// Predictor for an isotropic medium (S = I).
    pub fn isotropic(burgers: f64, core: [f64; 2]) -> Self {
        Self {
            burgers,
            s: SMatrix::identity(),
            alpha: 0.0,
            core,
        }
    }

    /// Predictor matched to an anti-plane tangent c.
    pub fn from_tangent(c: &SMatrix<f64, 2, 2>, burgers: f64, core: [f64; 2]) -> Result<Self> {
        let s = inv_sqrt_spd(c)?;
        let alpha = (s[(1, 0)]).atan2(s[(0, 0)]);
        Ok(Self {
            burgers,
            s,
            alpha,
            core,
        })
    }

    pub fn burgers(&self) -> f64 {
        self.burgers
    }

    pub fn core(&self) -> [f64; 2] {
        self.core
    }

    #[inline]
    fn mapped(&self, x: [f64; 2]) -> SVector<f64, 2> {
        self.s * SVector::<f64, 2>::new(x[0] - self.core[0], x[1] - self.core[1])
    }

    /// u(x); the jump across Γ is exactly `burgers`. Exactly on the cut
    /// the value is the limit from above (bitwise for isotropic S; up to
    /// phase roundoff otherwise). Callers keep evaluation points off the
    /// cut, which the half-integer core offset guarantees for every
    /// lattice site and mesh node.
    pub fn displacement(&self, x: [f64; 2]) -> f64 {
        let w = self.mapped(x);
        let phase = (w[1].atan2(w[0]) - self.alpha).rem_euclid(TAU);
        self.burgers / TAU * phase
    }

    /// ∇u(x) = b/2π · Sᵀ ∇arg(w), single-valued away from the core.
    pub fn displacement_gradient(&self, x: [f64; 2]) -> SVector<f64, 2> {
        let w = self.mapped(x);
        let r2 = w[0] * w[0] + w[1] * w[1];
        let darg = SVector::<f64, 2>::new(-w[1] / r2, w[0] / r2);
        self.s.transpose() * darg * (self.burgers / TAU)
    }

    /// Frobenius norm of ∇²u(x). For the mapped angle z ↦ arg z,
    /// ∇²arg(z) = [[2 z₁z₂, z₂²−z₁²], [z₂²−z₁², −2 z₁z₂]] / |z|⁴.
    pub fn second_gradient_norm(&self, x: [f64; 2]) -> f64 {
        let w = self.mapped(x);
        let r4 = (w[0] * w[0] + w[1] * w[1]).powi(2);
        let h = SMatrix::<f64, 2, 2>::new(
            2.0 * w[0] * w[1],
            w[1] * w[1] - w[0] * w[0],
            w[1] * w[1] - w[0] * w[0],
            -2.0 * w[0] * w[1],
        ) / r4;
        (self.s.transpose() * h * self.s * (self.burgers / TAU)).norm()
    }
}

impl ReferenceMap<1> for ScrewPredictor {
    fn value(&self, x: [f64; 2]) -> SVector<f64, 1> {
        SVector::<f64, 1>::new(self.displacement(x))
    }

    fn gradient(&self, x: [f64; 2]) -> SMatrix<f64, 1, 2> {
        let g = self.displacement_gradient(x);
        SMatrix::<f64, 1, 2>::new(g[0], g[1])
    }

    fn exact_difference(&self, _rho: Site) -> Option<SVector<f64, 1>> {
        None
    }

    fn far_field(&self) -> SMatrix<f64, 1, 2> {
        SMatrix::zeros()
    }
}
