//! Canonical triangulation of the square lattice and its P1 interpolant.
//!
//! Every unit cell [ξ₁, ξ₁+1] × [ξ₂, ξ₂+1] is split along the
//! anti-diagonal into a lower triangle (ξ, ξ+e₁, ξ+e₂) and an upper
//! triangle (ξ+e₁+e₂, ξ+e₂, ξ+e₁). A lattice function extends to a
//! continuous piecewise-affine function by linear interpolation on each
//! triangle; the nodal basis function is [`zeta`].

use nalgebra::{SMatrix, SVector};

use crate::lattice::range::{site_add, Site, E1, E2};

/// The nodal hat function of the canonical triangulation. Supported on the
/// hexagon with vertices ±e₁, ±e₂, ±(e₁−e₂); equals one at the origin.
pub fn zeta(x: [f64; 2]) -> f64 {
    let candidates = [
        1.0 - x[0],
        1.0 + x[0],
        1.0 - x[1],
        1.0 + x[1],
        1.0 - x[0] - x[1],
        1.0 + x[0] + x[1],
    ];
    candidates.iter().fold(f64::INFINITY, |m, &c| m.min(c)).max(0.0)
}

/// A point located inside the canonical triangulation.
#[derive(Clone, Copy, Debug)]
pub struct Located {
    /// Lattice corner of the containing unit cell.
    pub cell: Site,
    /// Whether the point lies in the upper (anti-diagonal) half.
    pub upper: bool,
    /// Barycentric coordinates with respect to [`triangle_sites`] order.
    pub bary: [f64; 3],
}

/// Vertices of one canonical triangle, matching the barycentric order
/// produced by [`locate`].
pub fn triangle_sites(cell: Site, upper: bool) -> [Site; 3] {
    if upper {
        [
            site_add(cell, site_add(E1, E2)),
            site_add(cell, E2),
            site_add(cell, E1),
        ]
    } else {
        [cell, site_add(cell, E1), site_add(cell, E2)]
    }
}

/// Locate the canonical triangle containing x. Points on the anti-diagonal
/// belong to the lower triangle; the result is always a valid barycentric
/// triple summing to one.
pub fn locate(x: [f64; 2]) -> Located {
    let fx = x[0].floor();
    let fy = x[1].floor();
    let cell = [fx as i32, fy as i32];
    let t = [x[0] - fx, x[1] - fy];
    if t[0] + t[1] <= 1.0 {
        Located {
            cell,
            upper: false,
            bary: [1.0 - t[0] - t[1], t[0], t[1]],
        }
    } else {
        Located {
            cell,
            upper: true,
            bary: [t[0] + t[1] - 1.0, 1.0 - t[0], 1.0 - t[1]],
        }
    }
}

/// Value of the P1 interpolant of site values `f` at the point x.
pub fn interpolate<const M: usize>(
    f: &mut impl FnMut(Site) -> SVector<f64, M>,
    x: [f64; 2],
) -> SVector<f64, M> {
    let loc = locate(x);
    let verts = triangle_sites(loc.cell, loc.upper);
    let mut out = SVector::<f64, M>::zeros();
    for (b, v) in loc.bary.iter().zip(verts.iter()) {
        out += f(*v) * *b;
    }
    out
}

/// Constant gradient of the P1 interpolant on one canonical triangle,
/// as an M×2 matrix of partial derivatives.
pub fn triangle_gradient<const M: usize>(
    f: &mut impl FnMut(Site) -> SVector<f64, M>,
    cell: Site,
    upper: bool,
) -> SMatrix<f64, M, 2> {
    let (dx, dy) = if upper {
        let top = f(site_add(cell, site_add(E1, E2)));
        (top - f(site_add(cell, E2)), top - f(site_add(cell, E1)))
    } else {
        let base = f(cell);
        (f(site_add(cell, E1)) - base, f(site_add(cell, E2)) - base)
    };
    let mut g = SMatrix::<f64, M, 2>::zeros();
    g.set_column(0, &dx);
    g.set_column(1, &dy);
    g
}

/// Gradient of the P1 interpolant at a point (piecewise constant).
pub fn gradient_at<const M: usize>(
    f: &mut impl FnMut(Site) -> SVector<f64, M>,
    x: [f64; 2],
) -> SMatrix<f64, M, 2> {
    let loc = locate(x);
    triangle_gradient(f, loc.cell, loc.upper)
}
