//! Bond-averaged hat weights and convolution smoothing of P1 fields.
//!
//! The weight ω_ρ(z) = ∫₀¹ ζ(z + sρ) ds localizes a bond (ξ, ξ+ρ) onto the
//! continuum; it drives the lattice stress diagnostic. The smoothing
//! v* = ζ ∗ v̄ of the piecewise-affine extension v̄ of a site function is
//! used to certify that smoothing keeps a definite fraction of the
//! Dirichlet energy, so discrete and smoothed gradients are interchangeable
//! in error norms up to fixed constants.

use nalgebra::{SMatrix, SVector};

use crate::geometry::canonical::{triangle_gradient, triangle_sites, zeta};
use crate::geometry::quad;
use crate::lattice::range::Site;

/// Measured lower bound for ‖∇(ζ∗v̄)‖² / ‖∇v̄‖² over compactly supported
/// site functions, derated by 10%. The worst observed field is the
/// (−1)^{ξ₁+ξ₂} checkerboard, which smoothing damps the hardest.
pub const SMOOTHING_SEMINORM_LOWER: f64 = 0.1;

/// ω_ρ(z) = ∫₀¹ ζ(z + sρ) ds, integrated exactly by splitting the segment
/// at every crossing of a kink line of ζ.
pub fn bond_weight(z: [f64; 2], rho: Site) -> f64 {
    let r = [rho[0] as f64, rho[1] as f64];
    let head = [z[0] + r[0], z[1] + r[1]];
    // If one of the six bounding forms is nonpositive at both endpoints it
    // is nonpositive along the segment, so ζ vanishes there.
    let forms = |p: [f64; 2]| {
        [
            1.0 - p[0],
            1.0 + p[0],
            1.0 - p[1],
            1.0 + p[1],
            1.0 - p[0] - p[1],
            1.0 + p[0] + p[1],
        ]
    };
    let fa = forms(z);
    let fb = forms(head);
    for k in 0..6 {
        if fa[k] <= 0.0 && fb[k] <= 0.0 {
            return 0.0;
        }
    }
    // ζ is affine between consecutive crossings of the lines
    // x₁ ∈ {−1,0,1}, x₂ ∈ {−1,0,1}, x₁+x₂ ∈ {−1,0,1}.
    let mut breaks: Vec<f64> = vec![0.0, 1.0];
    for n in [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]] {
        let dn = n[0] * r[0] + n[1] * r[1];
        if dn.abs() < 1e-14 {
            continue;
        }
        let zn = n[0] * z[0] + n[1] * z[1];
        for c in [-1.0, 0.0, 1.0] {
            let s = (c - zn) / dn;
            if s > 0.0 && s < 1.0 {
                breaks.push(s);
            }
        }
    }
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (s0, s1) = (w[0], w[1]);
        if s1 - s0 < 1e-15 {
            continue;
        }
        let za = zeta([z[0] + s0 * r[0], z[1] + s0 * r[1]]);
        let zb = zeta([z[0] + s1 * r[0], z[1] + s1 * r[1]]);
        total += 0.5 * (za + zb) * (s1 - s0);
    }
    total
}

/// The six triangles of the hexagonal support of ζ, counterclockwise.
fn hexagon_triangles() -> [[[f64; 2]; 3]; 6] {
    let h = [
        [1.0, 0.0],
        [0.0, 1.0],
        [-1.0, 1.0],
        [-1.0, 0.0],
        [0.0, -1.0],
        [1.0, -1.0],
    ];
    let mut out = [[[0.0; 2]; 3]; 6];
    for k in 0..6 {
        out[k] = [[0.0, 0.0], h[k], h[(k + 1) % 6]];
    }
    out
}

/// Sutherland–Hodgman clip of `subject` against a counterclockwise
/// triangle. `scratch` holds the intermediate polygon.
fn clip_to_triangle(
    subject: &[[f64; 2]],
    tri: &[[f64; 2]; 3],
    out: &mut Vec<[f64; 2]>,
    scratch: &mut Vec<[f64; 2]>,
) {
    out.clear();
    out.extend_from_slice(subject);
    for e in 0..3 {
        let p = tri[e];
        let q = tri[(e + 1) % 3];
        scratch.clear();
        let side = |r: [f64; 2]| (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
        let n = out.len();
        for i in 0..n {
            let a = out[i];
            let b = out[(i + 1) % n];
            let da = side(a);
            let db = side(b);
            if da >= 0.0 {
                scratch.push(a);
            }
            if (da >= 0.0) != (db >= 0.0) {
                let t = da / (da - db);
                scratch.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
            }
        }
        std::mem::swap(out, scratch);
        if out.len() < 3 {
            out.clear();
            return;
        }
    }
}

/// Integrals of ζ and ζ·(affine) over a convex polygon on which both are
/// single polynomials, by the midpoint rule on a triangle fan (exact for
/// quadratics).
fn polygon_moments<const M: usize>(
    poly: &[[f64; 2]],
    affine: &impl Fn([f64; 2]) -> SVector<f64, M>,
) -> (f64, SVector<f64, M>) {
    let mut weight = 0.0;
    let mut value = SVector::<f64, M>::zeros();
    if poly.len() < 3 {
        return (weight, value);
    }
    let p0 = poly[0];
    for i in 1..poly.len() - 1 {
        let p1 = poly[i];
        let p2 = poly[i + 1];
        let area = 0.5
            * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0])).abs();
        if area == 0.0 {
            continue;
        }
        let mids = [
            [(p0[0] + p1[0]) / 2.0, (p0[1] + p1[1]) / 2.0],
            [(p1[0] + p2[0]) / 2.0, (p1[1] + p2[1]) / 2.0],
            [(p2[0] + p0[0]) / 2.0, (p2[1] + p0[1]) / 2.0],
        ];
        for m in mids {
            let zm = zeta(m);
            weight += area / 3.0 * zm;
            value += affine(m) * (area / 3.0 * zm);
        }
    }
    (weight, value)
}

/// Value and gradient of the smoothed field v*(x) = (ζ ∗ v̄)(x).
pub fn smoothed_value_and_gradient<const M: usize>(
    f: &mut impl FnMut(Site) -> SVector<f64, M>,
    x: [f64; 2],
) -> (SVector<f64, M>, SMatrix<f64, M, 2>) {
    let hex = hexagon_triangles();
    let mut value = SVector::<f64, M>::zeros();
    let mut grad = SMatrix::<f64, M, 2>::zeros();
    let mut clipped = Vec::with_capacity(8);
    let mut scratch = Vec::with_capacity(8);
    let fx = x[0].floor() as i32;
    let fy = x[1].floor() as i32;
    for cx in (fx - 2)..=(fx + 1) {
        for cy in (fy - 2)..=(fy + 1) {
            for upper in [false, true] {
                let cell = [cx, cy];
                let verts = triangle_sites(cell, upper);
                let g = triangle_gradient(f, cell, upper);
                let anchor = verts[0];
                let v_anchor = f(anchor);
                let a0 = [anchor[0] as f64, anchor[1] as f64];
                // v̄ on this triangle, evaluated at x − y.
                let piece = |y: [f64; 2]| {
                    let d = SVector::<f64, 2>::new(x[0] - y[0] - a0[0], x[1] - y[1] - a0[1]);
                    v_anchor + g * d
                };
                // y must lie in x − triangle.
                let subject: Vec<[f64; 2]> = verts
                    .iter()
                    .map(|s| [x[0] - s[0] as f64, x[1] - s[1] as f64])
                    .collect();
                for tri in &hex {
                    clip_to_triangle(&subject, tri, &mut clipped, &mut scratch);
                    if clipped.is_empty() {
                        continue;
                    }
                    let (w, v) = polygon_moments(&clipped, &piece);
                    value += v;
                    grad += g * w;
                }
            }
        }
    }
    (value, grad)
}

/// ‖∇(ζ ∗ v̄)‖² integrated over the cells with corners in
/// [lo, hi] × [lo, hi]. Exact: the smoothed gradient is a cubic on each
/// canonical triangle and the rule integrates degree 6.
pub fn smoothed_seminorm_sq<const M: usize>(
    f: &mut impl FnMut(Site) -> SVector<f64, M>,
    lo: i32,
    hi: i32,
) -> f64 {
    let rule = quad::reference_triangle(6);
    let mut total = 0.0;
    for cx in lo..=hi {
        for cy in lo..=hi {
            for upper in [false, true] {
                let verts = triangle_sites([cx, cy], upper);
                let pts: Vec<[f64; 2]> = verts
                    .iter()
                    .map(|s| [s[0] as f64, s[1] as f64])
                    .collect();
                let mapped = quad::map_to_triangle(&rule, pts[0], pts[1], pts[2]);
                for (xq, wq) in mapped {
                    let (_, g) = smoothed_value_and_gradient(f, xq);
                    total += wq * g.norm_squared();
                }
            }
        }
    }
    total
}
