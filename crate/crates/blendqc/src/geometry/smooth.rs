//! C² piecewise bi-quintic interpolation of lattice functions.
//!
//! On every unit cell the interpolant is the tensor quintic Hermite
//! polynomial whose corner data (value, first and second derivatives in
//! each variable, and their mixed products) come from centered differences
//! of the surrounding 4×4 site patch. The result interpolates the site
//! values, reproduces tensor quadratics, and is globally C². It turns a
//! discrete equilibrium into a smooth field whose pointwise derivatives
//! can be probed at any radius, which is what the decay diagnostics need.

use nalgebra::{SMatrix, SVector};

use crate::lattice::range::Site;

/// Measured bound for ‖∇ũ‖²_{L²(cell)} divided by the squared bond
/// differences of the surrounding 4×4 patch, maximized over patch data
/// orthogonal to constants. Frozen from the generalized eigenproblem in
/// the tests below.
pub const SMOOTH_STABILITY_BOUND: f64 = 0.44170355815121165;

/// 1D quintic Hermite basis on [0,1], ordered
/// [H00, H01, H02, H10, H11, H12]: value, slope and curvature pins at the
/// left end, then at the right end.
fn basis(t: f64) -> [f64; 6] {
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    [
        1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5,
        t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5,
        0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5),
        10.0 * t3 - 15.0 * t4 + 6.0 * t5,
        -4.0 * t3 + 7.0 * t4 - 3.0 * t5,
        0.5 * (t3 - 2.0 * t4 + t5),
    ]
}

fn basis_d1(t: f64) -> [f64; 6] {
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    [
        -30.0 * t2 + 60.0 * t3 - 30.0 * t4,
        1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4,
        0.5 * (2.0 * t - 9.0 * t2 + 12.0 * t3 - 5.0 * t4),
        30.0 * t2 - 60.0 * t3 + 30.0 * t4,
        -12.0 * t2 + 28.0 * t3 - 15.0 * t4,
        0.5 * (3.0 * t2 - 8.0 * t3 + 5.0 * t4),
    ]
}

fn basis_d2(t: f64) -> [f64; 6] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        -60.0 * t + 180.0 * t2 - 120.0 * t3,
        -36.0 * t + 96.0 * t2 - 60.0 * t3,
        0.5 * (2.0 - 18.0 * t + 36.0 * t2 - 20.0 * t3),
        60.0 * t - 180.0 * t2 + 120.0 * t3,
        -24.0 * t + 84.0 * t2 - 60.0 * t3,
        0.5 * (6.0 * t - 24.0 * t2 + 20.0 * t3),
    ]
}

/// Centered-difference stencil weights at offsets −1, 0, 1 producing the
/// value, first and second derivative at the center.
const STENCIL: [[f64; 3]; 3] = [
    [0.0, 1.0, 0.0],
    [-0.5, 0.0, 0.5],
    [1.0, -2.0, 1.0],
];

/// Value, gradient, and second derivatives of the interpolant.
#[derive(Clone, Debug)]
pub struct SmoothEval<const M: usize> {
    pub value: SVector<f64, M>,
    pub gradient: SMatrix<f64, M, 2>,
    /// hessian[i].column(j) holds ∂_i ∂_j of each component.
    pub hessian: [SMatrix<f64, M, 2>; 2],
}

impl<const M: usize> SmoothEval<M> {
    /// Frobenius norm of the full second-derivative tensor.
    pub fn hessian_norm(&self) -> f64 {
        (self.hessian[0].norm_squared() + self.hessian[1].norm_squared()).sqrt()
    }
}

/// Evaluate the bi-quintic interpolant of site values at x.
pub fn evaluate<const M: usize>(
    f: &mut impl FnMut(Site) -> SVector<f64, M>,
    x: [f64; 2],
) -> SmoothEval<M> {
    let fx = x[0].floor();
    let fy = x[1].floor();
    let (cx, cy) = (fx as i32, fy as i32);
    let (s, t) = (x[0] - fx, x[1] - fy);

    let mut patch = [[SVector::<f64, M>::zeros(); 4]; 4];
    for (i, row) in patch.iter_mut().enumerate() {
        for (j, p) in row.iter_mut().enumerate() {
            *p = f([cx + i as i32 - 1, cy + j as i32 - 1]);
        }
    }

    let bs = [basis(s), basis_d1(s), basis_d2(s)];
    let bt = [basis(t), basis_d1(t), basis_d2(t)];

    let mut value = SVector::<f64, M>::zeros();
    let mut grad = SMatrix::<f64, M, 2>::zeros();
    let mut h00 = SVector::<f64, M>::zeros();
    let mut h01 = SVector::<f64, M>::zeros();
    let mut h11 = SVector::<f64, M>::zeros();

    for g1 in 0..2usize {
        for g2 in 0..2usize {
            for a in 0..3usize {
                for b in 0..3usize {
                    // Corner derivative data by the tensor stencil.
                    let mut d = SVector::<f64, M>::zeros();
                    for (p, wa) in STENCIL[a].iter().enumerate() {
                        if *wa == 0.0 {
                            continue;
                        }
                        for (q, wb) in STENCIL[b].iter().enumerate() {
                            if *wb == 0.0 {
                                continue;
                            }
                            d += patch[g1 + p][g2 + q] * (wa * wb);
                        }
                    }
                    let (ia, ib) = (3 * g1 + a, 3 * g2 + b);
                    value += d * (bs[0][ia] * bt[0][ib]);
                    grad.set_column(0, &(grad.column(0) + d * (bs[1][ia] * bt[0][ib])));
                    grad.set_column(1, &(grad.column(1) + d * (bs[0][ia] * bt[1][ib])));
                    h00 += d * (bs[2][ia] * bt[0][ib]);
                    h01 += d * (bs[1][ia] * bt[1][ib]);
                    h11 += d * (bs[0][ia] * bt[2][ib]);
                }
            }
        }
    }

    let mut hx = SMatrix::<f64, M, 2>::zeros();
    hx.set_column(0, &h00);
    hx.set_column(1, &h01);
    let mut hy = SMatrix::<f64, M, 2>::zeros();
    hy.set_column(0, &h01);
    hy.set_column(1, &h11);
    SmoothEval {
        value,
        gradient: grad,
        hessian: [hx, hy],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::quad;
    use crate::lattice::field::LatticeField;
    use crate::tol;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn interpolates_site_values_exactly() {
        let mut field = LatticeField::<1>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for i in -3..=3 {
            for j in -3..=3 {
                field.set([i, j], SVector::<f64, 1>::new(rng.gen_range(-1.0..1.0)));
            }
        }
        let mut f = |s: Site| field.get(s);
        for i in -2..=2 {
            for j in -2..=2 {
                let e = evaluate(&mut f, [i as f64, j as f64]);
                assert_eq!(e.value[0], field.get([i, j])[0]);
            }
        }
    }

    #[test]
    fn reproduces_tensor_quadratics() {
        // u(x, y) = (1 + 2x + 3x²)(2 − y + y²/2)
        let px = |x: f64| 1.0 + 2.0 * x + 3.0 * x * x;
        let dpx = |x: f64| 2.0 + 6.0 * x;
        let py = |y: f64| 2.0 - y + 0.5 * y * y;
        let dpy = |y: f64| -1.0 + y;
        let mut f = |s: Site| SVector::<f64, 1>::new(px(s[0] as f64) * py(s[1] as f64));
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..60 {
            let x = [rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)];
            let e = evaluate(&mut f, x);
            assert!((e.value[0] - px(x[0]) * py(x[1])).abs() <= 1e-9);
            assert!((e.gradient[(0, 0)] - dpx(x[0]) * py(x[1])).abs() <= 1e-9);
            assert!((e.gradient[(0, 1)] - px(x[0]) * dpy(x[1])).abs() <= 1e-9);
            assert!((e.hessian[0][(0, 0)] - 6.0 * py(x[1])).abs() <= 1e-8);
            assert!((e.hessian[0][(0, 1)] - dpx(x[0]) * dpy(x[1])).abs() <= 1e-8);
            assert!((e.hessian[1][(0, 1)] - px(x[0])).abs() <= 1e-8);
        }
    }

    #[test]
    fn globally_c2_across_cell_edges() {
        let mut field = LatticeField::<1>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for i in -5..=5 {
            for j in -5..=5 {
                field.set([i, j], SVector::<f64, 1>::new(rng.gen_range(-1.0..1.0)));
            }
        }
        let mut f = |s: Site| field.get(s);
        let eps = 1e-7;
        for _ in 0..40 {
            // A random point on a random vertical or horizontal cell edge.
            let along = rng.gen_range(-2.0..2.0);
            let k = rng.gen_range(-2..=2) as f64;
            let (xl, xr) = if rng.gen_bool(0.5) {
                ([k - eps, along], [k + eps, along])
            } else {
                ([along, k - eps], [along, k + eps])
            };
            let a = evaluate(&mut f, xl);
            let b = evaluate(&mut f, xr);
            assert!((a.value - b.value).norm() <= 1e-5);
            assert!((a.gradient - b.gradient).norm() <= 1e-5);
            assert!((a.hessian[0] - b.hessian[0]).norm() <= 1e-4);
            assert!((a.hessian[1] - b.hessian[1]).norm() <= 1e-4);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut field = LatticeField::<2>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for i in -5..=5 {
            for j in -5..=5 {
                field.set(
                    [i, j],
                    SVector::<f64, 2>::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                );
            }
        }
        let mut f = |s: Site| field.get(s);
        for _ in 0..20 {
            // Stay inside one cell so the polynomial piece is fixed.
            let base = [rng.gen_range(-2..2), rng.gen_range(-2..2)];
            let x = [
                base[0] as f64 + rng.gen_range(0.2..0.8),
                base[1] as f64 + rng.gen_range(0.2..0.8),
            ];
            let e = evaluate(&mut f, x);
            let h = 1e-6;
            for d in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[d] += h;
                xm[d] -= h;
                let vp = evaluate(&mut f, xp);
                let vm = evaluate(&mut f, xm);
                let fd = (vp.value - vm.value) / (2.0 * h);
                assert!((e.gradient.column(d) - fd).norm() <= 1e-7);
                let fg = (vp.gradient - vm.gradient) / (2.0 * h);
                assert!((e.hessian[d] - fg).norm() <= 1e-6);
            }
        }
    }

    #[test]
    fn cell_energy_is_bounded_by_patch_differences() {
        // Generalized eigenproblem over the 16-dimensional patch space:
        // A = ∫ over the center cell of |∇ũ|², B = sum of squared bond
        // differences inside the patch. Both kill constants; on the
        // orthogonal complement the largest ratio is the frozen constant.
        let gl = quad::gauss_legendre_01(6);
        let mut a = DMatrix::<f64>::zeros(16, 16);
        let mut b = DMatrix::<f64>::zeros(16, 16);

        // Gradient of the interpolant at a quadrature point, as a linear
        // functional of the 16 patch values.
        let grad_rows = |x: [f64; 2]| {
            let mut rows = [[0.0f64; 16]; 2];
            for k in 0..16 {
                let mut f = |s: Site| {
                    let (i, j) = (s[0] + 1, s[1] + 1);
                    let on = i >= 0 && i < 4 && j >= 0 && j < 4 && (i * 4 + j) as usize == k;
                    SVector::<f64, 1>::new(if on { 1.0 } else { 0.0 })
                };
                let e = evaluate(&mut f, x);
                rows[0][k] = e.gradient[(0, 0)];
                rows[1][k] = e.gradient[(0, 1)];
            }
            rows
        };

        for &(qx, wx) in &gl {
            for &(qy, wy) in &gl {
                let rows = grad_rows([qx, qy]);
                for r in rows {
                    for p in 0..16 {
                        for q in 0..16 {
                            a[(p, q)] += wx * wy * r[p] * r[q];
                        }
                    }
                }
            }
        }

        // Bonds inside the 4×4 patch (indices i*4+j).
        for i in 0..4i32 {
            for j in 0..4i32 {
                for (di, dj) in [(1, 0), (0, 1)] {
                    let (ni, nj) = (i + di, j + dj);
                    if ni >= 4 || nj >= 4 {
                        continue;
                    }
                    let (p, q) = ((i * 4 + j) as usize, (ni * 4 + nj) as usize);
                    b[(p, p)] += 1.0;
                    b[(q, q)] += 1.0;
                    b[(p, q)] -= 1.0;
                    b[(q, p)] -= 1.0;
                }
            }
        }

        // Helmert basis of the complement of constants.
        let mut q = DMatrix::<f64>::zeros(16, 15);
        for k in 1..16usize {
            let norm = (k as f64 * (k as f64 + 1.0)).sqrt();
            for r in 0..k {
                q[(r, k - 1)] = 1.0 / norm;
            }
            q[(k, k - 1)] = -(k as f64) / norm;
        }
        let a_r = q.transpose() * &a * &q;
        let b_r = q.transpose() * &b * &q;
        let chol = b_r.cholesky().expect("patch difference form is positive definite");
        let l_inv = chol
            .l()
            .try_inverse()
            .expect("triangular factor invertible");
        let sym = &l_inv * a_r * l_inv.transpose();
        let sym = (&sym + sym.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();
        let lambda_max = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
        assert!(
            (lambda_max - SMOOTH_STABILITY_BOUND).abs() <= 1e-8 * SMOOTH_STABILITY_BOUND,
            "measured stability constant {lambda_max}"
        );

        // Sanity: a linear field attains ratio well below the bound.
        let linear = DVector::from_fn(16, |k, _| (k / 4) as f64);
        let ra = (linear.transpose() * &a * &linear)[(0, 0)];
        let rb = (linear.transpose() * &b * &linear)[(0, 0)];
        assert!(ra / rb <= lambda_max + tol::EXACT);
    }
}
