//! Error norms comparing coarse coupled solutions against reference
//! lattice displacements.
//!
//! Measurement convention: both fields are sampled at lattice sites and
//! re-interpolated piecewise-linearly on the canonical lattice
//! triangulation before differencing. For a P1 coarse function whose
//! elements contain whole lattice cells this agrees with its own gradient
//! except in elements cut by coarse edges; the discrepancy there is an
//! interpolation perturbation dominated by the measured error itself.
//! Sampling makes any shared far-field part (reference maps, predictors)
//! cancel exactly and avoids mesh-intersection quadrature.

use nalgebra::SVector;

use crate::geometry::canonical::triangle_sites;
use crate::lattice::Site;

/// ‖∇(coarse − reference)‖_{L²} over the canonical triangles whose
/// centroid lies inside the ball of radius `r_cmp`, after sampling both
/// fields at lattice sites. The far-field tail beyond `r_cmp` is omitted
/// by convention. Identical samples give exactly zero.
pub fn h1_error<const M: usize>(
    mut coarse: impl FnMut(Site) -> SVector<f64, M>,
    mut reference: impl FnMut(Site) -> SVector<f64, M>,
    r_cmp: f64,
) -> f64 {
    assert!(
        r_cmp.is_finite() && r_cmp > 0.0,
        "comparison radius must be positive, got {r_cmp}"
    );
    let b = r_cmp.ceil() as i32 + 1;
    let width = (2 * b + 2) as usize;
    let at = |s: Site| -> usize { (s[1] + b) as usize * width + (s[0] + b) as usize };

    // Sample each site once; the difference field is what gets
    // differentiated, so shared parts cancel before any arithmetic mixes
    // triangle contributions.
    let mut diff = vec![SVector::<f64, M>::zeros(); width * width];
    for y in -b..=(b + 1) {
        for x in -b..=(b + 1) {
            diff[at([x, y])] = coarse([x, y]) - reference([x, y]);
        }
    }

    let r2 = r_cmp * r_cmp;
    let mut total = 0.0;
    for cy in -b..b {
        for cx in -b..b {
            for upper in [false, true] {
                let v = triangle_sites([cx, cy], upper);
                let gx = (v[0][0] + v[1][0] + v[2][0]) as f64 / 3.0;
                let gy = (v[0][1] + v[1][1] + v[2][1]) as f64 / 3.0;
                if gx * gx + gy * gy > r2 {
                    continue;
                }
                // P1 gradient on a canonical half-cell triangle with legs
                // along the axes: finite differences of the vertex values.
                let d1 = diff[at(v[1])] - diff[at(v[0])];
                let d2 = diff[at(v[2])] - diff[at(v[0])];
                let e1 = [
                    (v[1][0] - v[0][0]) as f64,
                    (v[1][1] - v[0][1]) as f64,
                ];
                let e2 = [
                    (v[2][0] - v[0][0]) as f64,
                    (v[2][1] - v[0][1]) as f64,
                ];
                // Solve gradient · [e1 e2] = [d1 d2] for the M×2 gradient.
                let det = e1[0] * e2[1] - e1[1] * e2[0];
                let mut norm_sq = 0.0;
                for i in 0..M {
                    let ga = (d1[i] * e2[1] - d2[i] * e1[1]) / det;
                    let gb = (d2[i] * e1[0] - d1[i] * e2[0]) / det;
                    norm_sq += ga * ga + gb * gb;
                }
                total += 0.5 * norm_sq;
            }
        }
    }
    total.sqrt()
}

/// Absolute difference of two converged energies.
pub fn energy_error(coarse_energy: f64, reference_energy: f64) -> f64 {
    (coarse_energy - reference_energy).abs()
}
