//! Stability constant of a homogeneous lattice state.
//!
//! For the lattice Hessian H at the homogeneous state A and the
//! nearest-neighbour Dirichlet form m(v) = Σ_ξ (|D₁v|² + |D₂v|²), the
//! stability constant is
//!
//!   γ(A) = min ⟨Hv, v⟩ / m(v)
//!
//! over nonconstant periodic fields. Both forms are diagonalized by
//! Fourier modes, so the minimum is taken over the wave grid of an N×N
//! torus: γ = min_{k ≠ 0} λ_min(Ĥ(k)) / m̂(k) with
//!
//!   Ĥ(k) = Σ_{ρς} conj(a_ρ) a_ς V_{,ρς}(A·R),  a_ρ = e^{i k·ρ} − 1,
//!   m̂(k) = 4 sin²(k₁/2) + 4 sin²(k₂/2).
//!
//! γ > 0 means the state is linearly stable; the magnitude is the
//! coercivity constant of the Hessian relative to the discrete H¹ norm.

use nalgebra::{SMatrix, SVector};

use crate::error::{BlendError, Result};
use crate::lattice::potential::SitePotential;

/// Default torus grid resolution. The symbol is smooth in k, so a modest
/// grid resolves the minimizing wave vector; doubling N changes γ well
/// below the tolerances used anywhere in this crate.
pub const DEFAULT_TORUS_N: usize = 16;

/// Second-derivative blocks of the potential at the homogeneous state A,
/// indexed by direction pairs.
fn homogeneous_blocks<const M: usize>(
    potential: &dyn SitePotential<M>,
    a: &SMatrix<f64, M, 2>,
) -> Result<Vec<(u16, u16, SMatrix<f64, M, M>)>> {
    let g: Vec<SVector<f64, M>> = potential
        .range()
        .vectors()
        .iter()
        .map(|&rho| a * SVector::<f64, 2>::new(rho[0] as f64, rho[1] as f64))
        .collect();
    potential.d2_pairs(&g)
}

/// λ_min of the Hermitian symbol Ĥ(k), assembled as real and imaginary
/// parts. Supports the component counts used by the shipped models.
fn symbol_min_eig<const M: usize>(
    blocks: &[(u16, u16, SMatrix<f64, M, M>)],
    dirs: &[[i32; 2]],
    k: [f64; 2],
) -> Result<f64> {
    let mut re = SMatrix::<f64, M, M>::zeros();
    let mut im = SMatrix::<f64, M, M>::zeros();
    for &(p, q, ref b) in blocks {
        let rho = dirs[p as usize];
        let sig = dirs[q as usize];
        let tr = k[0] * rho[0] as f64 + k[1] * rho[1] as f64;
        let ts = k[0] * sig[0] as f64 + k[1] * sig[1] as f64;
        let (cr, sr) = (tr.cos() - 1.0, tr.sin());
        let (cs, ss) = (ts.cos() - 1.0, ts.sin());
        // conj(a_ρ) a_ς = (cr − i sr)(cs + i ss)
        re += b * (cr * cs + sr * ss);
        im += b * (cr * ss - sr * cs);
    }
    match M {
        1 => Ok(re[(0, 0)]),
        2 => {
            // Hermitian 2×2: diagonal is real, off-diagonal pair conjugate.
            let t = re[(0, 0)] + re[(1, 1)];
            let r01 = 0.5 * (re[(0, 1)] + re[(1, 0)]);
            let i01 = 0.5 * (im[(0, 1)] - im[(1, 0)]);
            let det = re[(0, 0)] * re[(1, 1)] - (r01 * r01 + i01 * i01);
            let disc = (t * t - 4.0 * det).max(0.0).sqrt();
            Ok(0.5 * (t - disc))
        }
        _ => Err(BlendError::Linear(format!(
            "stability symbol supports 1 or 2 components, got {M}"
        ))),
    }
}

/// γ(A) over the N×N torus wave grid.
pub fn stability_constant<const M: usize>(
    potential: &dyn SitePotential<M>,
    a: &SMatrix<f64, M, 2>,
    n: usize,
) -> Result<f64> {
    if n < 2 {
        return Err(BlendError::Config("torus grid must have n >= 2".into()));
    }
    let blocks = homogeneous_blocks(potential, a)?;
    let dirs: Vec<[i32; 2]> = potential.range().vectors().to_vec();
    let tau = 2.0 * std::f64::consts::PI / n as f64;
    let mut gamma = f64::INFINITY;
    for j in 0..n {
        for i in 0..n {
            if i == 0 && j == 0 {
                continue;
            }
            let k = [tau * i as f64, tau * j as f64];
            let lam = symbol_min_eig(&blocks, &dirs, k)?;
            let m = 4.0 * (k[0] / 2.0).sin().powi(2) + 4.0 * (k[1] / 2.0).sin().powi(2);
            gamma = gamma.min(lam / m);
        }
    }
    Ok(gamma)
}
