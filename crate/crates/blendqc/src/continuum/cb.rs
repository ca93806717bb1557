//! Cauchy–Born strain energy density.
//!
//! W(F) = V(F · R): the site potential evaluated on the homogeneous
//! stencil generated by a deformation gradient F ∈ R^{M×2}. First and
//! second derivatives contract the potential's partials with the
//! interaction directions.

use std::sync::Arc;

use nalgebra::{SMatrix, SVector};

use crate::error::Result;
use crate::lattice::potential::SitePotential;

/// Cauchy–Born density for one site potential.
#[derive(Clone)]
pub struct CbDensity<const M: usize> {
    potential: Arc<dyn SitePotential<M>>,
}

impl<const M: usize> CbDensity<M> {
    pub fn new(potential: Arc<dyn SitePotential<M>>) -> Self {
        Self { potential }
    }

    pub fn potential(&self) -> &Arc<dyn SitePotential<M>> {
        &self.potential
    }

    fn stencil(&self, f: &SMatrix<f64, M, 2>) -> Vec<SVector<f64, M>> {
        self.potential
            .range()
            .vectors()
            .iter()
            .map(|&rho| f * SVector::<f64, 2>::new(rho[0] as f64, rho[1] as f64))
            .collect()
    }

    /// W(F).
    pub fn energy(&self, f: &SMatrix<f64, M, 2>) -> Result<f64> {
        self.potential.energy(&self.stencil(f))
    }

    /// (W(F), ∂W(F)) with ∂W = Σ_ρ V_{,ρ}(F·R) ⊗ ρ.
    pub fn energy_and_stress(&self, f: &SMatrix<f64, M, 2>) -> Result<(f64, SMatrix<f64, M, 2>)> {
        let g = self.stencil(f);
        let w = self.potential.energy(&g)?;
        let mut d1 = vec![SVector::<f64, M>::zeros(); g.len()];
        self.potential.d1(&g, &mut d1)?;
        let mut stress = SMatrix::<f64, M, 2>::zeros();
        for (k, &rho) in self.potential.range().vectors().iter().enumerate() {
            for i in 0..M {
                for a in 0..2 {
                    stress[(i, a)] += d1[k][i] * rho[a] as f64;
                }
            }
        }
        Ok((w, stress))
    }

    /// ∂²W(F) as 2×2 blocks of M×M matrices.
    pub fn tangent(&self, f: &SMatrix<f64, M, 2>) -> Result<CbTangent<M>> {
        let g = self.stencil(f);
        let blocks = self.potential.d2_pairs(&g)?;
        let vecs = self.potential.range().vectors();
        let mut c = [[SMatrix::<f64, M, M>::zeros(); 2]; 2];
        for (k, s, b) in blocks {
            let rho = vecs[k as usize];
            let sig = vecs[s as usize];
            for a in 0..2 {
                for bb in 0..2 {
                    c[a][bb] += b * (rho[a] as f64 * sig[bb] as f64);
                }
            }
        }
        Ok(CbTangent { c })
    }
}

/// Second derivative of W: C[a][b][(i,j)] = ∂²W/∂F_{ia}∂F_{jb}.
#[derive(Clone, Debug)]
pub struct CbTangent<const M: usize> {
    c: [[SMatrix<f64, M, M>; 2]; 2],
}

impl<const M: usize> CbTangent<M> {
    pub fn block(&self, a: usize, b: usize) -> &SMatrix<f64, M, M> {
        &self.c[a][b]
    }

    /// (C : G)_{ia} = Σ_{jb} C[a][b][(i,j)] G_{jb}.
    pub fn apply(&self, g: &SMatrix<f64, M, 2>) -> SMatrix<f64, M, 2> {
        let mut out = SMatrix::<f64, M, 2>::zeros();
        for a in 0..2 {
            let mut col = SVector::<f64, M>::zeros();
            for b in 0..2 {
                col += self.c[a][b] * g.column(b);
            }
            out.set_column(a, &col);
        }
        out
    }

    /// G1 : C : G2.
    pub fn contract(&self, g1: &SMatrix<f64, M, 2>, g2: &SMatrix<f64, M, 2>) -> f64 {
        let cg2 = self.apply(g2);
        let mut s = 0.0;
        for i in 0..M {
            for a in 0..2 {
                s += g1[(i, a)] * cg2[(i, a)];
            }
        }
        s
    }
}

impl CbTangent<1> {
    /// Anti-plane tangent as a plain 2×2 matrix c_{ab} = C[a][b].
    pub fn antiplane_matrix(&self) -> SMatrix<f64, 2, 2> {
        SMatrix::<f64, 2, 2>::new(
            self.c[0][0][(0, 0)],
            self.c[0][1][(0, 0)],
            self.c[1][0][(0, 0)],
            self.c[1][1][(0, 0)],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::potential::{AntiplanePeriodic, EamToy, MorsePair};
    use crate::tol;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_f2(rng: &mut impl Rng, spread: f64) -> SMatrix<f64, 2, 2> {
        SMatrix::<f64, 2, 2>::identity()
            + SMatrix::<f64, 2, 2>::from_fn(|_, _| rng.gen_range(-spread..spread))
    }

    #[test]
    fn morse_density_matches_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let cb = CbDensity::<2>::new(Arc::new(MorsePair::new()));
        for _ in 0..20 {
            let f = random_f2(&mut rng, 0.1);
            let dirs: [[f64; 2]; 8] = [
                [1.0, 0.0],
                [-1.0, 0.0],
                [0.0, 1.0],
                [0.0, -1.0],
                [1.0, 1.0],
                [-1.0, -1.0],
                [1.0, -1.0],
                [-1.0, 1.0],
            ];
            let mut oracle = 0.0;
            for d in dirs {
                let r0 = (d[0] * d[0] + d[1] * d[1]).sqrt();
                let v = f * SVector::<f64, 2>::new(d[0], d[1]);
                let e = (-4.0 * (v.norm() - r0)).exp();
                oracle += 0.5 * (e * e - 2.0 * e);
            }
            assert!((cb.energy(&f).unwrap() - oracle).abs() <= tol::EXACT);
        }
    }

    #[test]
    fn reference_lattice_is_stress_free() {
        let cb = CbDensity::<2>::new(Arc::new(MorsePair::new()));
        let (w, stress) = cb
            .energy_and_stress(&SMatrix::<f64, 2, 2>::identity())
            .unwrap();
        assert!((w - (-4.0)).abs() <= tol::EXACT);
        assert_eq!(stress.norm(), 0.0);
    }

    #[test]
    fn antiplane_tangent_at_zero_is_isotropic() {
        // Σ_ρ 2π²λ_ρ ρ ⊗ ρ = 6π² I for weights 1 (axes) and ¼ (diagonals).
        let cb = CbDensity::<1>::new(Arc::new(AntiplanePeriodic::new()));
        let c = cb.tangent(&SMatrix::<f64, 1, 2>::zeros()).unwrap();
        let m = c.antiplane_matrix();
        let expected = 6.0 * std::f64::consts::PI.powi(2);
        assert!((m[(0, 0)] - expected).abs() <= tol::EXACT_ACCUM);
        assert!((m[(1, 1)] - expected).abs() <= tol::EXACT_ACCUM);
        assert!(m[(0, 1)].abs() <= tol::EXACT);
        assert!(m[(1, 0)].abs() <= tol::EXACT);
    }

    #[test]
    fn stress_matches_finite_differences_of_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        for which in 0..2 {
            let cb: CbDensity<2> = if which == 0 {
                CbDensity::new(Arc::new(MorsePair::new()))
            } else {
                CbDensity::new(Arc::new(EamToy::new()))
            };
            let f = random_f2(&mut rng, 0.08);
            let dir = SMatrix::<f64, 2, 2>::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let (_, stress) = cb.energy_and_stress(&f).unwrap();
            let exact: f64 = stress.component_mul(&dir).sum();
            let fd = |t: f64| {
                (cb.energy(&(f + dir * t)).unwrap() - cb.energy(&(f - dir * t)).unwrap())
                    / (2.0 * t)
            };
            let e1 = (fd(3e-3) - exact).abs();
            let e2 = (fd(3e-4) - exact).abs();
            let order = (e1 / e2).ln() / 10f64.ln();
            assert!(order >= tol::FD_MIN_ORDER, "observed order {order}");
        }
    }

    #[test]
    fn tangent_matches_finite_differences_of_stress() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let cb = CbDensity::<2>::new(Arc::new(EamToy::new()));
        let f = random_f2(&mut rng, 0.08);
        let dir = SMatrix::<f64, 2, 2>::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let c = cb.tangent(&f).unwrap();
        let exact = c.apply(&dir);
        let fd = |t: f64| -> SMatrix<f64, 2, 2> {
            let (_, sp) = cb.energy_and_stress(&(f + dir * t)).unwrap();
            let (_, sm) = cb.energy_and_stress(&(f - dir * t)).unwrap();
            (sp - sm) / (2.0 * t)
        };
        let e1 = (fd(3e-3) - exact).norm();
        let e2 = (fd(3e-4) - exact).norm();
        let order = (e1 / e2).ln() / 10f64.ln();
        assert!(order >= tol::FD_MIN_ORDER, "observed order {order}");
    }

    #[test]
    fn density_is_even_under_point_reflection() {
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let cb = CbDensity::<2>::new(Arc::new(EamToy::new()));
        for _ in 0..10 {
            let f = random_f2(&mut rng, 0.1);
            let wp = cb.energy(&f).unwrap();
            let wm = cb.energy(&(-f)).unwrap();
            assert!((wp - wm).abs() <= tol::EXACT);
        }
    }

    #[test]
    fn tangent_contract_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(79);
        let cb = CbDensity::<2>::new(Arc::new(EamToy::new()));
        let f = random_f2(&mut rng, 0.05);
        let c = cb.tangent(&f).unwrap();
        for _ in 0..10 {
            let g1 = SMatrix::<f64, 2, 2>::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let g2 = SMatrix::<f64, 2, 2>::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            assert!((c.contract(&g1, &g2) - c.contract(&g2, &g1)).abs() <= tol::EXACT_ACCUM);
        }
    }
}
