//! Localized defect energies.
//!
//! An impurity pins extra energy to the bonds emanating from the origin.
//! The contribution is translation invariant in the deformation (it only
//! sees differences) and has finite support, so far-field decay of
//! equilibria is unaffected.

use nalgebra::{SMatrix, SVector};

use crate::error::Result;

use super::range::{InteractionRange, Site};

/// Impurity energy P(y) = κ Σ_ρ φ_imp(|D_ρ y(0)|), a foreign atom sitting
/// at the origin whose interaction with its neighbours differs from the
/// host: a Gaussian well of depth κ centred at 90% of the host bond
/// length, width 0.5.
#[derive(Clone, Debug)]
pub struct Impurity {
    strength: f64,
    range: InteractionRange,
    ref_len: Vec<f64>,
}

pub const IMPURITY_BOND_CONTRACTION: f64 = 0.9;
pub const IMPURITY_WELL_WIDTH: f64 = 0.5;
pub const IMPURITY_DEFAULT_STRENGTH: f64 = 0.3;

impl Impurity {
    pub fn new(strength: f64) -> Self {
        let range = InteractionRange::nn_nnn();
        let ref_len = range
            .vectors()
            .iter()
            .map(|&v| super::range::site_norm(v))
            .collect();
        Self {
            strength,
            range,
            ref_len,
        }
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    /// Interaction directions of the impurity site (all stencil legs from
    /// the origin).
    pub fn range(&self) -> &InteractionRange {
        &self.range
    }

    /// The single site whose outgoing bonds carry defect energy.
    pub fn site(&self) -> Site {
        [0, 0]
    }

    #[inline]
    fn well(&self, r: f64, r0: f64) -> (f64, f64, f64) {
        let q = (r - IMPURITY_BOND_CONTRACTION * r0) / IMPURITY_WELL_WIDTH;
        let e = -(-q * q).exp();
        let de = -2.0 * q / IMPURITY_WELL_WIDTH * e;
        let dde = (4.0 * q * q - 2.0) / (IMPURITY_WELL_WIDTH * IMPURITY_WELL_WIDTH) * e;
        (e, de, dde)
    }

    /// P as a function of the origin stencil g_ρ = D_ρ y(0).
    pub fn energy<const M: usize>(&self, g: &[SVector<f64, M>]) -> Result<f64> {
        let mut e = 0.0;
        for (k, gk) in g.iter().enumerate() {
            let r = gk.norm();
            e += self.well(r, self.ref_len[k]).0;
        }
        Ok(self.strength * e)
    }

    /// First partials ∂P/∂g_ρ.
    pub fn d1<const M: usize>(
        &self,
        g: &[SVector<f64, M>],
        out: &mut [SVector<f64, M>],
    ) -> Result<()> {
        for (k, gk) in g.iter().enumerate() {
            let r = gk.norm();
            let (_, de, _) = self.well(r, self.ref_len[k]);
            out[k] = gk * (self.strength * de / r);
        }
        Ok(())
    }

    /// out_ρ = Σ_ς ∂²P/∂g_ρ∂g_ς w_ς (diagonal in ς: bonds are independent).
    pub fn d2_apply<const M: usize>(
        &self,
        g: &[SVector<f64, M>],
        w: &[SVector<f64, M>],
        out: &mut [SVector<f64, M>],
    ) -> Result<()> {
        for (k, gk) in g.iter().enumerate() {
            let r = gk.norm();
            let (_, de, dde) = self.well(r, self.ref_len[k]);
            let dir = gk / r;
            let tang = self.strength * de / r;
            let radial = self.strength * dde;
            let along = dir.dot(&w[k]);
            out[k] = w[k] * tang + dir * ((radial - tang) * along);
        }
        Ok(())
    }

    /// Nonzero second-partial blocks, aligned with `range().vectors()`.
    pub fn d2_pairs<const M: usize>(
        &self,
        g: &[SVector<f64, M>],
    ) -> Result<Vec<(u16, u16, SMatrix<f64, M, M>)>> {
        let mut blocks = Vec::with_capacity(g.len());
        for (k, gk) in g.iter().enumerate() {
            let r = gk.norm();
            let (_, de, dde) = self.well(r, self.ref_len[k]);
            let dir = gk / r;
            let tang = self.strength * de / r;
            let radial = self.strength * dde;
            let b = SMatrix::<f64, M, M>::identity() * tang + dir * dir.transpose() * (radial - tang);
            blocks.push((k as u16, k as u16, b));
        }
        Ok(blocks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::potential::test_support::random_stencil;
    use crate::tol;
    use nalgebra::SVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fd_order(imp: &Impurity, g: &[SVector<f64, 2>], w: &[SVector<f64, 2>]) -> f64 {
        let mut d1 = vec![SVector::<f64, 2>::zeros(); g.len()];
        imp.d1(g, &mut d1).unwrap();
        let exact: f64 = d1.iter().zip(w).map(|(a, b)| a.dot(b)).sum();
        let fd = |t: f64| {
            let gp: Vec<_> = g.iter().zip(w).map(|(a, b)| a + b * t).collect();
            let gm: Vec<_> = g.iter().zip(w).map(|(a, b)| a - b * t).collect();
            (imp.energy(&gp).unwrap() - imp.energy(&gm).unwrap()) / (2.0 * t)
        };
        let e1 = (fd(3e-3) - exact).abs();
        let e2 = (fd(3e-4) - exact).abs();
        (e1 / e2).ln() / 10f64.ln()
    }

    #[test]
    fn impurity_energy_by_hand_at_reference_stencil() {
        // At g_ρ = ρ: q = (|ρ| − 0.9|ρ|)/0.5 = 0.2|ρ|, four bonds with
        // |ρ| = 1 and four with |ρ| = √2.
        let imp = Impurity::new(0.3);
        let g: Vec<SVector<f64, 2>> = imp
            .range()
            .vectors()
            .iter()
            .map(|&v| SVector::<f64, 2>::new(v[0] as f64, v[1] as f64))
            .collect();
        let q1: f64 = 0.2;
        let q2: f64 = 0.2 * 2f64.sqrt();
        let expected = 0.3 * (4.0 * -(-q1 * q1).exp() + 4.0 * -(-q2 * q2).exp());
        assert!((imp.energy(&g).unwrap() - expected).abs() <= tol::EXACT);
    }

    #[test]
    fn impurity_fd_consistency() {
        let imp = Impurity::new(0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..10 {
            let g = random_stencil::<2>(imp.range(), &mut rng, 0.2, true);
            let w = random_stencil::<2>(imp.range(), &mut rng, 1.0, false);
            assert!(fd_order(&imp, &g, &w) >= tol::FD_MIN_ORDER);
        }
    }

    #[test]
    fn impurity_is_translation_invariant_in_values() {
        // Shifting every value of the stencil's parent field by a constant
        // leaves the stencil unchanged; P only sees differences. Model the
        // check directly on stencils built from shifted fields.
        let imp = Impurity::new(0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let g = random_stencil::<2>(imp.range(), &mut rng, 0.2, true);
        // A constant shift of y leaves all D_ρ y unchanged by definition,
        // so equality of energies is structural; assert evaluation is
        // pure (same input, same output) and finite.
        let e1 = imp.energy(&g).unwrap();
        let e2 = imp.energy(&g).unwrap();
        assert_eq!(e1, e2);
        assert!(e1.is_finite());
        assert!(e1 < 0.0);
    }

    #[test]
    fn d2_pairs_match_d2_apply() {
        let imp = Impurity::new(0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let g = random_stencil::<2>(imp.range(), &mut rng, 0.2, true);
        let w = random_stencil::<2>(imp.range(), &mut rng, 1.0, false);
        let mut via_apply = vec![SVector::<f64, 2>::zeros(); g.len()];
        imp.d2_apply(&g, &w, &mut via_apply).unwrap();
        let mut via_blocks = vec![SVector::<f64, 2>::zeros(); g.len()];
        for (k, l, b) in imp.d2_pairs(&g).unwrap() {
            via_blocks[k as usize] += b * w[l as usize];
        }
        for k in 0..g.len() {
            assert!((via_apply[k] - via_blocks[k]).norm() <= tol::EXACT);
        }
    }
}
