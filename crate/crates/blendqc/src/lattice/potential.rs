//! Site potentials V(g) acting on finite-difference stencils.
//!
//! A stencil g = (g_ρ) collects the differences y(ξ+ρ) − y(ξ) over the
//! interaction range, with values in R^M (M = 1 for anti-plane models,
//! M = 2 for planar deformation). All potentials are point symmetric,
//! V((−g_{−ρ})_ρ) = V(g), so homogeneous states are force free.
//!
//! Pair-distance potentials carry a collapse guard: evaluation is refused
//! when any |g_ρ| falls below half the reference bond length |ρ|, which
//! keeps iterates inside the smoothness domain and gives line searches a
//! clean rejection signal.

use nalgebra::{SMatrix, SVector};

use crate::error::{BlendError, Result};

use super::range::{site_norm, InteractionRange, Site};

/// Fraction of the reference bond length below which a stencil counts as
/// collapsed.
pub const COLLAPSE_FRACTION: f64 = 0.5;

/// Interface for site potentials.
///
/// Slices indexed by direction are always aligned with
/// `range().vectors()`. Second derivatives are exposed two ways: as an
/// application to a direction-indexed vector (used by matrix-free Hessian
/// products) and as an explicit sparse block list (used by assembly).
pub trait SitePotential<const M: usize>: Send + Sync {
    fn range(&self) -> &InteractionRange;

    /// Period b of slip invariance: V is unchanged when any subset of the
    /// g_ρ shifts by an integer multiple of b (anti-plane glide). `None`
    /// for non-periodic potentials.
    fn slip_period(&self) -> Option<f64>;

    /// V(g).
    fn energy(&self, g: &[SVector<f64, M>]) -> Result<f64>;

    /// First partials V_{,ρ}(g) for every direction.
    fn d1(&self, g: &[SVector<f64, M>], out: &mut [SVector<f64, M>]) -> Result<()>;

    /// out_ρ = Σ_ς V_{,ρς}(g) w_ς.
    fn d2_apply(
        &self,
        g: &[SVector<f64, M>],
        w: &[SVector<f64, M>],
        out: &mut [SVector<f64, M>],
    ) -> Result<()>;

    /// Nonzero second-partial blocks (k_ρ, k_ς, V_{,ρς}).
    fn d2_pairs(&self, g: &[SVector<f64, M>]) -> Result<Vec<(u16, u16, SMatrix<f64, M, M>)>>;
}

fn collapse_error(rho: Site, len: f64, min: f64) -> BlendError {
    // Site coordinates are filled in by the caller that knows ξ.
    BlendError::StencilCollapse {
        site_x: 0,
        site_y: 0,
        rho_x: rho[0],
        rho_y: rho[1],
        len,
        min,
    }
}

/// Attach the lattice site to a collapse error raised inside a potential.
pub fn locate_collapse(err: BlendError, site: Site) -> BlendError {
    match err {
        BlendError::StencilCollapse {
            rho_x,
            rho_y,
            len,
            min,
            ..
        } => BlendError::StencilCollapse {
            site_x: site[0],
            site_y: site[1],
            rho_x,
            rho_y,
            len,
            min,
        },
        other => other,
    }
}

/// Scalar radial profile φ(r) = e^{−2a(r−r₀)} − 2e^{−a(r−r₀)} with minimum
/// value −1 at r = r₀.
#[derive(Clone, Copy, Debug)]
struct Morse {
    a: f64,
}

impl Morse {
    #[inline]
    fn phi(&self, r: f64, r0: f64) -> f64 {
        let e = (-self.a * (r - r0)).exp();
        e * e - 2.0 * e
    }

    #[inline]
    fn dphi(&self, r: f64, r0: f64) -> f64 {
        let e = (-self.a * (r - r0)).exp();
        2.0 * self.a * (e - e * e)
    }

    #[inline]
    fn ddphi(&self, r: f64, r0: f64) -> f64 {
        let e = (-self.a * (r - r0)).exp();
        2.0 * self.a * self.a * (2.0 * e * e - e)
    }
}

/// Pair potential V(g) = ½ Σ_ρ φ(|g_ρ|; |ρ|) over nearest and next-nearest
/// neighbours, with Morse profile stiffness `a`.
///
/// Each shell's reference length is the lattice distance |ρ|, so the
/// identity map is an exact equilibrium and the reference lattice is
/// stable (the diagonal shell removes the shear softness of a
/// nearest-neighbour square lattice).
#[derive(Clone, Debug)]
pub struct MorsePair {
    range: InteractionRange,
    morse: Morse,
    ref_len: Vec<f64>,
}

pub const MORSE_STIFFNESS: f64 = 4.0;

impl MorsePair {
    pub fn new() -> Self {
        Self::with_stiffness(MORSE_STIFFNESS)
    }

    pub fn with_stiffness(a: f64) -> Self {
        let range = InteractionRange::nn_nnn();
        let ref_len = range.vectors().iter().map(|&v| site_norm(v)).collect();
        Self {
            range,
            morse: Morse { a },
            ref_len,
        }
    }
}

impl Default for MorsePair {
    fn default() -> Self {
        Self::new()
    }
}

#[inline]
fn guarded_norm<const M: usize>(g: &SVector<f64, M>, r0: f64, rho: Site) -> Result<f64> {
    let r = g.norm();
    let min = COLLAPSE_FRACTION * r0;
    if r < min {
        Err(collapse_error(rho, r, min))
    } else {
        Ok(r)
    }
}

impl<const M: usize> SitePotential<M> for MorsePair {
    fn range(&self) -> &InteractionRange {
        &self.range
    }

    fn slip_period(&self) -> Option<f64> {
        None
    }

    fn energy(&self, g: &[SVector<f64, M>]) -> Result<f64> {
        let mut e = 0.0;
        for (k, gk) in g.iter().enumerate() {
            let r0 = self.ref_len[k];
            let r = guarded_norm(gk, r0, self.range.vectors()[k])?;
            e += self.morse.phi(r, r0);
        }
        Ok(0.5 * e)
    }

    fn d1(&self, g: &[SVector<f64, M>], out: &mut [SVector<f64, M>]) -> Result<()> {
        for (k, gk) in g.iter().enumerate() {
            let r0 = self.ref_len[k];
            let r = guarded_norm(gk, r0, self.range.vectors()[k])?;
            out[k] = gk * (0.5 * self.morse.dphi(r, r0) / r);
        }
        Ok(())
    }

    fn d2_apply(
        &self,
        g: &[SVector<f64, M>],
        w: &[SVector<f64, M>],
        out: &mut [SVector<f64, M>],
    ) -> Result<()> {
        for (k, gk) in g.iter().enumerate() {
            let r0 = self.ref_len[k];
            let r = guarded_norm(gk, r0, self.range.vectors()[k])?;
            let dir = gk / r;
            let radial = 0.5 * self.morse.ddphi(r, r0);
            let tang = 0.5 * self.morse.dphi(r, r0) / r;
            let along = dir.dot(&w[k]);
            out[k] = w[k] * tang + dir * ((radial - tang) * along);
        }
        Ok(())
    }

    fn d2_pairs(&self, g: &[SVector<f64, M>]) -> Result<Vec<(u16, u16, SMatrix<f64, M, M>)>> {
        let mut blocks = Vec::with_capacity(g.len());
        for (k, gk) in g.iter().enumerate() {
            let r0 = self.ref_len[k];
            let r = guarded_norm(gk, r0, self.range.vectors()[k])?;
            let dir = gk / r;
            let radial = 0.5 * self.morse.ddphi(r, r0);
            let tang = 0.5 * self.morse.dphi(r, r0) / r;
            let b = SMatrix::<f64, M, M>::identity() * tang + dir * dir.transpose() * (radial - tang);
            blocks.push((k as u16, k as u16, b));
        }
        Ok(blocks)
    }
}

/// Embedded-atom style potential
/// V(g) = ½ Σ_ρ φ(|g_ρ|; |ρ|) + G(Σ_ρ ψ(|g_ρ|)),
/// with electron-density kernel ψ(r) = e^{−br} and embedding function
/// G(s) = c₁ s + c₂ s². The embedding term couples all directions, so the
/// second partials are dense in (ρ, ς).
#[derive(Clone, Debug)]
pub struct EamToy {
    range: InteractionRange,
    morse: Morse,
    ref_len: Vec<f64>,
    b: f64,
    c1: f64,
    c2: f64,
}

pub const EAM_DENSITY_DECAY: f64 = 3.0;
pub const EAM_EMBED_LINEAR: f64 = -1.0;
pub const EAM_EMBED_QUADRATIC: f64 = 0.5;

impl EamToy {
    pub fn new() -> Self {
        let range = InteractionRange::nn_nnn();
        let ref_len = range.vectors().iter().map(|&v| site_norm(v)).collect();
        Self {
            range,
            morse: Morse { a: MORSE_STIFFNESS },
            ref_len,
            b: EAM_DENSITY_DECAY,
            c1: EAM_EMBED_LINEAR,
            c2: EAM_EMBED_QUADRATIC,
        }
    }

    #[inline]
    fn psi(&self, r: f64) -> f64 {
        (-self.b * r).exp()
    }

    #[inline]
    fn dpsi(&self, r: f64) -> f64 {
        -self.b * (-self.b * r).exp()
    }

    #[inline]
    fn ddpsi(&self, r: f64) -> f64 {
        self.b * self.b * (-self.b * r).exp()
    }

    #[inline]
    fn dg(&self, s: f64) -> f64 {
        self.c1 + 2.0 * self.c2 * s
    }

    fn norms<const M: usize>(&self, g: &[SVector<f64, M>]) -> Result<Vec<f64>> {
        g.iter()
            .enumerate()
            .map(|(k, gk)| guarded_norm(gk, self.ref_len[k], self.range.vectors()[k]))
            .collect()
    }
}

impl Default for EamToy {
    fn default() -> Self {
        Self::new()
    }
}

impl<const M: usize> SitePotential<M> for EamToy {
    fn range(&self) -> &InteractionRange {
        &self.range
    }

    fn slip_period(&self) -> Option<f64> {
        None
    }

    fn energy(&self, g: &[SVector<f64, M>]) -> Result<f64> {
        let r = self.norms(g)?;
        let mut pair = 0.0;
        let mut s = 0.0;
        for (k, &rk) in r.iter().enumerate() {
            pair += self.morse.phi(rk, self.ref_len[k]);
            s += self.psi(rk);
        }
        Ok(0.5 * pair + self.c1 * s + self.c2 * s * s)
    }

    fn d1(&self, g: &[SVector<f64, M>], out: &mut [SVector<f64, M>]) -> Result<()> {
        let r = self.norms(g)?;
        let s: f64 = r.iter().map(|&rk| self.psi(rk)).sum();
        let gp = self.dg(s);
        for (k, gk) in g.iter().enumerate() {
            let scale = (0.5 * self.morse.dphi(r[k], self.ref_len[k]) + gp * self.dpsi(r[k])) / r[k];
            out[k] = gk * scale;
        }
        Ok(())
    }

    fn d2_apply(
        &self,
        g: &[SVector<f64, M>],
        w: &[SVector<f64, M>],
        out: &mut [SVector<f64, M>],
    ) -> Result<()> {
        let r = self.norms(g)?;
        let s: f64 = r.iter().map(|&rk| self.psi(rk)).sum();
        let gp = self.dg(s);
        let gpp = 2.0 * self.c2;
        // Cross coupling: Σ_ς ψ'(r_ς) ĝ_ς · w_ς.
        let mut cross = 0.0;
        for (k, gk) in g.iter().enumerate() {
            cross += self.dpsi(r[k]) * gk.dot(&w[k]) / r[k];
        }
        for (k, gk) in g.iter().enumerate() {
            let dir = gk / r[k];
            let radial = 0.5 * self.morse.ddphi(r[k], self.ref_len[k]) + gp * self.ddpsi(r[k]);
            let tang = (0.5 * self.morse.dphi(r[k], self.ref_len[k]) + gp * self.dpsi(r[k])) / r[k];
            let along = dir.dot(&w[k]);
            out[k] = w[k] * tang
                + dir * ((radial - tang) * along + gpp * self.dpsi(r[k]) * cross);
        }
        Ok(())
    }

    fn d2_pairs(&self, g: &[SVector<f64, M>]) -> Result<Vec<(u16, u16, SMatrix<f64, M, M>)>> {
        let r = self.norms(g)?;
        let s: f64 = r.iter().map(|&rk| self.psi(rk)).sum();
        let gp = self.dg(s);
        let gpp = 2.0 * self.c2;
        let dirs: Vec<SVector<f64, M>> = g.iter().zip(&r).map(|(gk, &rk)| gk / rk).collect();
        let mut blocks = Vec::with_capacity(g.len() * g.len());
        for k in 0..g.len() {
            for l in 0..g.len() {
                let mut b = dirs[k] * dirs[l].transpose() * (gpp * self.dpsi(r[k]) * self.dpsi(r[l]));
                if k == l {
                    let radial = 0.5 * self.morse.ddphi(r[k], self.ref_len[k]) + gp * self.ddpsi(r[k]);
                    let tang = (0.5 * self.morse.dphi(r[k], self.ref_len[k]) + gp * self.dpsi(r[k])) / r[k];
                    b += SMatrix::<f64, M, M>::identity() * tang
                        + dirs[k] * dirs[k].transpose() * (radial - tang);
                }
                blocks.push((k as u16, l as u16, b));
            }
        }
        Ok(blocks)
    }
}

/// Anti-plane potential V(g) = Σ_ρ λ_ρ sin²(π g_ρ) on scalar stencils,
/// periodic in every bond coordinate with period b = 1 (slip invariance).
/// Nearest-neighbour bonds carry weight 1, diagonal bonds weight ¼.
#[derive(Clone, Debug)]
pub struct AntiplanePeriodic {
    range: InteractionRange,
    lambda: Vec<f64>,
}

pub const ANTIPLANE_DIAGONAL_WEIGHT: f64 = 0.25;
pub const BURGERS: f64 = 1.0;

impl AntiplanePeriodic {
    pub fn new() -> Self {
        let range = InteractionRange::nn_nnn();
        let lambda = range
            .vectors()
            .iter()
            .map(|&v| {
                if v[0].abs() + v[1].abs() == 2 {
                    ANTIPLANE_DIAGONAL_WEIGHT
                } else {
                    1.0
                }
            })
            .collect();
        Self { range, lambda }
    }
}

impl Default for AntiplanePeriodic {
    fn default() -> Self {
        Self::new()
    }
}

impl SitePotential<1> for AntiplanePeriodic {
    fn range(&self) -> &InteractionRange {
        &self.range
    }

    fn slip_period(&self) -> Option<f64> {
        Some(BURGERS)
    }

    fn energy(&self, g: &[SVector<f64, 1>]) -> Result<f64> {
        let mut e = 0.0;
        for (k, gk) in g.iter().enumerate() {
            let s = (std::f64::consts::PI * gk[0]).sin();
            e += self.lambda[k] * s * s;
        }
        Ok(e)
    }

    fn d1(&self, g: &[SVector<f64, 1>], out: &mut [SVector<f64, 1>]) -> Result<()> {
        for (k, gk) in g.iter().enumerate() {
            out[k][0] =
                self.lambda[k] * std::f64::consts::PI * (2.0 * std::f64::consts::PI * gk[0]).sin();
        }
        Ok(())
    }

    fn d2_apply(
        &self,
        g: &[SVector<f64, 1>],
        w: &[SVector<f64, 1>],
        out: &mut [SVector<f64, 1>],
    ) -> Result<()> {
        for (k, gk) in g.iter().enumerate() {
            let c = 2.0
                * std::f64::consts::PI
                * std::f64::consts::PI
                * self.lambda[k]
                * (2.0 * std::f64::consts::PI * gk[0]).cos();
            out[k][0] = c * w[k][0];
        }
        Ok(())
    }

    fn d2_pairs(&self, g: &[SVector<f64, 1>]) -> Result<Vec<(u16, u16, SMatrix<f64, 1, 1>)>> {
        let mut blocks = Vec::with_capacity(g.len());
        for (k, gk) in g.iter().enumerate() {
            let c = 2.0
                * std::f64::consts::PI
                * std::f64::consts::PI
                * self.lambda[k]
                * (2.0 * std::f64::consts::PI * gk[0]).cos();
            blocks.push((k as u16, k as u16, SMatrix::<f64, 1, 1>::new(c)));
        }
        Ok(blocks)
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    //! Finite-difference and symmetry oracles shared by potential tests.

    use super::*;
    use rand::Rng;

    /// Independent brute-force Morse pair energy: raw loops, no stencil
    /// machinery.
    pub fn morse_energy_oracle<const M: usize>(a: f64, g: &[SVector<f64, M>], r0: &[f64]) -> f64 {
        let mut e = 0.0;
        for k in 0..g.len() {
            let mut r2 = 0.0;
            for i in 0..M {
                r2 += g[k][i] * g[k][i];
            }
            let r = r2.sqrt();
            let ex = (-a * (r - r0[k])).exp();
            e += ex * ex - 2.0 * ex;
        }
        0.5 * e
    }

    /// Random stencil near the homogeneous state A = I (planar) or 0
    /// (anti-plane), safely away from the collapse guard.
    pub fn random_stencil<const M: usize>(
        range: &InteractionRange,
        rng: &mut impl Rng,
        spread: f64,
        planar: bool,
    ) -> Vec<SVector<f64, M>> {
        range
            .vectors()
            .iter()
            .map(|&v| {
                let mut g = SVector::<f64, M>::zeros();
                for i in 0..M {
                    g[i] = if planar && i < 2 { v[i] as f64 } else { 0.0 };
                    g[i] += rng.gen_range(-spread..spread);
                }
                g
            })
            .collect()
    }

    /// Point-symmetry image h_ρ = −g_{−ρ}.
    pub fn flipped<const M: usize>(
        range: &InteractionRange,
        g: &[SVector<f64, M>],
    ) -> Vec<SVector<f64, M>> {
        (0..g.len()).map(|k| -g[range.neg(k)]).collect()
    }

    /// Observed order of the central-difference gradient check over a pair
    /// of step sizes: errors e(t) = |(V(g+tw) − V(g−tw))/2t − ⟨V'(g), w⟩|.
    pub fn fd_gradient_order<const M: usize, P: SitePotential<M>>(
        p: &P,
        g: &[SVector<f64, M>],
        w: &[SVector<f64, M>],
        t_coarse: f64,
        t_fine: f64,
    ) -> f64 {
        let mut d1 = vec![SVector::<f64, M>::zeros(); g.len()];
        p.d1(g, &mut d1).unwrap();
        let exact: f64 = d1.iter().zip(w).map(|(a, b)| a.dot(b)).sum();
        let fd = |t: f64| -> f64 {
            let gp: Vec<_> = g.iter().zip(w).map(|(a, b)| a + b * t).collect();
            let gm: Vec<_> = g.iter().zip(w).map(|(a, b)| a - b * t).collect();
            (p.energy(&gp).unwrap() - p.energy(&gm).unwrap()) / (2.0 * t)
        };
        let e_coarse = (fd(t_coarse) - exact).abs();
        let e_fine = (fd(t_fine) - exact).abs();
        (e_coarse / e_fine).ln() / (t_coarse / t_fine).ln()
    }

    /// Same for the Hessian application against the directional derivative
    /// of d1.
    pub fn fd_hessian_order<const M: usize, P: SitePotential<M>>(
        p: &P,
        g: &[SVector<f64, M>],
        w: &[SVector<f64, M>],
        t_coarse: f64,
        t_fine: f64,
    ) -> f64 {
        let n = g.len();
        let mut exact = vec![SVector::<f64, M>::zeros(); n];
        p.d2_apply(g, w, &mut exact).unwrap();
        let fd = |t: f64| -> Vec<SVector<f64, M>> {
            let gp: Vec<_> = g.iter().zip(w).map(|(a, b)| a + b * t).collect();
            let gm: Vec<_> = g.iter().zip(w).map(|(a, b)| a - b * t).collect();
            let mut dp = vec![SVector::<f64, M>::zeros(); n];
            let mut dm = vec![SVector::<f64, M>::zeros(); n];
            p.d1(&gp, &mut dp).unwrap();
            p.d1(&gm, &mut dm).unwrap();
            (0..n).map(|k| (dp[k] - dm[k]) / (2.0 * t)).collect()
        };
        let err = |t: f64| -> f64 {
            fd(t)
                .iter()
                .zip(&exact)
                .map(|(a, b)| (a - b).norm_squared())
                .sum::<f64>()
                .sqrt()
        };
        (err(t_coarse) / err(t_fine)).ln() / (t_coarse / t_fine).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use crate::tol;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn morse_energy_matches_brute_force_oracle() {
        let p = MorsePair::new();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let r0: Vec<f64> = p.range.vectors().iter().map(|&v| site_norm(v)).collect();
        for _ in 0..50 {
            let g = random_stencil::<2>(&p.range, &mut rng, 0.2, true);
            let e = <MorsePair as SitePotential<2>>::energy(&p, &g).unwrap();
            let oracle = morse_energy_oracle(MORSE_STIFFNESS, &g, &r0);
            assert!((e - oracle).abs() <= tol::EXACT);
        }
    }

    #[test]
    fn morse_identity_stencil_is_minimum_with_energy_minus_four() {
        // At g_ρ = ρ every bond sits at its reference length: φ = −1 each,
        // V = ½·8·(−1) = −4, and the gradient vanishes.
        let p = MorsePair::new();
        let g: Vec<SVector<f64, 2>> = p
            .range
            .vectors()
            .iter()
            .map(|&v| SVector::<f64, 2>::new(v[0] as f64, v[1] as f64))
            .collect();
        let e = <MorsePair as SitePotential<2>>::energy(&p, &g).unwrap();
        assert!((e - (-4.0)).abs() <= tol::EXACT);
        let mut d1 = vec![SVector::<f64, 2>::zeros(); g.len()];
        <MorsePair as SitePotential<2>>::d1(&p, &g, &mut d1).unwrap();
        for v in &d1 {
            assert!(v.norm() <= tol::EXACT);
        }
    }

    #[test]
    fn collapse_guard_refuses_short_bonds() {
        let p = MorsePair::new();
        let mut g: Vec<SVector<f64, 2>> = p
            .range
            .vectors()
            .iter()
            .map(|&v| SVector::<f64, 2>::new(v[0] as f64, v[1] as f64))
            .collect();
        g[0] *= 0.49;
        let e = <MorsePair as SitePotential<2>>::energy(&p, &g);
        assert!(matches!(e, Err(BlendError::StencilCollapse { .. })));
    }

    #[test]
    fn fd_orders_are_second_order_for_all_potentials() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let morse = MorsePair::new();
        let eam = EamToy::new();
        let anti = AntiplanePeriodic::new();
        for _ in 0..10 {
            let g2 = random_stencil::<2>(SitePotential::<2>::range(&morse), &mut rng, 0.15, true);
            let w2 = random_stencil::<2>(SitePotential::<2>::range(&morse), &mut rng, 1.0, false);
            assert!(fd_gradient_order(&morse, &g2, &w2, 3e-3, 3e-4) >= tol::FD_MIN_ORDER);
            assert!(fd_hessian_order(&morse, &g2, &w2, 3e-3, 3e-4) >= tol::FD_MIN_ORDER);
            assert!(fd_gradient_order(&eam, &g2, &w2, 3e-3, 3e-4) >= tol::FD_MIN_ORDER);
            assert!(fd_hessian_order(&eam, &g2, &w2, 3e-3, 3e-4) >= tol::FD_MIN_ORDER);

            let g1 = random_stencil::<1>(SitePotential::<1>::range(&anti), &mut rng, 0.3, false);
            let w1 = random_stencil::<1>(SitePotential::<1>::range(&anti), &mut rng, 1.0, false);
            assert!(fd_gradient_order(&anti, &g1, &w1, 3e-3, 3e-4) >= tol::FD_MIN_ORDER);
            assert!(fd_hessian_order(&anti, &g1, &w1, 3e-3, 3e-4) >= tol::FD_MIN_ORDER);
        }
    }

    #[test]
    fn point_symmetry_holds_for_all_potentials() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let morse = MorsePair::new();
        let eam = EamToy::new();
        let anti = AntiplanePeriodic::new();
        for _ in 0..50 {
            let g2 = random_stencil::<2>(SitePotential::<2>::range(&morse), &mut rng, 0.2, true);
            let f2 = flipped(SitePotential::<2>::range(&morse), &g2);
            let e = <MorsePair as SitePotential<2>>::energy(&morse, &g2).unwrap();
            let ef = <MorsePair as SitePotential<2>>::energy(&morse, &f2).unwrap();
            assert!((e - ef).abs() <= tol::EXACT);
            let e = <EamToy as SitePotential<2>>::energy(&eam, &g2).unwrap();
            let ef = <EamToy as SitePotential<2>>::energy(&eam, &f2).unwrap();
            assert!((e - ef).abs() <= tol::EXACT);

            let g1 = random_stencil::<1>(SitePotential::<1>::range(&anti), &mut rng, 0.4, false);
            let f1 = flipped(SitePotential::<1>::range(&anti), &g1);
            assert!((anti.energy(&g1).unwrap() - anti.energy(&f1).unwrap()).abs() <= tol::EXACT);
        }
    }

    #[test]
    fn point_symmetry_of_first_partials() {
        // V_{,−ρ}(h) = −V_{,ρ}(g) when h is the point-symmetry image of g.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let eam = EamToy::new();
        let range = SitePotential::<2>::range(&eam).clone();
        for _ in 0..20 {
            let g = random_stencil::<2>(&range, &mut rng, 0.2, true);
            let h = flipped(&range, &g);
            let mut dg = vec![SVector::<f64, 2>::zeros(); g.len()];
            let mut dh = vec![SVector::<f64, 2>::zeros(); g.len()];
            eam.d1(&g, &mut dg).unwrap();
            eam.d1(&h, &mut dh).unwrap();
            for k in 0..g.len() {
                assert!((dh[range.neg(k)] + dg[k]).norm() <= tol::EXACT);
            }
        }
    }

    #[test]
    fn antiplane_is_slip_periodic() {
        let anti = AntiplanePeriodic::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = anti.slip_period().unwrap();
        for _ in 0..50 {
            let g = random_stencil::<1>(anti.range(), &mut rng, 0.5, false);
            // Shift an arbitrary subset of bond coordinates by integer
            // multiples of b.
            let mut shifted = g.clone();
            for gk in shifted.iter_mut() {
                let m: i32 = rand::Rng::gen_range(&mut rng, -3..=3);
                gk[0] += b * m as f64;
            }
            let e = anti.energy(&g).unwrap();
            let es = anti.energy(&shifted).unwrap();
            assert!((e - es).abs() <= tol::EXACT);
        }
    }

    #[test]
    fn d2_pairs_agree_with_d2_apply() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let eam = EamToy::new();
        let range = SitePotential::<2>::range(&eam).clone();
        for _ in 0..20 {
            let g = random_stencil::<2>(&range, &mut rng, 0.15, true);
            let w = random_stencil::<2>(&range, &mut rng, 1.0, false);
            let mut via_apply = vec![SVector::<f64, 2>::zeros(); g.len()];
            eam.d2_apply(&g, &w, &mut via_apply).unwrap();
            let mut via_blocks = vec![SVector::<f64, 2>::zeros(); g.len()];
            for (k, l, b) in eam.d2_pairs(&g).unwrap() {
                via_blocks[k as usize] += b * w[l as usize];
            }
            for k in 0..g.len() {
                assert!((via_apply[k] - via_blocks[k]).norm() <= tol::EXACT);
            }
        }
    }

    #[test]
    fn d2_blocks_are_symmetric_under_pair_swap() {
        // V_{,ρς} = V_{,ςρ}ᵀ.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let eam = EamToy::new();
        let range = SitePotential::<2>::range(&eam).clone();
        let g = random_stencil::<2>(&range, &mut rng, 0.15, true);
        let blocks = eam.d2_pairs(&g).unwrap();
        let n = range.len();
        let dense: Vec<SMatrix<f64, 2, 2>> = {
            let mut d = vec![SMatrix::<f64, 2, 2>::zeros(); n * n];
            for (k, l, b) in blocks {
                d[k as usize * n + l as usize] += b;
            }
            d
        };
        for k in 0..n {
            for l in 0..n {
                let diff = dense[k * n + l] - dense[l * n + k].transpose();
                assert!(diff.norm() <= tol::EXACT);
            }
        }
    }
}
