//! Assembled atomistic energies, forces, and Hessian actions.
//!
//! The energy of a displacement u relative to a reference state y₀ is
//!
//!   E(u) = Σ_ξ w(ξ) [V(Dy(ξ)) − V(Dy₀(ξ))] + P(Dy(0)),   y = y₀ + u,
//!
//! summed over an evaluation site set with optional per-site weights
//! (weights are how the blended energy methods reuse this machinery; the
//! plain clamped-ball problem has w ≡ 1). P is an optional impurity term
//! pinned to the origin.
//!
//! Derivatives are computed in two gather passes to stay deterministic
//! under parallelism: pass one tabulates per-site stencil quantities, pass
//! two combines table rows into per-site results. No pass ever scatters
//! concurrently.

use std::sync::Arc;

use nalgebra::{SMatrix, SVector};

use crate::error::{BlendError, Result};
use crate::exec::{self, Exec};

use super::defect::Impurity;
use super::field::SiteSet;
use super::potential::{locate_collapse, SitePotential};
use super::range::{site_add, site_sub, InteractionRange, Site};

#[inline]
fn site_point(s: Site) -> [f64; 2] {
    [s[0] as f64, s[1] as f64]
}

/// Reference (far-field) state y₀ around which displacements are measured.
///
/// Implementations must be single-valued on lattice sites; `gradient` is
/// the single-valued derivative used by continuum evaluations and may
/// disagree with finite differences of `value` across a branch cut (the
/// potential's slip periodicity absorbs the mismatch).
pub trait ReferenceMap<const M: usize>: Send + Sync {
    /// y₀ at an arbitrary point.
    fn value(&self, x: [f64; 2]) -> SVector<f64, M>;

    /// ∇y₀ at an arbitrary point away from any cut or core.
    fn gradient(&self, x: [f64; 2]) -> SMatrix<f64, M, 2>;

    /// y₀(x + ρ) − y₀(x) when it is independent of x, else `None`.
    fn exact_difference(&self, rho: Site) -> Option<SVector<f64, M>>;

    /// Linearization at infinity (the homogeneous state the far field
    /// approaches).
    fn far_field(&self) -> SMatrix<f64, M, 2>;
}

/// Homogeneous reference y₀(x) = A x.
#[derive(Clone, Debug)]
pub struct HomogeneousMap<const M: usize> {
    a: SMatrix<f64, M, 2>,
}

impl<const M: usize> HomogeneousMap<M> {
    pub fn new(a: SMatrix<f64, M, 2>) -> Self {
        Self { a }
    }

    pub fn matrix(&self) -> &SMatrix<f64, M, 2> {
        &self.a
    }
}

impl<const M: usize> ReferenceMap<M> for HomogeneousMap<M> {
    fn value(&self, x: [f64; 2]) -> SVector<f64, M> {
        self.a * SVector::<f64, 2>::new(x[0], x[1])
    }

    fn gradient(&self, _x: [f64; 2]) -> SMatrix<f64, M, 2> {
        self.a
    }

    fn exact_difference(&self, rho: Site) -> Option<SVector<f64, M>> {
        Some(self.a * SVector::<f64, 2>::new(rho[0] as f64, rho[1] as f64))
    }

    fn far_field(&self) -> SMatrix<f64, M, 2> {
        self.a
    }
}

/// A lattice model: interaction law, reference state, optional impurity.
#[derive(Clone)]
pub struct AtomisticModel<const M: usize> {
    potential: Arc<dyn SitePotential<M>>,
    reference: Arc<dyn ReferenceMap<M>>,
    defect: Option<Impurity>,
}

impl<const M: usize> AtomisticModel<M> {
    pub fn new(
        potential: Arc<dyn SitePotential<M>>,
        reference: Arc<dyn ReferenceMap<M>>,
        defect: Option<Impurity>,
    ) -> Self {
        Self {
            potential,
            reference,
            defect,
        }
    }

    pub fn potential(&self) -> &Arc<dyn SitePotential<M>> {
        &self.potential
    }

    pub fn reference(&self) -> &Arc<dyn ReferenceMap<M>> {
        &self.reference
    }

    pub fn defect(&self) -> Option<&Impurity> {
        self.defect.as_ref()
    }

    /// Clamped-ball problem: unknowns on B_r ∩ Z², zero outside, energy
    /// summed over every site whose stencil can differ from the reference.
    pub fn clamped_ball(&self, radius: f64, exec: Exec) -> Result<AtomisticOperator<M>> {
        let free = SiteSet::ball(radius);
        let eval = free.dilate(self.potential.range());
        AtomisticOperator::build(self.clone(), free, eval, None, true, exec)
    }

    /// General gather operator: energy summed over `eval` with `weights`
    /// (1 everywhere when `None`), unknowns indexed by `gather`. Values of
    /// u at sites outside `gather` are treated as zero, so `gather` must
    /// contain every site the weighted sum actually depends on unless that
    /// truncation is intended (clamped boundaries).
    pub fn gather_operator(
        &self,
        gather: SiteSet,
        eval: SiteSet,
        weights: Option<Vec<f64>>,
        include_defect: bool,
        exec: Exec,
    ) -> Result<AtomisticOperator<M>> {
        AtomisticOperator::build(self.clone(), gather, eval, weights, include_defect, exec)
    }
}

enum RefDiffs<const M: usize> {
    /// Same stencil differences at every site (homogeneous reference).
    Uniform(Vec<SVector<f64, M>>),
    /// Per evaluation site, row-major `eval.len() × range.len()`.
    PerSite(Vec<SVector<f64, M>>),
}

enum RefEnergy {
    Uniform(f64),
    PerSite(Vec<f64>),
}

/// Energy/gradient/Hessian engine bound to one (gather set, eval set,
/// weights) triple. Dense per-site vectors are indexed by the gather set's
/// site order.
pub struct AtomisticOperator<const M: usize> {
    model: AtomisticModel<M>,
    free: SiteSet,
    eval: SiteSet,
    weight: Option<Vec<f64>>,
    defect: Option<Impurity>,
    ref_diff: RefDiffs<M>,
    ref_energy: RefEnergy,
    exec: Exec,
}

impl<const M: usize> AtomisticOperator<M> {
    fn build(
        model: AtomisticModel<M>,
        free: SiteSet,
        eval: SiteSet,
        weight: Option<Vec<f64>>,
        include_defect: bool,
        exec: Exec,
    ) -> Result<Self> {
        if let Some(w) = &weight {
            if w.len() != eval.len() {
                return Err(BlendError::Config(format!(
                    "weight vector length {} does not match evaluation set size {}",
                    w.len(),
                    eval.len()
                )));
            }
        }
        let range = model.potential.range().clone();
        let l = range.len();
        let uniform: Option<Vec<SVector<f64, M>>> = range
            .vectors()
            .iter()
            .map(|&rho| model.reference.exact_difference(rho))
            .collect();
        let ref_diff = match uniform {
            Some(d) => RefDiffs::Uniform(d),
            None => {
                let mut d = vec![SVector::<f64, M>::zeros(); eval.len() * l];
                let sites = eval.sites();
                let reference = &model.reference;
                exec::try_fill_blocks_with_scratch(exec, &mut d, l, || (), |_, i, row| {
                    let xi = sites[i];
                    let v0 = reference.value(site_point(xi));
                    for (k, &rho) in range.vectors().iter().enumerate() {
                        row[k] = reference.value(site_point(site_add(xi, rho))) - v0;
                    }
                    Ok(())
                })?;
                RefDiffs::PerSite(d)
            }
        };
        let ref_energy = match &ref_diff {
            RefDiffs::Uniform(d) => {
                let e = model
                    .potential
                    .energy(d)
                    .map_err(|err| locate_collapse(err, [0, 0]))?;
                RefEnergy::Uniform(e)
            }
            RefDiffs::PerSite(d) => {
                let mut e = vec![0.0; eval.len()];
                let sites = eval.sites();
                let potential = &model.potential;
                exec::try_fill_blocks_with_scratch(exec, &mut e, 1, || (), |_, i, out| {
                    out[0] = potential
                        .energy(&d[i * l..(i + 1) * l])
                        .map_err(|err| locate_collapse(err, sites[i]))?;
                    Ok(())
                })?;
                RefEnergy::PerSite(e)
            }
        };
        let defect = if include_defect {
            model.defect.clone()
        } else {
            None
        };
        Ok(Self {
            model,
            free,
            eval,
            weight,
            defect,
            ref_diff,
            ref_energy,
            exec,
        })
    }

    pub fn free(&self) -> &SiteSet {
        &self.free
    }

    pub fn eval(&self) -> &SiteSet {
        &self.eval
    }

    pub fn exec(&self) -> Exec {
        self.exec
    }

    pub fn model(&self) -> &AtomisticModel<M> {
        &self.model
    }

    pub fn dofs(&self) -> usize {
        self.free.len() * M
    }

    fn range(&self) -> &InteractionRange {
        self.model.potential.range()
    }

    #[inline]
    fn weight_at(&self, i: usize) -> f64 {
        self.weight.as_ref().map_or(1.0, |w| w[i])
    }

    #[inline]
    fn u_at(&self, s: Site, u: &[SVector<f64, M>]) -> SVector<f64, M> {
        match self.free.index_of(s) {
            Some(j) => u[j],
            None => SVector::zeros(),
        }
    }

    #[inline]
    fn ref_energy_at(&self, i: usize) -> f64 {
        match &self.ref_energy {
            RefEnergy::Uniform(e) => *e,
            RefEnergy::PerSite(e) => e[i],
        }
    }

    /// Current-state stencil Dy(ξ_i) = Dy₀ + Du.
    fn gather(&self, i: usize, u: &[SVector<f64, M>], g: &mut [SVector<f64, M>]) {
        let xi = self.eval.sites()[i];
        let us = self.u_at(xi, u);
        let vecs = self.range().vectors();
        match &self.ref_diff {
            RefDiffs::Uniform(d) => {
                for (k, &rho) in vecs.iter().enumerate() {
                    g[k] = d[k] + self.u_at(site_add(xi, rho), u) - us;
                }
            }
            RefDiffs::PerSite(d) => {
                let row = &d[i * vecs.len()..(i + 1) * vecs.len()];
                for (k, &rho) in vecs.iter().enumerate() {
                    g[k] = row[k] + self.u_at(site_add(xi, rho), u) - us;
                }
            }
        }
    }

    /// Direction stencil Dw(ξ_i) (no reference part).
    fn gather_direction(&self, i: usize, w: &[SVector<f64, M>], g: &mut [SVector<f64, M>]) {
        let xi = self.eval.sites()[i];
        let ws = self.u_at(xi, w);
        for (k, &rho) in self.range().vectors().iter().enumerate() {
            g[k] = self.u_at(site_add(xi, rho), w) - ws;
        }
    }

    /// Impurity stencil at the origin (the impurity's own range).
    fn origin_stencil(&self, imp: &Impurity, u: &[SVector<f64, M>]) -> Vec<SVector<f64, M>> {
        let o = imp.site();
        let us = self.u_at(o, u);
        let reference = &self.model.reference;
        let v0 = reference.value(site_point(o));
        imp.range()
            .vectors()
            .iter()
            .map(|&rho| {
                let rd = reference
                    .exact_difference(rho)
                    .unwrap_or_else(|| reference.value(site_point(site_add(o, rho))) - v0);
                rd + self.u_at(site_add(o, rho), u) - us
            })
            .collect()
    }

    /// E(u).
    pub fn energy(&self, u: &[SVector<f64, M>]) -> Result<f64> {
        assert_eq!(u.len(), self.free.len(), "u must be indexed by the gather set");
        let l = self.range().len();
        let potential = &self.model.potential;
        let mut e = exec::try_sum_with_scratch(
            self.exec,
            self.eval.len(),
            || vec![SVector::<f64, M>::zeros(); l],
            |g, i| {
                let w = self.weight_at(i);
                if w == 0.0 {
                    return Ok(0.0);
                }
                self.gather(i, u, g);
                let v = potential
                    .energy(g)
                    .map_err(|err| locate_collapse(err, self.eval.sites()[i]))?;
                Ok(w * (v - self.ref_energy_at(i)))
            },
        )?;
        if let Some(imp) = &self.defect {
            let g = self.origin_stencil(imp, u);
            e += imp.energy(&g)?;
        }
        Ok(e)
    }

    /// out[j] = ∂E/∂u(η_j) over the gather set.
    pub fn gradient(&self, u: &[SVector<f64, M>], out: &mut [SVector<f64, M>]) -> Result<()> {
        assert_eq!(u.len(), self.free.len());
        assert_eq!(out.len(), self.free.len());
        let l = self.range().len();
        let potential = &self.model.potential;
        let mut table = vec![SVector::<f64, M>::zeros(); self.eval.len() * l];
        exec::try_fill_blocks_with_scratch(
            self.exec,
            &mut table,
            l,
            || {
                (
                    vec![SVector::<f64, M>::zeros(); l],
                    vec![SVector::<f64, M>::zeros(); l],
                )
            },
            |(g, d1), i, row| {
                let w = self.weight_at(i);
                if w == 0.0 {
                    for slot in row.iter_mut() {
                        *slot = SVector::zeros();
                    }
                    return Ok(());
                }
                self.gather(i, u, g);
                potential
                    .d1(g, d1)
                    .map_err(|err| locate_collapse(err, self.eval.sites()[i]))?;
                for k in 0..l {
                    row[k] = d1[k] * w;
                }
                Ok(())
            },
        )?;
        self.combine_table(&table, out)?;
        if let Some(imp) = &self.defect {
            let g = self.origin_stencil(imp, u);
            let mut d1 = vec![SVector::<f64, M>::zeros(); g.len()];
            imp.d1(&g, &mut d1)?;
            self.scatter_origin(imp, &d1, out);
        }
        Ok(())
    }

    /// Pass two of the gather form: out[η] = Σ_ρ t[η−ρ][ρ] − Σ_ρ t[η][ρ].
    fn combine_table(
        &self,
        table: &[SVector<f64, M>],
        out: &mut [SVector<f64, M>],
    ) -> Result<()> {
        let l = self.range().len();
        let vecs = self.range().vectors();
        exec::try_fill_blocks_with_scratch(self.exec, out, 1, || (), |_, j, oj| {
            // Accumulate the incoming and outgoing sums separately, in the
            // same direction order: at a homogeneous state the two partial
            // sums are bitwise equal and the force cancels exactly.
            let eta = self.free.sites()[j];
            let mut incoming = SVector::<f64, M>::zeros();
            let mut outgoing = SVector::<f64, M>::zeros();
            if let Some(i) = self.eval.index_of(eta) {
                for k in 0..l {
                    outgoing += table[i * l + k];
                }
            }
            for (k, &rho) in vecs.iter().enumerate() {
                if let Some(i) = self.eval.index_of(site_sub(eta, rho)) {
                    incoming += table[i * l + k];
                }
            }
            oj[0] = incoming - outgoing;
            Ok(())
        })
    }

    /// Scatter an origin-stencil derivative into the gather set:
    /// +d[ρ] at site ρ, −Σ d[ρ] at the origin.
    fn scatter_origin(
        &self,
        imp: &Impurity,
        d: &[SVector<f64, M>],
        out: &mut [SVector<f64, M>],
    ) {
        let o = imp.site();
        let mut total = SVector::<f64, M>::zeros();
        for (k, &rho) in imp.range().vectors().iter().enumerate() {
            total += d[k];
            if let Some(j) = self.free.index_of(site_add(o, rho)) {
                out[j] += d[k];
            }
        }
        if let Some(j) = self.free.index_of(o) {
            out[j] -= total;
        }
    }

    /// Freeze the Hessian at u for repeated products and assembly.
    pub fn linearize(&self, u: &[SVector<f64, M>]) -> Result<AtomisticLinearization<'_, M>> {
        assert_eq!(u.len(), self.free.len());
        let l = self.range().len();
        let potential = &self.model.potential;
        let probe = (0..self.eval.len()).find(|&i| self.weight_at(i) != 0.0);
        let (pattern, blocks) = if let Some(first) = probe {
            let mut g = vec![SVector::<f64, M>::zeros(); l];
            self.gather(first, u, &mut g);
            let sample = potential
                .d2_pairs(&g)
                .map_err(|err| locate_collapse(err, self.eval.sites()[first]))?;
            let pattern: Vec<(u16, u16)> = sample.iter().map(|&(k, s, _)| (k, s)).collect();
            let p = pattern.len();
            let mut blocks = vec![SMatrix::<f64, M, M>::zeros(); self.eval.len() * p];
            exec::try_fill_blocks_with_scratch(
                self.exec,
                &mut blocks,
                p,
                || vec![SVector::<f64, M>::zeros(); l],
                |g, i, row| {
                    let w = self.weight_at(i);
                    if w == 0.0 {
                        for slot in row.iter_mut() {
                            *slot = SMatrix::zeros();
                        }
                        return Ok(());
                    }
                    self.gather(i, u, g);
                    let site_blocks = potential
                        .d2_pairs(g)
                        .map_err(|err| locate_collapse(err, self.eval.sites()[i]))?;
                    if site_blocks.len() != pattern.len()
                        || site_blocks
                            .iter()
                            .zip(&pattern)
                            .any(|(&(k, s, _), &(pk, ps))| k != pk || s != ps)
                    {
                        return Err(BlendError::Linear(
                            "second-derivative sparsity pattern varies across sites".into(),
                        ));
                    }
                    for (slot, (_, _, b)) in row.iter_mut().zip(site_blocks) {
                        *slot = b * w;
                    }
                    Ok(())
                },
            )?;
            (pattern, blocks)
        } else {
            (Vec::new(), Vec::new())
        };
        let defect_blocks = if let Some(imp) = &self.defect {
            let g = self.origin_stencil(imp, u);
            imp.d2_pairs(&g)?
        } else {
            Vec::new()
        };
        Ok(AtomisticLinearization {
            op: self,
            pattern,
            blocks,
            defect_blocks,
        })
    }

    /// Scalar triplets of the Hessian at u over gather-set dofs
    /// (dof = site index × M + component). Sequential; intended for the
    /// moderate system sizes handled by banded factorizations.
    pub fn hessian_triplets(&self, u: &[SVector<f64, M>]) -> Result<Vec<(u32, u32, f64)>> {
        assert_eq!(u.len(), self.free.len());
        let l = self.range().len();
        let vecs = self.range().vectors();
        let potential = &self.model.potential;
        let mut g = vec![SVector::<f64, M>::zeros(); l];
        let mut trips: Vec<(u32, u32, f64)> = Vec::new();
        let push_block = |trips: &mut Vec<(u32, u32, f64)>,
                              row: Option<usize>,
                              col: Option<usize>,
                              b: &SMatrix<f64, M, M>| {
            if let (Some(r), Some(c)) = (row, col) {
                for a in 0..M {
                    for bb in 0..M {
                        let v = b[(a, bb)];
                        if v != 0.0 {
                            trips.push(((r * M + a) as u32, (c * M + bb) as u32, v));
                        }
                    }
                }
            }
        };
        for i in 0..self.eval.len() {
            let w = self.weight_at(i);
            if w == 0.0 {
                continue;
            }
            self.gather(i, u, &mut g);
            let xi = self.eval.sites()[i];
            let blocks = potential
                .d2_pairs(&g)
                .map_err(|err| locate_collapse(err, xi))?;
            let self_idx = self.free.index_of(xi);
            for (k, s, b) in blocks {
                let bw = b * w;
                let row_p = self.free.index_of(site_add(xi, vecs[k as usize]));
                let col_p = self.free.index_of(site_add(xi, vecs[s as usize]));
                push_block(&mut trips, row_p, col_p, &bw);
                push_block(&mut trips, row_p, self_idx, &(-bw));
                push_block(&mut trips, self_idx, col_p, &(-bw));
                push_block(&mut trips, self_idx, self_idx, &bw);
            }
        }
        if let Some(imp) = &self.defect {
            let g = self.origin_stencil(imp, u);
            let o = imp.site();
            let self_idx = self.free.index_of(o);
            let ivecs = imp.range().vectors();
            for (k, s, b) in imp.d2_pairs(&g)? {
                let row_p = self.free.index_of(site_add(o, ivecs[k as usize]));
                let col_p = self.free.index_of(site_add(o, ivecs[s as usize]));
                push_block(&mut trips, row_p, col_p, &b);
                push_block(&mut trips, row_p, self_idx, &(-b));
                push_block(&mut trips, self_idx, col_p, &(-b));
                push_block(&mut trips, self_idx, self_idx, &b);
            }
        }
        Ok(trips)
    }
}

/// Hessian frozen at a linearization point; supports repeated products.
pub struct AtomisticLinearization<'a, const M: usize> {
    op: &'a AtomisticOperator<M>,
    pattern: Vec<(u16, u16)>,
    blocks: Vec<SMatrix<f64, M, M>>,
    defect_blocks: Vec<(u16, u16, SMatrix<f64, M, M>)>,
}

impl<'a, const M: usize> AtomisticLinearization<'a, M> {
    /// out = H w, allocating the pass-one table internally.
    pub fn apply(&self, w: &[SVector<f64, M>], out: &mut [SVector<f64, M>]) -> Result<()> {
        let mut table = Vec::new();
        self.apply_with(w, out, &mut table)
    }

    /// out = H w, reusing `table` as the pass-one buffer (sized
    /// automatically). Use this in iterative-solver hot loops.
    pub fn apply_with(
        &self,
        w: &[SVector<f64, M>],
        out: &mut [SVector<f64, M>],
        table: &mut Vec<SVector<f64, M>>,
    ) -> Result<()> {
        let op = self.op;
        assert_eq!(w.len(), op.free.len());
        assert_eq!(out.len(), op.free.len());
        let l = op.range().len();
        let p = self.pattern.len();
        table.resize(op.eval.len() * l, SVector::zeros());
        exec::try_fill_blocks_with_scratch(
            op.exec,
            table,
            l,
            || vec![SVector::<f64, M>::zeros(); l],
            |dw, i, row| {
                for slot in row.iter_mut() {
                    *slot = SVector::zeros();
                }
                if p == 0 || op.weight_at(i) == 0.0 {
                    return Ok(());
                }
                op.gather_direction(i, w, dw);
                let site_blocks = &self.blocks[i * p..(i + 1) * p];
                for (pos, &(k, s)) in self.pattern.iter().enumerate() {
                    row[k as usize] += site_blocks[pos] * dw[s as usize];
                }
                Ok(())
            },
        )?;
        op.combine_table(table, out)?;
        if let Some(imp) = &op.defect {
            if !self.defect_blocks.is_empty() {
                let o = imp.site();
                let ivecs = imp.range().vectors();
                let ws = op.u_at(o, w);
                let dw: Vec<SVector<f64, M>> = ivecs
                    .iter()
                    .map(|&rho| op.u_at(site_add(o, rho), w) - ws)
                    .collect();
                let mut d = vec![SVector::<f64, M>::zeros(); ivecs.len()];
                for &(k, s, ref b) in &self.defect_blocks {
                    d[k as usize] += b * dw[s as usize];
                }
                op.scatter_origin(imp, &d, out);
            }
        }
        Ok(())
    }
}
