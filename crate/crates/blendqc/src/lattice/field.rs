//! Lattice displacement fields and site index sets.

use std::collections::HashMap;

use nalgebra::SVector;

use super::range::{site_add, InteractionRange, Site};

/// Compactly supported displacement field u : Z² → R^M.
///
/// Stored as a hash map keyed by site; sites not present carry the value
/// zero, which matches the far-field decay of every field handled here.
/// Iteration for reductions always goes through [`LatticeField::support`],
/// which returns the keys in sorted order, never through the raw map, so
/// results do not depend on hashing.
#[derive(Clone, Debug, Default)]
pub struct LatticeField<const M: usize> {
    map: HashMap<Site, SVector<f64, M>>,
}

impl<const M: usize> LatticeField<M> {
    pub fn new() -> Self {
        Self { map: HashMap::new() }
    }

    #[inline]
    pub fn get(&self, s: Site) -> SVector<f64, M> {
        self.map.get(&s).copied().unwrap_or_else(SVector::zeros)
    }

    pub fn set(&mut self, s: Site, v: SVector<f64, M>) {
        self.map.insert(s, v);
    }

    pub fn add(&mut self, s: Site, v: SVector<f64, M>) {
        *self.map.entry(s).or_insert_with(SVector::zeros) += v;
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Support sites in sorted order (y-major).
    pub fn support(&self) -> Vec<Site> {
        let mut s: Vec<Site> = self.map.keys().copied().collect();
        s.sort_unstable_by_key(|&[x, y]| (y, x));
        s
    }

    /// Largest Euclidean site radius in the support (0 when empty).
    pub fn support_radius(&self) -> f64 {
        self.map
            .keys()
            .map(|&[x, y]| ((x as f64).powi(2) + (y as f64).powi(2)).sqrt())
            .fold(0.0, f64::max)
    }
}

/// A finite set of lattice sites with O(1) membership lookup.
///
/// Sites are kept sorted (y-major, then x); an occupancy grid over the
/// bounding box maps a site to its index. The index order is the canonical
/// ordering used for dense vectors of per-site values.
#[derive(Clone, Debug)]
pub struct SiteSet {
    sites: Vec<Site>,
    x0: i32,
    y0: i32,
    width: usize,
    height: usize,
    grid: Vec<u32>,
}

const ABSENT: u32 = u32::MAX;

impl SiteSet {
    pub fn from_sites(mut sites: Vec<Site>) -> Self {
        sites.sort_unstable_by_key(|&[x, y]| (y, x));
        sites.dedup();
        if sites.is_empty() {
            return Self {
                sites,
                x0: 0,
                y0: 0,
                width: 0,
                height: 0,
                grid: Vec::new(),
            };
        }
        let x0 = sites.iter().map(|s| s[0]).min().unwrap();
        let x1 = sites.iter().map(|s| s[0]).max().unwrap();
        let y0 = sites.iter().map(|s| s[1]).min().unwrap();
        let y1 = sites.iter().map(|s| s[1]).max().unwrap();
        let width = (x1 - x0 + 1) as usize;
        let height = (y1 - y0 + 1) as usize;
        let mut grid = vec![ABSENT; width * height];
        for (i, &[x, y]) in sites.iter().enumerate() {
            grid[(y - y0) as usize * width + (x - x0) as usize] = i as u32;
        }
        Self {
            sites,
            x0,
            y0,
            width,
            height,
            grid,
        }
    }

    /// All sites with |ξ| ≤ r (Euclidean).
    pub fn ball(r: f64) -> Self {
        let n = r.floor() as i32;
        let r2 = r * r;
        let mut sites = Vec::new();
        for y in -n..=n {
            for x in -n..=n {
                if (x as f64) * (x as f64) + (y as f64) * (y as f64) <= r2 {
                    sites.push([x, y]);
                }
            }
        }
        Self::from_sites(sites)
    }

    /// This set enlarged by one interaction stencil (Minkowski sum with
    /// R ∪ {0}).
    pub fn dilate(&self, range: &InteractionRange) -> Self {
        let mut sites = self.sites.clone();
        for &s in &self.sites {
            for &rho in range.vectors() {
                sites.push(site_add(s, rho));
            }
        }
        Self::from_sites(sites)
    }

    #[inline]
    pub fn index_of(&self, s: Site) -> Option<usize> {
        let x = s[0] - self.x0;
        let y = s[1] - self.y0;
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return None;
        }
        let v = self.grid[y as usize * self.width + x as usize];
        if v == ABSENT {
            None
        } else {
            Some(v as usize)
        }
    }

    #[inline]
    pub fn contains(&self, s: Site) -> bool {
        self.index_of(s).is_some()
    }

    #[inline]
    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }
}
