//! Finite interaction ranges on the square lattice.

use crate::error::{BlendError, Result};

/// A lattice site (or lattice direction) in Z².
pub type Site = [i32; 2];

pub const E1: Site = [1, 0];
pub const E2: Site = [0, 1];

#[inline]
pub fn site_add(a: Site, b: Site) -> Site {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn site_sub(a: Site, b: Site) -> Site {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn site_norm(a: Site) -> f64 {
    ((a[0] as f64).powi(2) + (a[1] as f64).powi(2)).sqrt()
}

/// Finite, point-symmetric set of interaction directions ρ ⊂ Z² \ {0}
/// containing the coordinate directions e₁, e₂.
///
/// The directions are stored sorted lexicographically by (x, y); every
/// stencil in the crate is aligned with this order. `neg` maps each
/// direction to the index of its negative, which exists by point symmetry.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionRange {
    vectors: Vec<Site>,
    neg: Vec<usize>,
    r_cut: f64,
}

impl InteractionRange {
    pub fn new(mut vectors: Vec<Site>) -> Result<Self> {
        vectors.sort_unstable();
        vectors.dedup();
        if vectors.iter().any(|&v| v == [0, 0]) {
            return Err(BlendError::Geometry(
                "interaction range must not contain the zero direction".into(),
            ));
        }
        for e in [E1, E2] {
            if !vectors.contains(&e) {
                return Err(BlendError::Geometry(
                    "interaction range must contain both coordinate directions".into(),
                ));
            }
        }
        let mut neg = Vec::with_capacity(vectors.len());
        for &v in &vectors {
            let m = [-v[0], -v[1]];
            match vectors.binary_search(&m) {
                Ok(k) => neg.push(k),
                Err(_) => {
                    return Err(BlendError::Geometry(format!(
                        "interaction range is not point symmetric: missing ({}, {})",
                        m[0], m[1]
                    )))
                }
            }
        }
        let r_cut = vectors.iter().map(|&v| site_norm(v)).fold(0.0, f64::max);
        Ok(Self { vectors, neg, r_cut })
    }

    /// Nearest neighbours only: {±e₁, ±e₂}.
    pub fn nearest() -> Self {
        Self::new(vec![[1, 0], [-1, 0], [0, 1], [0, -1]]).expect("static range")
    }

    /// Nearest and next-nearest neighbours of Z² (8 directions, r_cut = √2).
    pub fn nn_nnn() -> Self {
        Self::new(vec![
            [1, 0],
            [-1, 0],
            [0, 1],
            [0, -1],
            [1, 1],
            [-1, -1],
            [1, -1],
            [-1, 1],
        ])
        .expect("static range")
    }

    #[inline]
    pub fn vectors(&self) -> &[Site] {
        &self.vectors
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Index of −ρ for the direction at index `k`.
    #[inline]
    pub fn neg(&self, k: usize) -> usize {
        self.neg[k]
    }

    #[inline]
    pub fn r_cut(&self) -> f64 {
        self.r_cut
    }

    /// Largest Chebyshev component among the directions.
    pub fn reach(&self) -> i32 {
        self.vectors
            .iter()
            .map(|v| v[0].abs().max(v[1].abs()))
            .max()
            .unwrap_or(0)
    }

    pub fn index_of(&self, rho: Site) -> Option<usize> {
        self.vectors.binary_search(&rho).ok()
    }
}
