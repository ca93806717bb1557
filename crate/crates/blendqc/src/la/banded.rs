//! Banded direct factorizations: symmetric LDL^T with inertia counts and
//! LU with partial pivoting for nonsymmetric systems.

use crate::error::{BlendError, Result};

use super::csr::Csr;

/// Symmetric matrix stored as its lower band (diagonal included). Entry
/// (i, j) with i - bw <= j <= i lives at data[i * (bw + 1) + (j - i + bw)].
#[derive(Debug, Clone)]
pub struct SymBanded {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SymBanded {
    pub fn zeros(n: usize, bw: usize) -> SymBanded {
        SymBanded {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    /// Builds from the lower triangle of a structurally symmetric CSR
    /// matrix; the bandwidth is taken from the sparsity pattern.
    pub fn from_csr_lower(a: &Csr) -> Result<SymBanded> {
        if a.n_rows() != a.n_cols() {
            return Err(BlendError::Linear(format!(
                "banded storage requires a square matrix, got {} x {}",
                a.n_rows(),
                a.n_cols()
            )));
        }
        let mut b = SymBanded::zeros(a.n_rows(), a.bandwidth());
        for i in 0..a.n_rows() {
            let (cols, vals) = a.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                if (c as usize) <= i {
                    b.set(i, c as usize, v);
                }
            }
        }
        Ok(b)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (j + self.bw - i)
    }

    /// Lower-triangle entry (i >= j); zero outside the band.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        if j > i || i - j > self.bw {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] = v;
    }

    /// A - sigma I.
    pub fn shifted(&self, sigma: f64) -> SymBanded {
        let mut out = self.clone();
        for i in 0..self.n {
            let s = out.slot(i, i);
            out.data[s] -= sigma;
        }
        out
    }

    /// LDL^T factorization without pivoting. Fails on a vanishing or
    /// non-finite pivot; callers doing inertia bisection should perturb the
    /// shift and retry.
    pub fn ldlt(mut self) -> Result<SymBandedLdlt> {
        let n = self.n;
        let bw = self.bw;
        let scale = (0..n)
            .map(|i| self.at(i, i).abs())
            .fold(0.0f64, f64::max)
            .max(1e-300);
        let tiny = 1e-14 * scale;
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..i {
                let mut s = self.at(i, j);
                for k in lo..j {
                    s -= self.at(i, k) * self.at(j, k) * self.at(k, k);
                }
                let d = self.at(j, j);
                let slot = self.slot(i, j);
                self.data[slot] = s / d;
            }
            let mut d = self.at(i, i);
            for k in lo..i {
                let l = self.at(i, k);
                d -= l * l * self.at(k, k);
            }
            if !d.is_finite() || d.abs() < tiny {
                return Err(BlendError::Linear(format!(
                    "factorization pivot {d:.3e} at row {i} is too close to zero"
                )));
            }
            let slot = self.slot(i, i);
            self.data[slot] = d;
        }
        Ok(SymBandedLdlt {
            n,
            bw,
            data: self.data,
        })
    }
}

/// Factor L D L^T packed in band storage: strict lower entries hold L, the
/// diagonal holds D.
pub struct SymBandedLdlt {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SymBandedLdlt {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * (self.bw + 1) + (j + self.bw - i)]
    }

    /// (negative, positive) pivot counts; by Sylvester's law these are the
    /// eigenvalue counts on each side of zero.
    pub fn inertia(&self) -> (usize, usize) {
        let mut neg = 0;
        let mut pos = 0;
        for i in 0..self.n {
            if self.at(i, i) < 0.0 {
                neg += 1;
            } else {
                pos += 1;
            }
        }
        (neg, pos)
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        let bw = self.bw;
        // L y = x
        for i in 0..self.n {
            let lo = i.saturating_sub(bw);
            let mut s = x[i];
            for k in lo..i {
                s -= self.at(i, k) * x[k];
            }
            x[i] = s;
        }
        // D z = y
        for i in 0..self.n {
            x[i] /= self.at(i, i);
        }
        // L^T out = z
        for i in (0..self.n).rev() {
            let hi = (i + bw + 1).min(self.n);
            let mut s = x[i];
            for k in i + 1..hi {
                s -= self.at(k, i) * x[k];
            }
            x[i] = s;
        }
    }
}

/// General banded matrix in LU-ready storage. Lower bandwidth kl, upper
/// bandwidth ku; partial pivoting fills the upper band out to ku + kl.
/// Column j holds rows j - (ku + kl) ..= j + kl.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
    pivots: Vec<u32>,
}

impl BandedLu {
    fn zeros(n: usize, kl: usize, ku: usize) -> BandedLu {
        BandedLu {
            n,
            kl,
            ku,
            data: vec![0.0; n * (2 * kl + ku + 1)],
            pivots: Vec::new(),
        }
    }

    #[inline]
    fn width(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i + self.ku + self.kl >= j && j + self.kl >= i);
        j * self.width() + (i + self.ku + self.kl - j)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[self.slot(i, j)]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] = v;
    }

    /// Loads a square CSR matrix into band storage, measuring kl and ku from
    /// the pattern, then factors PA = LU with partial pivoting.
    pub fn factor_csr(a: &Csr) -> Result<BandedLu> {
        if a.n_rows() != a.n_cols() {
            return Err(BlendError::Linear(format!(
                "LU requires a square matrix, got {} x {}",
                a.n_rows(),
                a.n_cols()
            )));
        }
        let n = a.n_rows();
        let mut kl = 0usize;
        let mut ku = 0usize;
        for i in 0..n {
            let (cols, _) = a.row(i);
            for &c in cols {
                let j = c as usize;
                if i > j {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        let mut b = BandedLu::zeros(n, kl, ku);
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                b.set(i, c as usize, v);
            }
        }
        b.factor()?;
        Ok(b)
    }

    fn factor(&mut self) -> Result<()> {
        let n = self.n;
        let kl = self.kl;
        let ku = self.ku;
        let scale = self.data.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1e-300);
        let tiny = 1e-14 * scale;
        self.pivots = vec![0u32; n];
        for k in 0..n {
            let i_hi = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.at(k, k).abs();
            for i in k + 1..=i_hi {
                let v = self.at(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            self.pivots[k] = p as u32;
            if best < tiny || !best.is_finite() {
                return Err(BlendError::Linear(format!(
                    "matrix is singular to working precision at column {k}"
                )));
            }
            if p != k {
                let j_hi = (k + ku + kl).min(n - 1);
                for j in k..=j_hi {
                    let a = self.at(k, j);
                    let b = self.at(p, j);
                    self.set(k, j, b);
                    self.set(p, j, a);
                }
            }
            let pivot = self.at(k, k);
            for i in k + 1..=i_hi {
                let m = self.at(i, k) / pivot;
                self.set(i, k, m);
                if m != 0.0 {
                    let j_hi = (k + ku + kl).min(n - 1);
                    for j in k + 1..=j_hi {
                        let v = self.at(i, j) - m * self.at(k, j);
                        self.set(i, j, v);
                    }
                }
            }
        }
        Ok(())
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        let n = self.n;
        let kl = self.kl;
        let ku = self.ku;
        for k in 0..n {
            let p = self.pivots[k] as usize;
            if p != k {
                x.swap(p, k);
            }
            let i_hi = (k + kl).min(n - 1);
            for i in k + 1..=i_hi {
                x[i] -= self.at(i, k) * x[k];
            }
        }
        for i in (0..n).rev() {
            let j_hi = (i + ku + kl).min(n - 1);
            let mut s = x[i];
            for j in i + 1..=j_hi {
                s -= self.at(i, j) * x[j];
            }
            x[i] = s / self.at(i, i);
        }
    }
}
