//! Compressed sparse row matrices assembled from triplet lists.

use crate::error::{BlendError, Result};
use crate::exec::{self, Exec};

/// Sparse matrix in CSR layout. Column indices within each row are strictly
/// increasing; duplicate triplets are summed during assembly in their
/// original order, so assembly is deterministic for a deterministic input.
#[derive(Debug, Clone)]
pub struct Csr {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

impl Csr {
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(u32, u32, f64)]) -> Result<Csr> {
        for &(r, c, _) in triplets {
            if r as usize >= n_rows || c as usize >= n_cols {
                return Err(BlendError::Linear(format!(
                    "triplet ({r}, {c}) outside a {n_rows} x {n_cols} matrix"
                )));
            }
        }
        let mut order: Vec<u32> = (0..triplets.len() as u32).collect();
        // Stable sort keeps duplicates in insertion order so their sum is
        // reproducible.
        order.sort_by_key(|&i| {
            let (r, c, _) = triplets[i as usize];
            (r, c)
        });
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx: Vec<u32> = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut prev: Option<(u32, u32)> = None;
        for &i in &order {
            let (r, c, v) = triplets[i as usize];
            if prev == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r as usize + 1] += 1;
                prev = Some((r, c));
            }
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Csr {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    /// y = A x.
    pub fn matvec(&self, exec: Exec, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(y.len(), self.n_rows);
        exec::fill_indexed(exec, y, |i| {
            let (cols, vals) = self.row(i);
            let mut s = 0.0;
            for (&c, &v) in cols.iter().zip(vals) {
                s += v * x[c as usize];
            }
            s
        });
    }

    /// Entry lookup by binary search; zero when absent.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&(j as u32)) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// Scales row i by d[i] in place.
    pub fn scale_rows(&mut self, d: &[f64]) {
        assert_eq!(d.len(), self.n_rows);
        for i in 0..self.n_rows {
            let lo = self.row_ptr[i];
            let hi = self.row_ptr[i + 1];
            for v in &mut self.values[lo..hi] {
                *v *= d[i];
            }
        }
    }

    pub fn transpose(&self) -> Csr {
        let mut row_ptr = vec![0usize; self.n_cols + 1];
        for &c in &self.col_idx {
            row_ptr[c as usize + 1] += 1;
        }
        for i in 0..self.n_cols {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut col_idx = vec![0u32; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        let mut cursor = row_ptr.clone();
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let slot = cursor[c as usize];
                col_idx[slot] = r as u32;
                values[slot] = v;
                cursor[c as usize] += 1;
            }
        }
        Csr {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// (A + A^T) / 2. Requires a square matrix.
    pub fn symmetrize(&self) -> Result<Csr> {
        if self.n_rows != self.n_cols {
            return Err(BlendError::Linear(format!(
                "cannot symmetrize a {} x {} matrix",
                self.n_rows, self.n_cols
            )));
        }
        let t = self.transpose();
        let mut trips: Vec<(u32, u32, f64)> =
            Vec::with_capacity(self.nnz() + t.nnz());
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                trips.push((r as u32, c, 0.5 * v));
            }
            let (cols, vals) = t.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                trips.push((r as u32, c, 0.5 * v));
            }
        }
        Csr::from_triplets(self.n_rows, self.n_cols, &trips)
    }

    /// Symmetric permutation B = P A P^T with B[new_i][new_j] =
    /// A[perm[new_i]][perm[new_j]]. `perm` maps new index -> old index.
    pub fn permute_symmetric(&self, perm: &[u32]) -> Result<Csr> {
        if self.n_rows != self.n_cols || perm.len() != self.n_rows {
            return Err(BlendError::Linear(
                "permutation length does not match the matrix dimension".into(),
            ));
        }
        let mut inv = vec![u32::MAX; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            if (old as usize) >= perm.len() || inv[old as usize] != u32::MAX {
                return Err(BlendError::Linear("invalid permutation".into()));
            }
            inv[old as usize] = new as u32;
        }
        let mut trips: Vec<(u32, u32, f64)> = Vec::with_capacity(self.nnz());
        for (new_r, &old_r) in perm.iter().enumerate() {
            let (cols, vals) = self.row(old_r as usize);
            for (&c, &v) in cols.iter().zip(vals) {
                trips.push((new_r as u32, inv[c as usize], v));
            }
        }
        Csr::from_triplets(self.n_rows, self.n_cols, &trips)
    }

    /// max |i - j| over stored entries.
    pub fn bandwidth(&self) -> usize {
        let mut bw = 0usize;
        for i in 0..self.n_rows {
            let (cols, _) = self.row(i);
            for &c in cols {
                bw = bw.max((c as isize - i as isize).unsigned_abs());
            }
        }
        bw
    }

    /// Maximum relative asymmetry max |a_ij - a_ji| / scale, with scale the
    /// largest absolute entry. Useful as a structural check on operators
    /// expected to be symmetric.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        let scale = self
            .values
            .iter()
            .fold(0.0f64, |m, &v| m.max(v.abs()))
            .max(1e-300);
        let mut worst = 0.0f64;
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - t.get(i, c as usize)).abs());
            }
        }
        worst / scale
    }
}
