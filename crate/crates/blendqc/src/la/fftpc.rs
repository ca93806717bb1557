//! Circulant preconditioner for lattice operators on clamped balls.
//!
//! The far field of a defect Hessian is the translation-invariant operator
//! of the homogeneous lattice. Embedding the computational ball into a
//! periodic grid and inverting that operator mode by mode gives a
//! preconditioner whose application costs two FFT sweeps, independent of
//! the conditioning of the original system.

use std::sync::Arc;

use nalgebra::{SMatrix, SVector};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{BlendError, Result};
use crate::exec::{self, Exec};
use crate::lattice::{Site, SiteSet};

/// Translation-invariant stencil: one (offset, coupling block) pair per
/// neighbour, including the diagonal block at offset zero. Row sums are
/// expected to vanish (shifting the whole lattice costs nothing), so the
/// zero wavevector is regularized separately.
pub type Stencil<const M: usize> = Vec<(Site, SMatrix<f64, M, M>)>;

pub struct CirculantPrecond<const M: usize> {
    n: usize,
    grid_of: Vec<usize>,
    inv_symbol: Vec<SMatrix<f64, M, M>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    exec: Exec,
    grids: Vec<Vec<Complex<f64>>>,
    mixed: Vec<Vec<Complex<f64>>>,
    transpose: Vec<Complex<f64>>,
}

impl<const M: usize> CirculantPrecond<M> {
    /// Builds the preconditioner for the given sites. The periodic grid is
    /// sized from the site bounding box with a small safety margin.
    pub fn new(stencil: &Stencil<M>, sites: &SiteSet, exec: Exec) -> Result<Self> {
        let mut extent = 0i32;
        for s in sites.sites() {
            extent = extent.max(s[0].abs()).max(s[1].abs());
        }
        for (xi, _) in stencil {
            extent = extent.max(xi[0].abs()).max(xi[1].abs());
        }
        // Round up to a multiple of eight for friendly FFT factorizations.
        let n = (2 * extent as usize + 4).div_ceil(8) * 8;
        let grid_of: Vec<usize> = sites
            .sites()
            .iter()
            .map(|s| {
                let x = (s[0].rem_euclid(n as i32)) as usize;
                let y = (s[1].rem_euclid(n as i32)) as usize;
                y * n + x
            })
            .collect();

        let tau = std::f64::consts::TAU;
        let symbol_at = |k1: usize, k2: usize| -> SMatrix<f64, M, M> {
            let mut s = SMatrix::<f64, M, M>::zeros();
            for (xi, block) in stencil {
                let phase =
                    tau * (k1 as f64 * xi[0] as f64 + k2 as f64 * xi[1] as f64) / n as f64;
                s += block * phase.cos();
            }
            s
        };
        let fallback = symbol_at(1, 0);
        let mut inv_symbol = vec![SMatrix::<f64, M, M>::zeros(); n * n];
        for k2 in 0..n {
            for k1 in 0..n {
                let s = if k1 == 0 && k2 == 0 {
                    fallback
                } else {
                    symbol_at(k1, k2)
                };
                inv_symbol[k2 * n + k1] = s.try_inverse().ok_or_else(|| {
                    BlendError::Linear(format!(
                        "stencil symbol is singular at wavevector ({k1}, {k2}) of {n}"
                    ))
                })?;
            }
        }

        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let zero = Complex::new(0.0, 0.0);
        Ok(CirculantPrecond {
            n,
            grid_of,
            inv_symbol,
            fwd,
            inv,
            exec,
            grids: vec![vec![zero; n * n]; M],
            mixed: vec![vec![zero; n * n]; M],
            transpose: vec![zero; n * n],
        })
    }

    pub fn grid_side(&self) -> usize {
        self.n
    }

    /// z = P r where P inverts the periodic homogeneous operator on the
    /// embedding grid and restricts back to the ball sites.
    pub fn apply(&mut self, r: &[SVector<f64, M>], z: &mut [SVector<f64, M>]) -> Result<()> {
        assert_eq!(r.len(), self.grid_of.len());
        assert_eq!(z.len(), self.grid_of.len());
        let n = self.n;
        let exec = self.exec;
        for grid in self.grids.iter_mut() {
            grid.fill(Complex::new(0.0, 0.0));
        }
        for (i, &g) in self.grid_of.iter().enumerate() {
            for c in 0..M {
                self.grids[c][g] = Complex::new(r[i][c], 0.0);
            }
        }
        for grid in self.grids.iter_mut() {
            fft_2d(n, exec, &self.fwd, grid, &mut self.transpose)?;
        }
        // Mix components through the inverse symbol at every wavevector.
        // The symbol is real, so real and imaginary parts transform alike.
        let inv_symbol = &self.inv_symbol;
        let grids = &self.grids;
        for (c, row) in self.mixed.iter_mut().enumerate() {
            exec::fill_indexed(exec, row, |g| {
                let mut acc = Complex::new(0.0, 0.0);
                for d in 0..M {
                    acc += grids[d][g] * inv_symbol[g][(c, d)];
                }
                acc
            });
        }
        for grid in self.mixed.iter_mut() {
            fft_2d(n, exec, &self.inv, grid, &mut self.transpose)?;
        }
        let scale = 1.0 / (n * n) as f64;
        for (i, &g) in self.grid_of.iter().enumerate() {
            for c in 0..M {
                z[i][c] = self.mixed[c][g].re * scale;
            }
        }
        Ok(())
    }
}

/// Row/column 2D transform; each line is independent, so parallel and
/// sequential execution agree bitwise.
fn fft_2d(
    n: usize,
    exec: Exec,
    plan: &Arc<dyn Fft<f64>>,
    grid: &mut [Complex<f64>],
    scratch: &mut [Complex<f64>],
) -> Result<()> {
    let scratch_len = plan.get_inplace_scratch_len();
    let rows = |data: &mut [Complex<f64>]| -> Result<()> {
        exec::try_fill_blocks_with_scratch(
            exec,
            data,
            n,
            || vec![Complex::new(0.0, 0.0); scratch_len],
            |buf, _, row| {
                plan.process_with_scratch(row, buf);
                Ok(())
            },
        )
    };
    rows(grid)?;
    exec::fill_indexed(exec, scratch, |idx| {
        let (i, j) = (idx / n, idx % n);
        grid[j * n + i]
    });
    rows(scratch)?;
    exec::fill_indexed(exec, grid, |idx| {
        let (i, j) = (idx / n, idx % n);
        scratch[j * n + i]
    });
    Ok(())
}
