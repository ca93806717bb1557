//! Smallest generalized eigenvalue of a symmetric pencil (H, M): the
//! stability constant γ = min_v ⟨Hv, v⟩ / ⟨Mv, v⟩ with M the H¹-seminorm
//! Gram matrix. Inertia counts of banded LDLᵀ factorizations bracket the
//! eigenvalue, shift-invert inverse iteration refines it, and a final
//! inertia check certifies the bracket.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{BlendError, Result};
use crate::exec::Exec;
use crate::la::{reverse_cuthill_mckee, Csr, SymBanded};
use crate::tol;

fn maxabs(a: &Csr) -> f64 {
    let mut m = 0.0f64;
    for i in 0..a.n_rows() {
        let (_, vals) = a.row(i);
        for &v in vals {
            m = m.max(v.abs());
        }
    }
    m
}

/// The permuted pencil, stored as merged lower-triangle entries.
struct Pencil {
    n: usize,
    bw: usize,
    /// (row, col ≤ row, H value, M value) in the permuted numbering.
    entries: Vec<(u32, u32, f64, f64)>,
}

impl Pencil {
    fn new(h: &Csr, m: &Csr) -> Result<Pencil> {
        let n = h.n_rows();
        let mut pattern: Vec<(u32, u32, f64)> = Vec::new();
        for i in 0..n {
            for &j in h.row(i).0.iter().chain(m.row(i).0) {
                pattern.push((i as u32, j, 1.0));
            }
        }
        let union = Csr::from_triplets(n, n, &pattern)?;
        let perm = reverse_cuthill_mckee(&union);
        let hp = h.permute_symmetric(&perm)?;
        let mp = m.permute_symmetric(&perm)?;

        let mut bw = 0usize;
        let mut entries = Vec::new();
        for i in 0..n {
            let (hc, hv) = hp.row(i);
            let (mc, mv) = mp.row(i);
            let (mut a, mut b) = (0usize, 0usize);
            while a < hc.len() || b < mc.len() {
                let ca = hc.get(a).copied().unwrap_or(u32::MAX);
                let cb = mc.get(b).copied().unwrap_or(u32::MAX);
                let (j, hval, mval) = if ca < cb {
                    a += 1;
                    (ca, hv[a - 1], 0.0)
                } else if cb < ca {
                    b += 1;
                    (cb, 0.0, mv[b - 1])
                } else {
                    a += 1;
                    b += 1;
                    (ca, hv[a - 1], mv[b - 1])
                };
                if (j as usize) <= i {
                    bw = bw.max(i - j as usize);
                    entries.push((i as u32, j, hval, mval));
                }
            }
        }
        Ok(Pencil { n, bw, entries })
    }

    fn shifted(&self, sigma: f64) -> SymBanded {
        let mut a = SymBanded::zeros(self.n, self.bw);
        for &(i, j, hv, mv) in &self.entries {
            a.set(i as usize, j as usize, hv - sigma * mv);
        }
        a
    }

    /// Number of generalized eigenvalues below `sigma` (Sylvester count),
    /// nudging the shift when it lands on a breakdown point.
    fn count_below(&self, sigma: f64, scale: f64) -> Result<usize> {
        let mut s = sigma;
        for attempt in 0..4 {
            match self.shifted(s).ldlt() {
                Ok(f) => return Ok(f.inertia().0),
                Err(_) => {
                    let nudge = (1 << attempt) as f64 * 1e-12 * scale.max(s.abs());
                    s = sigma - nudge;
                }
            }
        }
        Err(BlendError::Linear(format!(
            "inertia count kept hitting factorization breakdowns near shift {sigma:.6e}"
        )))
    }
}

/// Smallest λ with H v = λ M v for symmetric H and symmetric positive
/// definite M, to relative accuracy [`tol::EIG_REL`].
pub fn stability_constant(h: &Csr, m: &Csr) -> Result<f64> {
    let n = h.n_rows();
    if n == 0 || h.n_cols() != n || m.n_rows() != n || m.n_cols() != n {
        return Err(BlendError::Config(format!(
            "pencil shape mismatch: H is {}x{}, M is {}x{}",
            h.n_rows(),
            h.n_cols(),
            m.n_rows(),
            m.n_cols()
        )));
    }
    let pencil = Pencil::new(h, m)?;
    let m_scale = maxabs(m);
    let scale = if m_scale > 0.0 {
        maxabs(h) / m_scale
    } else {
        return Err(BlendError::Config(
            "H¹ Gram matrix is identically zero".into(),
        ));
    };

    // M must be positive definite for the quotient to make sense.
    {
        let mut mb = SymBanded::zeros(pencil.n, pencil.bw);
        for &(i, j, _, mv) in &pencil.entries {
            mb.set(i as usize, j as usize, mv);
        }
        let spd = mb.ldlt().map(|f| f.inertia().0 == 0).unwrap_or(false);
        if !spd {
            return Err(BlendError::Config(
                "H¹ Gram matrix is singular or indefinite after boundary \
                 elimination"
                    .into(),
            ));
        }
    }

    // Bracket [lo, hi] with no eigenvalue below lo and at least one
    // below hi.
    let step = scale.max(1e-300);
    let (mut lo, mut hi);
    if pencil.count_below(0.0, scale)? == 0 {
        lo = 0.0;
        hi = step;
        let mut tries = 0;
        while pencil.count_below(hi, scale)? == 0 {
            lo = hi;
            hi *= 4.0;
            tries += 1;
            if tries > 60 {
                return Err(BlendError::Solve(
                    "no generalized eigenvalue found above zero".into(),
                ));
            }
        }
    } else {
        hi = 0.0;
        lo = -step;
        let mut tries = 0;
        while pencil.count_below(lo, scale)? > 0 {
            hi = lo;
            lo *= 4.0;
            tries += 1;
            if tries > 60 {
                return Err(BlendError::Solve(
                    "the pencil appears unbounded below".into(),
                ));
            }
        }
    }

    let width_floor = 1e-14 * scale.max(1e-300);
    let coarse = |lo: f64, hi: f64| 1e-3 * lo.abs().max(hi.abs()).max(width_floor);
    let mut iters = 0;
    while hi - lo > coarse(lo, hi) && hi - lo > width_floor && iters < 200 {
        let mid = 0.5 * (lo + hi);
        if pencil.count_below(mid, scale)? >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
        iters += 1;
    }

    // Shift-invert inverse iteration from the definite side of the
    // bracket, with the Rayleigh quotient as the eigenvalue estimate.
    let refined = inverse_iterate(&pencil, lo).ok();
    let lam = match refined {
        Some(lam) if lam > lo - width_floor && lam < hi + width_floor => {
            // Certify with inertia on both sides.
            let delta = (tol::EIG_REL * lam.abs()).max(width_floor);
            if pencil.count_below(lam - delta, scale)? == 0
                && pencil.count_below(lam + delta, scale)? >= 1
            {
                Some(lam)
            } else {
                None
            }
        }
        _ => None,
    };
    if let Some(lam) = lam {
        return Ok(lam);
    }

    // Fallback: pure bisection to the target tolerance.
    let fine = |lo: f64, hi: f64| (tol::EIG_REL * lo.abs().max(hi.abs())).max(width_floor);
    let mut iters = 0;
    while hi - lo > fine(lo, hi) && iters < 300 {
        let mid = 0.5 * (lo + hi);
        if pencil.count_below(mid, scale)? >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
        iters += 1;
    }
    Ok(0.5 * (lo + hi))
}

/// One inverse-iteration run at fixed shift `sigma` (which must be below
/// the smallest eigenvalue); returns the Rayleigh quotient. Works in the
/// pencil's permuted frame, which leaves eigenvalues unchanged.
fn inverse_iterate(pencil: &Pencil, sigma: f64) -> Result<f64> {
    let n = pencil.n;
    let mut h_trips = Vec::with_capacity(pencil.entries.len() * 2);
    let mut m_trips = Vec::with_capacity(pencil.entries.len() * 2);
    for &(i, j, hv, mv) in &pencil.entries {
        h_trips.push((i, j, hv));
        m_trips.push((i, j, mv));
        if i != j {
            h_trips.push((j, i, hv));
            m_trips.push((j, i, mv));
        }
    }
    let hp = Csr::from_triplets(n, n, &h_trips)?;
    let mp = Csr::from_triplets(n, n, &m_trips)?;

    let factor = pencil.shifted(sigma).ldlt()?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut rho_prev = f64::INFINITY;
    let mut work = vec![0.0; n];
    for _ in 0..60 {
        // z = (H − σM)⁻¹ M v
        mp.matvec(Exec::Seq, &v, &mut work);
        let mut z = work.clone();
        factor.solve_in_place(&mut z);
        // Normalize in the M norm.
        mp.matvec(Exec::Seq, &z, &mut work);
        let zmz: f64 = z.iter().zip(&work).map(|(a, b)| a * b).sum();
        if !(zmz > 0.0) {
            return Err(BlendError::Linear(
                "inverse iteration left the M-positive cone".into(),
            ));
        }
        let s = zmz.sqrt();
        for x in &mut z {
            *x /= s;
        }
        hp.matvec(Exec::Seq, &z, &mut work);
        let zhz: f64 = z.iter().zip(&work).map(|(a, b)| a * b).sum();
        let rho = zhz; // zᵀMz = 1 by construction
        v = z;
        if (rho - rho_prev).abs() <= tol::EIG_REL * rho.abs().max(1e-300) {
            return Ok(rho);
        }
        rho_prev = rho;
    }
    Ok(rho_prev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Mesh, MeshParams};
    use crate::solvers::pack::DofMap;
    use crate::solvers::stiffness::mesh_stiffness;
    use nalgebra::DMatrix;
    use rand::Rng;

    fn interior_gram(mesh: &Mesh) -> Csr {
        let map = DofMap::interior(mesh, 1);
        let trips = map.pack_triplets(&mesh_stiffness(mesh));
        Csr::from_triplets(map.len(), map.len(), &trips).unwrap()
    }

    #[test]
    fn identity_and_scaling_quotients() {
        let mesh = Mesh::build(&MeshParams {
            r_core: 4.0,
            r_domain: 12.0,
            r_blend: 4.0,
            h_factor: 1.0,
        })
        .unwrap();
        let m = interior_gram(&mesh);
        let lam = stability_constant(&m, &m).unwrap();
        assert!((lam - 1.0).abs() < 1e-7, "{lam}");

        let doubled: Vec<(u32, u32, f64)> = (0..m.n_rows())
            .flat_map(|i| {
                let (cols, vals) = m.row(i);
                cols.iter()
                    .zip(vals)
                    .map(|(&c, &v)| (i as u32, c, 2.0 * v))
                    .collect::<Vec<_>>()
            })
            .collect();
        let h = Csr::from_triplets(m.n_rows(), m.n_cols(), &doubled).unwrap();
        let lam = stability_constant(&h, &m).unwrap();
        assert!((lam - 2.0).abs() < 2e-7, "{lam}");
    }

    #[test]
    fn agrees_with_a_dense_generalized_eigensolver() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 24;
        // M: diagonally dominant SPD; H: symmetric, possibly indefinite.
        let mut m_d = DMatrix::<f64>::zeros(n, n);
        let mut h_d = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..i {
                let mv = rng.gen_range(-0.3..0.3);
                m_d[(i, j)] = mv;
                m_d[(j, i)] = mv;
                let hv = rng.gen_range(-1.0..1.0);
                h_d[(i, j)] = hv;
                h_d[(j, i)] = hv;
            }
        }
        for i in 0..n {
            m_d[(i, i)] = 0.3 * (n as f64);
            h_d[(i, i)] = rng.gen_range(-1.0..2.0);
        }

        // Dense oracle: M = LLᵀ, eigenvalues of L⁻¹ H L⁻ᵀ.
        let chol = m_d.clone().cholesky().unwrap();
        let li = chol.l().try_inverse().unwrap();
        let std = &li * &h_d * li.transpose();
        let expect = std
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);

        let dense_trips = |d: &DMatrix<f64>| {
            let mut t = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    if d[(i, j)] != 0.0 {
                        t.push((i as u32, j as u32, d[(i, j)]));
                    }
                }
            }
            t
        };
        let h = Csr::from_triplets(n, n, &dense_trips(&h_d)).unwrap();
        let m = Csr::from_triplets(n, n, &dense_trips(&m_d)).unwrap();
        let lam = stability_constant(&h, &m).unwrap();
        assert!(
            (lam - expect).abs() <= 1e-7 * expect.abs().max(1.0),
            "{lam} vs {expect}"
        );
        assert!(expect < 0.0, "oracle should exercise the negative branch");
    }

    #[test]
    fn singular_gram_matrix_is_rejected() {
        // A floating dof: M has an empty row/column.
        let h = Csr::from_triplets(3, 3, &[(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0)]).unwrap();
        let m = Csr::from_triplets(3, 3, &[(0, 0, 1.0), (1, 1, 1.0), (2, 2, 0.0)]).unwrap();
        let err = stability_constant(&h, &m).err().unwrap();
        assert!(format!("{err}").contains("singular"), "{err}");
    }
}
