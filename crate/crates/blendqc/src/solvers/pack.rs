//! Packing between full nodal vectors and the reduced unknown vector with
//! clamped (boundary) degrees of freedom eliminated.

use nalgebra::SVector;

use crate::geometry::Mesh;

const CLAMPED: u32 = u32::MAX;

/// A bijection packed-index ↔ retained full dof.
pub struct DofMap {
    full: Vec<u32>,
    packed: Vec<u32>,
}

impl DofMap {
    /// Retains the dofs of non-boundary mesh nodes, `m` components each.
    pub fn interior(mesh: &Mesh, m: usize) -> DofMap {
        let n = mesh.node_count();
        let mut full = Vec::new();
        let mut packed = vec![CLAMPED; n * m];
        for node in 0..n as u32 {
            if mesh.is_boundary(node) {
                continue;
            }
            for c in 0..m as u32 {
                let dof = node * m as u32 + c;
                packed[dof as usize] = full.len() as u32;
                full.push(dof);
            }
        }
        DofMap { full, packed }
    }

    /// Number of retained dofs.
    pub fn len(&self) -> usize {
        self.full.len()
    }

    pub fn is_empty(&self) -> bool {
        self.full.is_empty()
    }

    /// Full dof behind packed index `i`.
    pub fn full_dof(&self, i: u32) -> u32 {
        self.full[i as usize]
    }

    /// Drops triplets touching eliminated rows or columns and renumbers
    /// the rest.
    pub fn pack_triplets(&self, trips: &[(u32, u32, f64)]) -> Vec<(u32, u32, f64)> {
        trips
            .iter()
            .filter_map(|&(r, c, v)| {
                let pr = self.packed[r as usize];
                let pc = self.packed[c as usize];
                if pr == CLAMPED || pc == CLAMPED {
                    None
                } else {
                    Some((pr, pc, v))
                }
            })
            .collect()
    }

    /// Reads the retained entries of a nodal block vector.
    pub fn pack_vec<const M: usize>(&self, v: &[SVector<f64, M>]) -> Vec<f64> {
        self.full
            .iter()
            .map(|&dof| v[dof as usize / M][dof as usize % M])
            .collect()
    }

    /// Writes a packed vector into the retained entries of a nodal block
    /// vector, leaving eliminated entries untouched.
    pub fn unpack_into<const M: usize>(&self, x: &[f64], out: &mut [SVector<f64, M>]) {
        assert_eq!(x.len(), self.full.len());
        for (i, &dof) in self.full.iter().enumerate() {
            out[dof as usize / M][dof as usize % M] = x[i];
        }
    }
}
