//! Reverse Cuthill-McKee ordering for bandwidth reduction.

use super::csr::Csr;

/// Returns a permutation (new index -> old index) that tends to shrink the
/// bandwidth of `a`'s symmetrized sparsity pattern. Ties are broken by
/// vertex index, so the ordering is deterministic. Disconnected components
/// are ordered one after another.
pub fn reverse_cuthill_mckee(a: &Csr) -> Vec<u32> {
    let n = a.n_rows();
    assert_eq!(n, a.n_cols(), "ordering requires a square matrix");
    // Undirected adjacency from the union of the pattern and its transpose,
    // without diagonal entries.
    let t = a.transpose();
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    for i in 0..n {
        let (cols_a, _) = a.row(i);
        let (cols_t, _) = t.row(i);
        let mut merged: Vec<u32> = cols_a
            .iter()
            .chain(cols_t.iter())
            .copied()
            .filter(|&c| c as usize != i)
            .collect();
        merged.sort_unstable();
        merged.dedup();
        adj[i] = merged;
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();

    let mut order: Vec<u32> = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    loop {
        // Start each component from an unvisited vertex of minimum degree.
        let start = match (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| (degree[i], i))
        {
            Some(s) => s,
            None => break,
        };
        visited[start] = true;
        let mut queue: Vec<u32> = vec![start as u32];
        let mut head = 0usize;
        while head < queue.len() {
            let v = queue[head] as usize;
            head += 1;
            order.push(v as u32);
            let mut next: Vec<u32> = adj[v]
                .iter()
                .copied()
                .filter(|&w| !visited[w as usize])
                .collect();
            next.sort_by_key(|&w| (degree[w as usize], w));
            for w in next {
                visited[w as usize] = true;
                queue.push(w);
            }
        }
    }
    order.reverse();
    order
}
