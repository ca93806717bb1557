//! Deterministic sequential/parallel execution of bulk loops.
//!
//! Every bulk reduction in this crate (site sums, element sums, dot
//! products) runs through these helpers. Work is split into fixed-size
//! chunks; each chunk is reduced sequentially in index order and the partial
//! results are folded in chunk order. The parallel path distributes chunks
//! over threads but performs the *same arithmetic in the same order*, so
//! `Exec::Par` and `Exec::Seq` agree bitwise and reruns are reproducible
//! regardless of thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::Result;

/// Execution policy for bulk loops.
///
/// `Par` falls back to sequential execution when the `parallel` feature is
/// disabled, so it is always safe as a default.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exec {
    Seq,
    Par,
}

impl Default for Exec {
    fn default() -> Self {
        Exec::Par
    }
}

/// Chunk length for deterministic reductions. Large enough to amortize
/// scheduling, small enough to load-balance a few thousand items.
const CHUNK: usize = 1024;

#[cfg(feature = "parallel")]
fn par_enabled(exec: Exec) -> bool {
    exec == Exec::Par
}

/// Sum `f(i)` for `i in 0..n` with deterministic association.
pub fn sum_indexed<F>(exec: Exec, n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let chunk_sum = |lo: usize| -> f64 {
        let hi = (lo + CHUNK).min(n);
        let mut s = 0.0;
        for i in lo..hi {
            s += f(i);
        }
        s
    };
    let starts: Vec<usize> = (0..n).step_by(CHUNK).collect();
    let partials: Vec<f64> = map_over(exec, &starts, |&lo| chunk_sum(lo));
    partials.iter().sum()
}

/// Map `f` over a slice, preserving order.
pub fn map_over<T, U, F>(exec: Exec, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if par_enabled(exec) {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Build `Vec[i] = f(i)` for `i in 0..n`, preserving order.
pub fn map_indexed<U, F>(exec: Exec, n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if par_enabled(exec) {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Overwrite `out[i] = f(i)` in place.
pub fn fill_indexed<U, F>(exec: Exec, out: &mut [U], f: F)
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if par_enabled(exec) {
        out.par_iter_mut()
            .enumerate()
            .for_each(|(i, slot)| *slot = f(i));
        return;
    }
    let _ = exec;
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = f(i);
    }
}

/// In-place elementwise update `out[i] = f(i, out[i])`. Bitwise identical
/// across schedules because every slot is computed independently.
pub fn update_indexed<U, F>(exec: Exec, out: &mut [U], f: F)
where
    U: Copy + Send + Sync,
    F: Fn(usize, U) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if par_enabled(exec) {
        out.par_iter_mut()
            .enumerate()
            .for_each(|(i, slot)| *slot = f(i, *slot));
        return;
    }
    let _ = exec;
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = f(i, *slot);
    }
}

/// Deterministic dot product of two equal-length slices.
pub fn dot(exec: Exec, a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    sum_indexed(exec, a.len(), |i| a[i] * b[i])
}

/// Fallible deterministic sum with per-chunk scratch space.
///
/// `make_scratch` is called once per chunk; `f(&mut scratch, i)` produces
/// the `i`-th summand and may reuse the scratch buffers to avoid per-item
/// allocation. On failure the error from the lowest failing chunk (and,
/// within it, the lowest index) is returned, so sequential and parallel
/// runs report the same error.
pub fn try_sum_with_scratch<S, MS, F>(exec: Exec, n: usize, make_scratch: MS, f: F) -> Result<f64>
where
    MS: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize) -> Result<f64> + Sync + Send,
{
    let chunk_sum = |lo: usize| -> Result<f64> {
        let hi = (lo + CHUNK).min(n);
        let mut scratch = make_scratch();
        let mut s = 0.0;
        for i in lo..hi {
            s += f(&mut scratch, i)?;
        }
        Ok(s)
    };
    let starts: Vec<usize> = (0..n).step_by(CHUNK).collect();
    let partials: Vec<Result<f64>> = map_over(exec, &starts, |&lo| chunk_sum(lo));
    let mut total = 0.0;
    for p in partials {
        total += p?;
    }
    Ok(total)
}

/// Fallible deterministic block fill with per-chunk scratch space.
///
/// `out` is interpreted as `out.len() / block` consecutive blocks;
/// `f(&mut scratch, i, block_i)` fills block `i` in place. Error selection
/// is deterministic as in [`try_sum_with_scratch`].
pub fn try_fill_blocks_with_scratch<T, S, MS, F>(
    exec: Exec,
    out: &mut [T],
    block: usize,
    make_scratch: MS,
    f: F,
) -> Result<()>
where
    T: Send,
    MS: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize, &mut [T]) -> Result<()> + Sync + Send,
{
    assert!(block > 0, "block size must be positive");
    assert_eq!(out.len() % block, 0, "output length must be a block multiple");
    let run_chunk = |ci: usize, oc: &mut [T]| -> Result<()> {
        let mut scratch = make_scratch();
        for (j, ob) in oc.chunks_mut(block).enumerate() {
            f(&mut scratch, ci * CHUNK + j, ob)?;
        }
        Ok(())
    };
    #[cfg(feature = "parallel")]
    if par_enabled(exec) {
        let results: Vec<Result<()>> = out
            .par_chunks_mut(block * CHUNK)
            .enumerate()
            .map(|(ci, oc)| run_chunk(ci, oc))
            .collect();
        for r in results {
            r?;
        }
        return Ok(());
    }
    let _ = exec;
    for (ci, oc) in out.chunks_mut(block * CHUNK).enumerate() {
        run_chunk(ci, oc)?;
    }
    Ok(())
}

/// Configure the global thread pool size. `jobs = 0` keeps the library
/// default (all cores). Returns false when the pool was already initialized
/// or the parallel feature is off.
pub fn configure_jobs(jobs: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        if jobs == 0 {
            return true;
        }
        return rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .is_ok();
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seq_and_par_sums_agree_bitwise() {
        // Mildly ill-conditioned summands so association order matters.
        let f = |i: usize| ((i as f64) * 1.618033988749).sin() * 1e3 + 1e-3 / (1.0 + i as f64);
        let n = 10_000;
        let s_seq = sum_indexed(Exec::Seq, n, f);
        let s_par = sum_indexed(Exec::Par, n, f);
        assert_eq!(s_seq.to_bits(), s_par.to_bits());
    }

    #[test]
    fn map_preserves_order() {
        let items: Vec<usize> = (0..5000).collect();
        let a = map_over(Exec::Seq, &items, |&i| i * 2);
        let b = map_over(Exec::Par, &items, |&i| i * 2);
        assert_eq!(a, b);
    }

    #[test]
    fn dot_matches_naive_for_short_slices() {
        let a = [1.0, 2.0, 3.0];
        let b = [4.0, 5.0, 6.0];
        assert_eq!(dot(Exec::Seq, &a, &b), 32.0);
    }

    #[test]
    fn scratch_sum_matches_plain_sum_bitwise() {
        let f = |i: usize| ((i as f64) * 0.777).cos() * 10.0;
        let n = 5000;
        let plain = sum_indexed(Exec::Seq, n, f);
        let with_scratch =
            try_sum_with_scratch(Exec::Par, n, Vec::<f64>::new, |buf, i| {
                buf.clear();
                buf.push(f(i));
                Ok(buf[0])
            })
            .unwrap();
        assert_eq!(plain.to_bits(), with_scratch.to_bits());
    }

    #[test]
    fn scratch_sum_reports_lowest_failing_index() {
        use crate::error::BlendError;
        let fail_at = [4000usize, 123, 2500];
        let run = |exec: Exec| {
            try_sum_with_scratch(exec, 5000, || (), |_, i| {
                if fail_at.contains(&i) {
                    Err(BlendError::Geometry(format!("fail {i}")))
                } else {
                    Ok(1.0)
                }
            })
        };
        for exec in [Exec::Seq, Exec::Par] {
            match run(exec) {
                Err(BlendError::Geometry(msg)) => assert_eq!(msg, "fail 123"),
                other => panic!("expected geometry error, got {other:?}"),
            }
        }
    }

    #[test]
    fn block_fill_writes_every_block() {
        let n = 3000;
        let block = 3;
        let mut seq = vec![0.0; n * block];
        let mut par = vec![0.0; n * block];
        let fill = |_: &mut (), i: usize, ob: &mut [f64]| {
            for (k, slot) in ob.iter_mut().enumerate() {
                *slot = (i * 7 + k) as f64;
            }
            Ok(())
        };
        try_fill_blocks_with_scratch(Exec::Seq, &mut seq, block, || (), fill).unwrap();
        try_fill_blocks_with_scratch(Exec::Par, &mut par, block, || (), fill).unwrap();
        assert_eq!(seq, par);
        assert_eq!(seq[3 * 100], 700.0);
    }
}
