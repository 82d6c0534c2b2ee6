//! Execution-mode plumbing for the data-parallel inner loops.
//!
//! Everything here is index-deterministic: each output element is computed
//! by exactly one task from a pure function of its index, and reductions
//! happen in a fixed order inside a single task. Sequential and parallel
//! execution therefore produce bitwise-identical results; the mode only
//! affects scheduling. The criterion bench suite flips the mode at runtime
//! to compare both on the same build.
//!
//! Building with `--no-default-features` removes the rayon dependency and
//! everything runs sequentially regardless of the configured mode.

use std::sync::atomic::{AtomicBool, Ordering};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// How the data-parallel helpers execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    /// Plain loops on the calling thread.
    Sequential,
    /// rayon work-stealing (requires the `parallel` feature).
    Parallel,
}

/// Select the execution mode. With the `parallel` feature disabled this is
/// a no-op and the mode stays [`ExecMode::Sequential`].
pub fn set_exec_mode(mode: ExecMode) {
    FORCE_SEQUENTIAL.store(mode == ExecMode::Sequential, Ordering::Relaxed);
}

/// The currently effective execution mode.
pub fn exec_mode() -> ExecMode {
    if cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.load(Ordering::Relaxed) {
        ExecMode::Parallel
    } else {
        ExecMode::Sequential
    }
}

fn run_parallel() -> bool {
    exec_mode() == ExecMode::Parallel
}

/// Apply `f(chunk_index, chunk)` to consecutive `chunk_len`-sized pieces of
/// `data`. Chunks are disjoint, so tasks never contend.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    assert!(chunk_len > 0, "chunk_len must be positive");
    #[cfg(feature = "parallel")]
    if run_parallel() {
        data.par_chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, chunk)| f(i, chunk));
        return;
    }
    for (i, chunk) in data.chunks_mut(chunk_len).enumerate() {
        f(i, chunk);
    }
}

/// `(0..n).map(f)` collected in index order.
pub fn map_indexed<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if run_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Map `f` over a slice, preserving order.
pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if run_parallel() {
        return items.par_iter().map(f).collect();
    }
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_writes_cover_all_elements() {
        let mut data = vec![0usize; 12];
        for_each_chunk_mut(&mut data, 3, |i, chunk| {
            for (j, v) in chunk.iter_mut().enumerate() {
                *v = i * 10 + j;
            }
        });
        assert_eq!(data[0], 0);
        assert_eq!(data[3], 10);
        assert_eq!(data[11], 32);
    }

    #[test]
    fn map_indexed_preserves_order() {
        let out = map_indexed(100, |i| i * i);
        assert_eq!(out[7], 49);
        assert_eq!(out.len(), 100);
    }

    #[test]
    fn modes_agree_bitwise() {
        let work = |mode: ExecMode| {
            set_exec_mode(mode);
            let mut data = vec![0.0f64; 64];
            for_each_chunk_mut(&mut data, 8, |i, chunk| {
                for (j, v) in chunk.iter_mut().enumerate() {
                    *v = ((i * 8 + j) as f64).sin().exp();
                }
            });
            set_exec_mode(ExecMode::Parallel);
            data
        };
        let seq = work(ExecMode::Sequential);
        let par = work(ExecMode::Parallel);
        assert_eq!(seq, par);
    }
}
