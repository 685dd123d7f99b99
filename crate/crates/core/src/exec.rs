//! Row-block execution over pixel buffers.
//!
//! With the `parallel` feature, work is split across a rayon pool; without it
//! (or with [`Workers::Sequential`]) the same closures run in row order on the
//! calling thread. Results are identical either way: every block writes only
//! its own slice of the output.

use std::num::NonZeroUsize;

/// Rows handed to a worker at a time.
const BLOCK_ROWS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Workers {
    /// All available cores.
    #[default]
    Auto,
    Sequential,
    Threads(NonZeroUsize),
}

impl Workers {
    /// `0` means [`Workers::Auto`], `1` sequential.
    pub fn from_count(n: usize) -> Self {
        match n {
            0 => Workers::Auto,
            1 => Workers::Sequential,
            n => Workers::Threads(NonZeroUsize::new(n).unwrap()),
        }
    }

    pub fn is_sequential(self) -> bool {
        !cfg!(feature = "parallel") || self == Workers::Sequential
    }

    /// Runs `op` inside a pool sized for `self`.
    #[cfg(feature = "parallel")]
    fn install<R: Send>(self, op: impl FnOnce() -> R + Send) -> R {
        match self {
            Workers::Threads(n) if n.get() != rayon::current_num_threads() => {
                match rayon::ThreadPoolBuilder::new().num_threads(n.get()).build() {
                    Ok(pool) => pool.install(op),
                    Err(_) => op(),
                }
            }
            _ => op(),
        }
    }
}

/// Calls `f(first_row, block)` for consecutive blocks of whole rows of `out`.
pub fn for_each_row_block<T, F>(out: &mut [T], width: usize, workers: Workers, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    if width == 0 || out.is_empty() {
        return;
    }
    let chunk = width * BLOCK_ROWS;
    #[cfg(feature = "parallel")]
    if !workers.is_sequential() {
        use rayon::prelude::*;
        workers.install(|| {
            out.par_chunks_mut(chunk)
                .enumerate()
                .for_each(|(i, block)| f(i * BLOCK_ROWS, block));
        });
        return;
    }
    let _ = workers;
    for (i, block) in out.chunks_mut(chunk).enumerate() {
        f(i * BLOCK_ROWS, block);
    }
}

/// Order-preserving map over independent items (regions, years).
pub fn map_items<I, R, F>(items: &[I], workers: Workers, f: F) -> Vec<R>
where
    I: Sync,
    R: Send,
    F: Fn(&I) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if !workers.is_sequential() {
        use rayon::prelude::*;
        return workers.install(|| items.par_iter().map(&f).collect());
    }
    let _ = workers;
    items.iter().map(f).collect()
}

/// Number of threads `workers` resolves to on this machine.
pub fn resolved_threads(workers: Workers) -> usize {
    if workers.is_sequential() {
        return 1;
    }
    match workers {
        Workers::Threads(n) => n.get(),
        _ => std::thread::available_parallelism().map(NonZeroUsize::get).unwrap_or(1),
    }
}
