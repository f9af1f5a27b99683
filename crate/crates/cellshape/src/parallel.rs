//! Data-parallel loop helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the helpers dispatch per-element and
//! per-row work to rayon; without it they compile to plain loops. Reductions
//! that feed reported numbers are always performed in index order, so results
//! are bit-identical between the parallel and sequential paths and across
//! thread counts.

use std::sync::atomic::{AtomicBool, Ordering};

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Force the sequential code path at runtime even when the `parallel`
/// feature is compiled in. Used by benchmarks and determinism tests.
pub fn set_sequential_override(on: bool) {
    FORCE_SEQUENTIAL.store(on, Ordering::SeqCst);
}

pub fn sequential_override() -> bool {
    FORCE_SEQUENTIAL.load(Ordering::SeqCst)
}

// Below this many work items rayon overhead dominates; run inline.
#[cfg(feature = "parallel")]
const PAR_THRESHOLD: usize = 2048;

#[cfg(feature = "parallel")]
fn use_parallel(n: usize) -> bool {
    n >= PAR_THRESHOLD && !sequential_override()
}

/// Evaluate `f(0..n)` into a vector, preserving index order.
pub fn map_collect<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if use_parallel(n) {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

/// Overwrite each slice element with `f(index)`.
pub fn fill_indexed<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if use_parallel(out.len()) {
            use rayon::prelude::*;
            out.par_iter_mut()
                .enumerate()
                .for_each(|(i, slot)| *slot = f(i));
            return;
        }
    }
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = f(i);
    }
}

/// Sum `f(0..n)` in strict index order (deterministic reduction).
pub fn sum_indexed<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    // Parallel map into an ordered buffer, then an ordered sum; the
    // floating-point result does not depend on the thread count.
    #[cfg(feature = "parallel")]
    {
        if use_parallel(n) {
            let terms = map_collect(n, f);
            return terms.iter().sum();
        }
    }
    (0..n).map(f).sum()
}
