//! Execution helpers that switch between rayon and sequential iteration.
//!
//! Every data-parallel inner loop in the crate goes through one of these
//! helpers so that the `parallel` feature is the single switch between the
//! rayon build and the sequential fallback. Both paths preserve input order
//! (parallel maps collect in order; reductions that would be
//! order-sensitive are kept sequential at the call site), so outputs are
//! byte-identical across the two builds.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items`, preserving order.
#[cfg(feature = "parallel")]
pub fn map_vec<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    items.into_par_iter().map(f).collect()
}

/// Maps `f` over `items`, preserving order.
#[cfg(not(feature = "parallel"))]
pub fn map_vec<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    F: Fn(T) -> U,
{
    items.into_iter().map(f).collect()
}

/// Maps a fallible `f` over `items`, preserving order.
///
/// On error the parallel build still returns a deterministic result: the
/// error from the earliest failing index wins, matching the sequential
/// build's first-error behavior.
#[cfg(feature = "parallel")]
pub fn try_map_vec<T, U, E, F>(items: Vec<T>, f: F) -> Result<Vec<U>, E>
where
    T: Send,
    U: Send,
    E: Send,
    F: Fn(T) -> Result<U, E> + Sync + Send,
{
    let results: Vec<Result<U, E>> = items.into_par_iter().map(f).collect();
    results.into_iter().collect()
}

/// Maps a fallible `f` over `items`, preserving order.
#[cfg(not(feature = "parallel"))]
pub fn try_map_vec<T, U, E, F>(items: Vec<T>, f: F) -> Result<Vec<U>, E>
where
    F: Fn(T) -> Result<U, E>,
{
    items.into_iter().map(f).collect()
}

/// Maps `f` over the index range `0..n`, preserving order.
#[cfg(feature = "parallel")]
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Maps `f` over the index range `0..n`, preserving order.
#[cfg(not(feature = "parallel"))]
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

/// Caps the global worker pool at `n` threads; `0` keeps the library
/// default. Returns `false` when the pool was already initialized (the
/// cap cannot be applied retroactively); callers may warn but should
/// continue.
#[cfg(feature = "parallel")]
pub fn configure_parallelism(n: usize) -> bool {
    if n == 0 {
        return true;
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_ok()
}

/// Sequential build: there is no pool, so any cap trivially holds.
#[cfg(not(feature = "parallel"))]
pub fn configure_parallelism(_n: usize) -> bool {
    true
}
