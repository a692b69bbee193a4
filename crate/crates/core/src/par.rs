//! Index-ordered map over sample indices.
//!
//! With the `parallel` feature the work is spread over the rayon pool;
//! without it the same closure runs sequentially. Output order is the index
//! order in both cases, so any reduction over the result is deterministic.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::Result;

/// `f(0), .., f(n - 1)` collected in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    #[cfg(feature = "parallel")]
    return (0..n).into_par_iter().map(f).collect();

    #[cfg(not(feature = "parallel"))]
    return map_indexed_sequential(n, f);
}

/// Fallible variant of [`map_indexed`]; returns the first error by index.
pub fn try_map_indexed<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Send + Sync,
{
    map_indexed(n, f).into_iter().collect()
}

/// Always-sequential reference path, used by benches and equivalence tests.
pub fn map_indexed_sequential<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

pub fn num_threads() -> usize {
    #[cfg(feature = "parallel")]
    return rayon::current_num_threads();

    #[cfg(not(feature = "parallel"))]
    return 1;
}

/// Sizes the global pool. Without the `parallel` feature only `n = 1` is
/// meaningful and any value is accepted.
pub fn set_num_threads(n: usize) -> std::result::Result<(), String> {
    #[cfg(feature = "parallel")]
    return rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string());

    #[cfg(not(feature = "parallel"))]
    {
        let _ = n;
        Ok(())
    }
}
