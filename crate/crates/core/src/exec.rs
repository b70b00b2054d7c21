//! Parallel execution shim.
//!
//! With the `parallel` feature (default) independent work units fan out over
//! rayon; without it the same code runs sequentially. Both paths collect in
//! index order, so outputs never depend on scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Applies `f` to `0..count` and collects results in index order.
pub(crate) fn map_indexed<U, F>(count: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}
