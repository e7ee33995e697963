//! Replica fan-out. Results always come back in replica order, so any
//! reduction done afterwards is independent of how work was scheduled.

/// Evaluates `f(0..n)` and returns the results in index order.
///
/// Runs on the current rayon pool when the `parallel` feature is enabled and
/// sequentially otherwise.
pub fn map_replicas<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_replicas_seq(n, f)
    }
}

/// Sequential reference path, always available.
pub fn map_replicas_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Like [`map_replicas`] but short-circuits on the first error (by index).
pub fn try_map_replicas<T, E, F>(n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_replicas(n, f).into_iter().collect()
}
