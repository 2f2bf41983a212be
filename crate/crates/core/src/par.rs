//! Trial fan-out. Trials are independent and indexed, so the parallel and
//! sequential runners return identical vectors.

/// Runs `f(0..count)` and collects results in index order. Uses rayon when
/// the `parallel` feature is on.
pub fn map_trials<T, F>(count: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_trials_sequential(count, f)
    }
}

pub fn map_trials_sequential<T, F>(count: u64, f: F) -> Vec<T>
where
    F: Fn(u64) -> T,
{
    (0..count).map(f).collect()
}
