//! Data-parallel helpers with a sequential fallback.
//!
//! Results are always returned in input order so that any reduction done by
//! the caller is independent of scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `items`, in parallel when the `parallel` feature is on.
pub fn map_ordered<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Map `f` over `0..n`.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Sequential version of [`map_range`], always available for comparison.
pub fn map_range_sequential<R, F>(n: usize, f: F) -> Vec<R>
where
    F: Fn(usize) -> R,
{
    (0..n).map(f).collect()
}

/// Run `op` with at most `workers` threads (ignored without `parallel`).
pub fn with_workers<R: Send>(workers: usize, op: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        if workers == 0 {
            return op();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => pool.install(op),
            Err(_) => op(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        op()
    }
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
