//! Data-parallel map over an index range, with a sequential fallback.
//!
//! With the `parallel` feature (default) the indexed map runs on the rayon
//! global pool. Without it the crate is single-threaded. Work units receive
//! their index and derive any randomness from it, so output is identical in
//! both modes and for any thread count.

/// Map `f` over `0..n`, sequentially. Always available; benchmarks use it as
/// the baseline against the parallel path.
pub fn map_indexed_serial<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    map_indexed_serial(n, f)
}
