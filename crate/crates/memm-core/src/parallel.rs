//! Data-parallel map helpers with a sequential fallback.
//!
//! All call sites produce index-ordered vectors, so the parallel and
//! sequential builds return bitwise-identical results for any thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n`, collecting results in index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Maps `f` over `0..n`, collecting results in index order.
#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Sequential variant, kept available for benchmarking against the parallel
/// path within one build.
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Sizes the global worker pool; `0` keeps the default (all cores). Calls
/// after the pool exists are ignored.
#[cfg(feature = "parallel")]
pub fn configure_threads(n: usize) {
    if n > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

#[cfg(not(feature = "parallel"))]
pub fn configure_threads(_n: usize) {}

/// Runs `f` inside a single-threaded rayon pool, forcing sequential
/// execution of every `map_indexed` call underneath it.
#[cfg(feature = "parallel")]
pub fn run_single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("single-thread pool")
        .install(f)
}

#[cfg(not(feature = "parallel"))]
pub fn run_single_threaded<T>(f: impl FnOnce() -> T) -> T {
    f()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_indexed_preserves_order() {
        let squares = map_indexed(100, |i| (i * i) as u64);
        let expected: Vec<u64> = (0..100).map(|i| (i * i) as u64).collect();
        assert_eq!(squares, expected);
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let a = map_indexed(1000, |i| (i as f64).sin());
        let b = map_indexed_seq(1000, |i| (i as f64).sin());
        assert_eq!(a, b);
    }
}
