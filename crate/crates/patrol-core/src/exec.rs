//! Data-parallel execution helpers.
//!
//! With the `parallel` feature (default) [`map_slice`] and [`map_indices`]
//! fan out over rayon; without it they run sequentially. Both keep input
//! order, so results are identical either way. The `_seq` variants are
//! always sequential and exist so benchmarks can compare the two paths in
//! one build.

/// Maps `f` over a slice, preserving order.
#[cfg(feature = "parallel")]
pub fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

/// Maps `f` over a slice, preserving order.
#[cfg(not(feature = "parallel"))]
pub fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Sequential reference implementation of [`map_slice`].
pub fn map_slice_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Maps `f` over `0..n`, preserving order.
#[cfg(feature = "parallel")]
pub fn map_indices<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

/// Maps `f` over `0..n`, preserving order.
#[cfg(not(feature = "parallel"))]
pub fn map_indices<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

/// Sequential reference implementation of [`map_indices`].
pub fn map_indices_seq<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

/// Runs `f` inside a thread pool of `jobs` threads when parallel execution
/// is enabled and `jobs > 0`; otherwise runs it directly.
#[cfg(feature = "parallel")]
pub fn with_jobs<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> R {
    if jobs == 0 {
        f()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("failed to build thread pool")
            .install(f)
    }
}

/// Runs `f` directly; the `jobs` hint is meaningless without `parallel`.
#[cfg(not(feature = "parallel"))]
pub fn with_jobs<R>(_jobs: usize, f: impl FnOnce() -> R) -> R {
    f()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_slice_preserves_order() {
        let xs: Vec<u64> = (0..1000).collect();
        let squared = map_slice(&xs, |x| x * x);
        assert_eq!(squared, map_slice_seq(&xs, |x| x * x));
    }

    #[test]
    fn map_indices_matches_seq() {
        let a = map_indices(257, |i| i as f64 * 0.5);
        let b = map_indices_seq(257, |i| i as f64 * 0.5);
        assert_eq!(a, b);
    }

    #[test]
    fn with_jobs_runs_closure() {
        assert_eq!(with_jobs(1, || 7), 7);
        assert_eq!(with_jobs(0, || 7), 7);
    }
}
