//! Execution policy for the per-particle passes.
//!
//! Every bulk pass in the crate is a pure map over particle ids, so the
//! parallel and sequential paths produce bit-identical results. Without the
//! `parallel` feature [`Policy::Parallel`] quietly runs sequentially.

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Policy {
    Sequential,
    #[default]
    Parallel,
}

impl Policy {
    /// Maps `f` over `0..n`, preserving index order in the output.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Policy::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            _ => (0..n).map(f).collect(),
        }
    }

    /// Like [`Policy::map`] but stops at the first error (lowest index wins
    /// in the sequential path; any failing index in the parallel one).
    pub fn try_map<T, E, F>(self, n: usize, f: F) -> Result<Vec<T>, E>
    where
        T: Send,
        E: Send,
        F: Fn(usize) -> Result<T, E> + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Policy::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            _ => (0..n).map(f).collect(),
        }
    }
}

/// Configures the global worker pool from `SPHR_THREADS`, if set.
///
/// Returns the thread count that was applied. A no-op without the
/// `parallel` feature.
pub fn init_threads_from_env() -> Option<usize> {
    let n = std::env::var("SPHR_THREADS")
        .ok()?
        .trim()
        .parse::<usize>()
        .ok()
        .filter(|&n| n > 0)?;
    #[cfg(feature = "parallel")]
    {
        // Fails only if the pool was already built; the existing pool stays.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Some(n)
}
