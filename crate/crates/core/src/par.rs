//! Job execution across drops and experiments.
//!
//! With the `parallel` feature (default) jobs run on a rayon pool; without
//! it, or with [`Execution::Sequential`], they run in a plain loop. Results
//! come back in job order either way, and every job is a pure function of
//! its index, so output never depends on the schedule.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// The current rayon pool, sized by [`with_threads`].
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this build can actually run jobs in parallel.
    pub fn available() -> bool {
        cfg!(feature = "parallel")
    }
}

/// Runs `f(0..n)` and returns the results in index order.
pub fn map_jobs<T, F>(n: usize, execution: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Runs `op` with at most `threads` workers available to [`map_jobs`].
pub fn with_threads<R, F>(threads: Option<usize>, op: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            return pool.install(op);
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    op()
}
