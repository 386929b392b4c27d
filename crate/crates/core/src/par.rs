//! Execution policy for the data-parallel loops.

/// How independent units of work (blocks, chains, replicates) are scheduled.
///
/// `Parallel` uses the rayon global pool when the `parallel` feature is
/// compiled in and degrades to `Sequential` otherwise. Every caller merges
/// results by index, so both policies give identical output.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// Whether work will actually be spread over threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// Evaluates `f(0..n)` and returns the results in index order.
pub fn map_indexed<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec == Exec::Parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Configures the global rayon pool. A no-op without the `parallel` feature.
///
/// Returns false if the pool had already been initialised.
pub fn init_threads(threads: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        return rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .is_ok();
    }
    #[allow(unreachable_code)]
    {
        let _ = threads;
        false
    }
}
