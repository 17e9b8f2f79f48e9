//! Execution of independent seeded runs.
//!
//! Results always come back in run order, so parallel and sequential
//! execution produce identical output for the same seed.

/// Evaluates `f` on runs `0..n`. Uses rayon when the `parallel` feature is on.
pub fn map_runs<T, F>(n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_runs_sequential(n, f)
    }
}

pub fn map_runs_sequential<T, F>(n: u64, f: F) -> Vec<T>
where
    F: Fn(u64) -> T,
{
    (0..n).map(f).collect()
}

/// Runs `job` on a pool of `jobs` threads (0 = rayon default). Without the
/// `parallel` feature the job runs on the caller's thread.
pub fn with_jobs<T: Send>(jobs: usize, job: impl FnOnce() -> T + Send) -> T {
    #[cfg(feature = "parallel")]
    {
        match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            Ok(pool) => pool.install(job),
            Err(err) => {
                log::warn!("falling back to the global pool: {err}");
                job()
            }
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
        job()
    }
}
