//! Worker-pool plumbing for the data-parallel inner loops.

/// Runs `f` inside a pool of `jobs` worker threads.
///
/// With `jobs <= 1`, or when the `parallel` feature is disabled, `f` runs on
/// the calling thread and no pool is created. Results never depend on the job
/// count; this only pins how many threads the batch evaluators may use.
pub fn with_jobs<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("failed to build worker pool");
        return pool.install(f);
    }
    let _ = jobs;
    f()
}

/// Effective parallelism for a requested job count under the current build.
pub fn effective_jobs(jobs: usize) -> usize {
    if cfg!(feature = "parallel") {
        jobs.max(1)
    } else {
        1
    }
}
