//! Worker-count control for the data-parallel stages.

use rayon::{ThreadPool, ThreadPoolBuilder};

/// Builds a dedicated pool. `0` lets rayon pick (one worker per logical CPU).
pub fn pool(workers: usize) -> ThreadPool {
    ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("failed to spawn rayon worker threads")
}

/// Runs `f` inside a fresh pool of `workers` threads.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    pool(workers).install(f)
}

/// Logical CPUs available to this process.
pub fn available_cores() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
