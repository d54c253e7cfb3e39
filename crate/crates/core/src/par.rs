//! Optional data parallelism over evaluation points.
//!
//! `CURVEFLOW_THREADS` caps the worker count; `0` selects serial mode.
//! Each parallel task computes one output entry with a serial inner sum,
//! so parallel and serial results are bit-identical.

use std::sync::OnceLock;

use rayon::prelude::*;
use rayon::ThreadPool;

pub const THREADS_ENV: &str = "CURVEFLOW_THREADS";

/// Work below this many pair interactions is always done serially.
const PARALLEL_MIN_WORK: usize = 1 << 14;

fn pool() -> Option<&'static ThreadPool> {
    static POOL: OnceLock<Option<ThreadPool>> = OnceLock::new();
    POOL.get_or_init(|| {
        let threads = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok());
        match threads {
            Some(0) => None,
            Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build().ok(),
            None => rayon::ThreadPoolBuilder::new().build().ok(),
        }
    })
    .as_ref()
}

/// `(0..n).map(f)` in parallel when `work` is large enough and threads are enabled.
pub fn map_indexed<T, F>(n: usize, work: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match pool() {
        Some(pool) if work >= PARALLEL_MIN_WORK && n > 1 => {
            pool.install(|| (0..n).into_par_iter().map(&f).collect())
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Worker count in use; 0 means serial mode.
pub fn thread_count() -> usize {
    pool().map_or(0, ThreadPool::current_num_threads)
}
