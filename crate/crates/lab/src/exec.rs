//! Thread-pool executor. Tasks are fixed by the caller, so the worker count
//! never changes the results.

use henkin_core::exec::Executor;
use rayon::prelude::*;

pub struct PoolExecutor {
    pool: rayon::ThreadPool,
    workers: usize,
}

impl PoolExecutor {
    pub fn new(workers: usize) -> Result<Self, String> {
        let workers = workers.max(1);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| e.to_string())?;
        Ok(PoolExecutor { pool, workers })
    }
}

impl Executor for PoolExecutor {
    fn workers(&self) -> usize {
        self.workers
    }

    fn map<T, F>(&self, tasks: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        self.pool
            .install(|| (0..tasks).into_par_iter().map(&f).collect())
    }
}
