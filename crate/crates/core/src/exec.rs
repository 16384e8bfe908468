//! Deterministic task execution.
//!
//! Work is always split into a fixed number of tasks whose boundaries depend
//! only on the problem size, never on the worker count. Reductions happen in
//! task order, so any executor that preserves result order yields identical
//! bits.

use alloc::vec::Vec;

/// Runs independent tasks and returns their results in task order.
pub trait Executor: Sync {
    /// Number of worker threads (informational).
    fn workers(&self) -> usize;

    /// Evaluates `f(0..tasks)` and returns the results in index order.
    fn map<T, F>(&self, tasks: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync;
}

/// Single-threaded executor.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn workers(&self) -> usize {
        1
    }

    fn map<T, F>(&self, tasks: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        (0..tasks).map(f).collect()
    }
}
