//! Execution of independent jobs (fold trainings, eval cells).
//!
//! The core never spawns threads itself. Callers with `std` can supply a
//! parallel runner; results are always returned in job-index order so the
//! choice of runner never changes an outcome.

use alloc::vec::Vec;

pub trait JobRunner {
    fn run<T, F>(&self, jobs: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs jobs one after another on the calling thread.
#[derive(Debug, Default, Clone, Copy)]
pub struct Sequential;

impl JobRunner for Sequential {
    fn run<T, F>(&self, jobs: usize, job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..jobs).map(job).collect()
    }
}
