use rayon::prelude::*;
use zonalopt_core::admm::Executor;

/// Zone solves on the rayon pool. Results keep zone order.
#[derive(Debug, Clone, Copy, Default)]
pub struct Rayon;

impl Executor for Rayon {
    fn map<R: Send, F: Fn(usize) -> R + Sync>(&self, n: usize, f: F) -> Vec<R> {
        (0..n).into_par_iter().map(|i| f(i)).collect()
    }
}
