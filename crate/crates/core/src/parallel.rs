//! Worker pools and order-fixed reductions.
//!
//! Work functions are evaluated per index and collected in index order, so
//! every reduction sees the same sequence regardless of the worker count.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Number of worker threads used for path-level parallelism.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Workers(pub usize);

impl Default for Workers {
    fn default() -> Self {
        Workers(1)
    }
}

impl Workers {
    /// Evaluates `f(i)` for `i in 0..count` and returns results in index order.
    pub fn map<T, F>(&self, count: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync + Send,
    {
        if self.0 <= 1 {
            return (0..count).map(f).collect();
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.0)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot build worker pool: {e}")))?;
        pool.install(|| (0..count).into_par_iter().map(f).collect())
    }
}

/// Pairwise (cascade) summation in a fixed order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 8;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn pairwise_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    pairwise_sum(values) / values.len() as f64
}

/// Mean and standard error from `batches` contiguous batch means.
pub fn batch_means(values: &[f64], batches: usize) -> (f64, f64) {
    let mean = pairwise_mean(values);
    let b = batches.min(values.len());
    if b < 2 {
        return (mean, 0.0);
    }
    let size = values.len() / b;
    let means: Vec<f64> = (0..b)
        .map(|k| {
            let end = if k + 1 == b { values.len() } else { (k + 1) * size };
            pairwise_mean(&values[k * size..end])
        })
        .collect();
    let bm = pairwise_mean(&means);
    let var: Vec<f64> = means.iter().map(|m| (m - bm) * (m - bm)).collect();
    let var = pairwise_sum(&var) / (b - 1) as f64;
    (mean, (var / b as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let v: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 500_500.0);
    }

    #[test]
    fn map_is_independent_of_worker_count() {
        let f = |i: usize| Ok((i as f64).sqrt().sin());
        let a = Workers(1).map(1000, f).unwrap();
        let b = Workers(4).map(1000, f).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn batch_means_of_constant_has_zero_error() {
        let v = vec![3.0; 100];
        assert_eq!(batch_means(&v, 10), (3.0, 0.0));
    }
}
