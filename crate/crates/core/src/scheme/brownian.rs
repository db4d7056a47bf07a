//! Reproducible Brownian increments with exact level coupling.

use crate::error::{Error, Result};
use crate::rng::CounterRng;

/// Gaussian increments of a `d`-dimensional Brownian motion on the uniform
/// grid of `[0, 1]` with `n_fine` steps. Row `j` holds `B_{(j+1)/n} − B_{j/n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    d: usize,
    n_fine: usize,
    increments: Vec<f64>,
    master_seed: u64,
    path_index: u64,
}

impl BrownianPath {
    /// Increment `(j, c)` is the counter-`j·d + c` normal of the stream
    /// `(master_seed, path_index)`, scaled by `n_fine^{-1/2}`.
    pub fn generate(master_seed: u64, path_index: u64, d: usize, n_fine: usize) -> Self {
        let rng = CounterRng::new(master_seed, path_index);
        Self::from_rng(&rng, master_seed, path_index, d, n_fine)
    }

    pub(crate) fn from_rng(rng: &CounterRng, master_seed: u64, path_index: u64, d: usize, n_fine: usize) -> Self {
        let scale = (n_fine as f64).sqrt().recip();
        let increments = (0..(n_fine * d) as u64).map(|c| rng.normal(c) * scale).collect();
        Self {
            d,
            n_fine,
            increments,
            master_seed,
            path_index,
        }
    }

    /// Wraps user-provided increments (row-major, `n·d` values).
    pub fn from_increments(d: usize, increments: Vec<f64>) -> Result<Self> {
        if d == 0 || increments.is_empty() || !increments.len().is_multiple_of(d) {
            return Err(Error::InvalidArgument(format!(
                "{} increments do not form whole rows of dimension {d}",
                increments.len()
            )));
        }
        Ok(Self {
            d,
            n_fine: increments.len() / d,
            increments,
            master_seed: 0,
            path_index: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n_fine
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path_index(&self) -> u64 {
        self.path_index
    }

    pub fn increment(&self, step: usize) -> &[f64] {
        &self.increments[step * self.d..(step + 1) * self.d]
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// `B` at grid points `0, 1/n, …, 1`, row-major.
    pub fn values(&self) -> Vec<f64> {
        let mut out = vec![0.0; (self.n_fine + 1) * self.d];
        for j in 0..self.n_fine {
            for c in 0..self.d {
                out[(j + 1) * self.d + c] = out[j * self.d + c] + self.increments[j * self.d + c];
            }
        }
        out
    }

    /// Increments on the coarser grid with `n_coarse` steps, each the ordered
    /// sum of its `n_fine / n_coarse` fine increments.
    pub fn aggregate(&self, n_coarse: usize) -> Result<Self> {
        if n_coarse == 0 || !self.n_fine.is_multiple_of(n_coarse) {
            return Err(Error::InvalidArgument(format!(
                "level {n_coarse} does not divide the Brownian resolution {}",
                self.n_fine
            )));
        }
        if n_coarse == self.n_fine {
            return Ok(self.clone());
        }
        let ratio = self.n_fine / n_coarse;
        let d = self.d;
        let mut increments = vec![0.0; n_coarse * d];
        for j in 0..n_coarse {
            for k in 0..ratio {
                let fine = &self.increments[(j * ratio + k) * d..(j * ratio + k + 1) * d];
                for (acc, v) in increments[j * d..(j + 1) * d].iter_mut().zip(fine) {
                    *acc += v;
                }
            }
        }
        Ok(Self {
            d,
            n_fine: n_coarse,
            increments,
            master_seed: self.master_seed,
            path_index: self.path_index,
        })
    }
}
