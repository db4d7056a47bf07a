//! The tamed Euler–Maruyama recursion
//! `X_{j+1} = X_j + [∫_{t_j}^{t_{j+1}} bⁿ(r, X_j) dr]_m + σ(t_j, X_j) ΔB_j`,
//! its level-coupled variant and path utilities.

mod brownian;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use brownian::BrownianPath;

use crate::error::{Error, Result};
use crate::fields::{DiffusionField, DriftField, VectorField};
use crate::quadrature::trapezoid_weights;
use crate::rng::CounterRng;
use crate::taming::{TameOptions, TamedDrift, TamingStrategy};

/// Stream label for initial-condition draws.
const X0_LABEL: u64 = 0x7830;

/// Initial condition `x₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialCondition {
    Point {
        x: Vec<f64>,
    },
    /// Independent `N(mean_i, std²)` components.
    Gaussian {
        mean: Vec<f64>,
        std: f64,
    },
}

impl InitialCondition {
    pub fn dim(&self) -> usize {
        match self {
            InitialCondition::Point { x } => x.len(),
            InitialCondition::Gaussian { mean, .. } => mean.len(),
        }
    }

    /// The realization for path `path_index`, drawn from its own substream.
    pub fn sample(&self, master_seed: u64, path_index: u64) -> Vec<f64> {
        match self {
            InitialCondition::Point { x } => x.clone(),
            InitialCondition::Gaussian { mean, std } => {
                let rng = CounterRng::new(master_seed, path_index).substream(X0_LABEL);
                mean.iter().enumerate().map(|(c, m)| m + std * rng.normal(c as u64)).collect()
            }
        }
    }
}

/// Drift used by the scheme: a fixed field, or a field tamed per level.
#[derive(Debug, Clone)]
pub enum DriftModel {
    Plain(DriftField),
    Tamed {
        base: DriftField,
        strategy: TamingStrategy,
        options: TameOptions,
    },
}

impl DriftModel {
    pub fn dim(&self) -> usize {
        match self {
            DriftModel::Plain(b) | DriftModel::Tamed { base: b, .. } => b.dim(),
        }
    }

    pub fn base(&self) -> &DriftField {
        match self {
            DriftModel::Plain(b) | DriftModel::Tamed { base: b, .. } => b,
        }
    }

    /// The drift the scheme uses at step count `n`.
    pub fn at_level(&self, n: usize) -> Result<Arc<dyn VectorField>> {
        Ok(match self {
            DriftModel::Plain(b) => Arc::new(b.clone()),
            DriftModel::Tamed { base, strategy, options } => Arc::new(TamedDrift::new(base.clone(), *strategy, n, options)?),
        })
    }
}

#[derive(Debug, Clone)]
pub struct SchemeConfig {
    pub n: usize,
    pub x0: InitialCondition,
    pub drift: DriftModel,
    pub diffusion: DiffusionField,
    /// Time-quadrature nodes per cell for the drift integral; 1 means left point.
    pub quadrature_nodes: usize,
}

impl SchemeConfig {
    pub fn new(n: usize, x0: InitialCondition, drift: DriftModel, diffusion: DiffusionField) -> Self {
        Self {
            n,
            x0,
            drift,
            diffusion,
            quadrature_nodes: 1,
        }
    }

    pub fn dim(&self) -> usize {
        self.drift.dim()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        if self.quadrature_nodes == 0 {
            return Err(Error::InvalidArgument("quadrature nodes m must be at least 1".into()));
        }
        let d = self.dim();
        for got in [self.diffusion.dim(), self.x0.dim()] {
            if got != d {
                return Err(Error::DimensionMismatch { expected: d, got });
            }
        }
        Ok(())
    }

    /// Prepares the scheme at step count `n` (tames the drift if needed).
    pub fn prepare(&self, n: usize) -> Result<LevelScheme> {
        self.validate()?;
        if n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        Ok(LevelScheme {
            n,
            drift: self.drift.at_level(n)?,
            diffusion: self.diffusion.clone(),
            m: self.quadrature_nodes,
            x0: self.x0.clone(),
        })
    }
}

/// Values of `Xⁿ` on the grid `D_n`, optionally also on a finer output grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    n: usize,
    d: usize,
    values: Vec<f64>,
    fine: Option<(usize, Vec<f64>)>,
}

impl PathResult {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `X` at `j/n`.
    pub fn at(&self, j: usize) -> &[f64] {
        &self.values[j * self.d..(j + 1) * self.d]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn terminal(&self) -> &[f64] {
        self.at(self.n)
    }

    /// Frozen-coefficient interpolation on the Brownian grid, when requested.
    pub fn fine(&self) -> Option<(usize, &[f64])> {
        self.fine.as_ref().map(|(n, v)| (*n, v.as_slice()))
    }
}

/// A scheme prepared at one step count.
#[derive(Clone)]
pub struct LevelScheme {
    n: usize,
    drift: Arc<dyn VectorField>,
    diffusion: DiffusionField,
    m: usize,
    x0: InitialCondition,
}

impl LevelScheme {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn drift(&self) -> &Arc<dyn VectorField> {
        &self.drift
    }

    /// Runs the recursion; `brownian` may be finer than `n` and is aggregated.
    pub fn simulate(&self, brownian: &BrownianPath) -> Result<PathResult> {
        self.run(brownian, false)
    }

    /// As [`simulate`](Self::simulate), also returning the frozen-coefficient
    /// path on the Brownian grid: within a cell the drift integral grows
    /// linearly and the noise follows the fine increments.
    pub fn simulate_with_fine_output(&self, brownian: &BrownianPath) -> Result<PathResult> {
        self.run(brownian, true)
    }

    fn run(&self, brownian: &BrownianPath, fine_output: bool) -> Result<PathResult> {
        let d = self.drift.dim();
        if brownian.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: brownian.dim(),
            });
        }
        let n = self.n;
        let coarse = brownian.aggregate(n)?;
        let ratio = brownian.n() / n;
        let h = 1.0 / n as f64;
        let x0 = self.x0.sample(brownian.master_seed(), brownian.path_index());
        let mut values = vec![0.0; (n + 1) * d];
        values[..d].copy_from_slice(&x0);
        let mut fine = fine_output.then(|| {
            let mut v = vec![0.0; (brownian.n() + 1) * d];
            v[..d].copy_from_slice(&x0);
            v
        });

        let time_nodes = if self.drift.time_independent() { 1 } else { self.m };
        let weights = if time_nodes == 1 {
            vec![h]
        } else {
            trapezoid_weights(time_nodes, h / (time_nodes - 1) as f64)
        };
        let mut drift = vec![0.0; d];
        let mut buf = vec![0.0; d];
        let mut sigma = vec![0.0; d * d];
        let mut x = x0;
        for j in 0..n {
            let t = j as f64 * h;
            drift.fill(0.0);
            for (k, w) in weights.iter().enumerate() {
                let r = if time_nodes == 1 {
                    t
                } else {
                    t + k as f64 * h / (time_nodes - 1) as f64
                };
                self.drift.eval(r, &x, &mut buf);
                for (a, b) in drift.iter_mut().zip(&buf) {
                    *a += w * b;
                }
            }
            self.diffusion.eval(t, &x, &mut sigma);
            if let Some(fine) = fine.as_mut() {
                let mut noise = vec![0.0; d];
                for k in 0..ratio {
                    let db = brownian.increment(j * ratio + k);
                    for (row, nz) in noise.iter_mut().enumerate() {
                        *nz += (0..d).map(|c| sigma[row * d + c] * db[c]).sum::<f64>();
                    }
                    let frac = (k + 1) as f64 / ratio as f64;
                    let idx = j * ratio + k + 1;
                    for c in 0..d {
                        fine[idx * d + c] = x[c] + frac * drift[c] + noise[c];
                    }
                }
            }
            let db = coarse.increment(j);
            for row in 0..d {
                let noise: f64 = (0..d).map(|c| sigma[row * d + c] * db[c]).sum();
                x[row] += drift[row] + noise;
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteState {
                    step: j + 1,
                    n,
                    t: (j + 1) as f64 * h,
                });
            }
            values[(j + 1) * d..(j + 2) * d].copy_from_slice(&x);
            if let Some(fine) = fine.as_mut() {
                // Pin grid points to the coarse recursion exactly.
                let idx = (j + 1) * ratio;
                fine[idx * d..(idx + 1) * d].copy_from_slice(&x);
            }
        }
        Ok(PathResult {
            n,
            d,
            values,
            fine: fine.map(|v| (brownian.n(), v)),
        })
    }
}

/// Runs the scheme at `config.n` on the given Brownian path.
pub fn simulate_tamed_em(config: &SchemeConfig, brownian: &BrownianPath) -> Result<PathResult> {
    config.prepare(config.n)?.simulate(brownian)
}

/// Level schemes sharing one Brownian path at the reference resolution.
#[derive(Clone)]
pub struct CoupledScheme {
    n_ref: usize,
    levels: Vec<LevelScheme>,
}

impl CoupledScheme {
    /// Prepares every level in `n_list` plus `n_ref`; each must divide `n_ref`.
    pub fn new(config: &SchemeConfig, n_list: &[usize], n_ref: usize) -> Result<Self> {
        let mut ns: Vec<usize> = n_list.to_vec();
        ns.push(n_ref);
        ns.sort_unstable();
        ns.dedup();
        for &n in &ns {
            if n == 0 || !n_ref.is_multiple_of(n) {
                return Err(Error::InvalidArgument(format!(
                    "level {n} does not divide the reference level {n_ref}"
                )));
            }
        }
        let levels = ns.iter().map(|&n| config.prepare(n)).collect::<Result<Vec<_>>>()?;
        Ok(Self { n_ref, levels })
    }

    pub fn n_ref(&self) -> usize {
        self.n_ref
    }

    pub fn level_ns(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.n).collect()
    }

    pub fn simulate(&self, brownian: &BrownianPath) -> Result<BTreeMap<usize, PathResult>> {
        if brownian.n() != self.n_ref {
            return Err(Error::InvalidArgument(format!(
                "Brownian path has {} steps, reference level is {}",
                brownian.n(),
                self.n_ref
            )));
        }
        self.levels
            .iter()
            .map(|level| {
                level.simulate(brownian).map(|p| (level.n, p)).map_err(|e| Error::PathFailed {
                    master_seed: brownian.master_seed(),
                    path_index: brownian.path_index(),
                    level: level.n,
                    source: Box::new(e),
                })
            })
            .collect()
    }
}

/// All levels in `n_list` and `n_ref` driven by the same Brownian path.
pub fn simulate_coupled(
    config: &SchemeConfig,
    n_list: &[usize],
    n_ref: usize,
    brownian: &BrownianPath,
) -> Result<BTreeMap<usize, PathResult>> {
    CoupledScheme::new(config, n_list, n_ref)?.simulate(brownian)
}

/// `max_j |a(t_j) − b(t_j)|` over the coarser of the two grids.
pub fn sup_distance(a: &PathResult, b: &PathResult) -> Result<f64> {
    if a.d != b.d {
        return Err(Error::DimensionMismatch { expected: a.d, got: b.d });
    }
    let (coarse, fine) = if a.n <= b.n { (a, b) } else { (b, a) };
    if fine.n % coarse.n != 0 {
        return Err(Error::InvalidArgument(format!(
            "grids with {} and {} steps are not nested",
            coarse.n, fine.n
        )));
    }
    let ratio = fine.n / coarse.n;
    Ok((0..=coarse.n)
        .map(|j| {
            coarse
                .at(j)
                .iter()
                .zip(fine.at(j * ratio))
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max))
}
