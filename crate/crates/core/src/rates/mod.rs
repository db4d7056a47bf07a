//! Monte Carlo strong-error tables, rate fitting and a multilevel estimator.

mod fit;
mod mlmc;
mod oracles;

use std::sync::Arc;

use serde::Serialize;

pub use fit::{fit_rate, weights_from_stderr, RateFit};
pub use mlmc::{mlmc_estimate, MlmcConfig, MlmcLevel, MlmcReport};
pub use oracles::{DriftedBrownian, ExactSolution, GeometricBrownian, LinearOde};

use crate::error::{Error, Result};
use crate::parallel::{batch_means, Workers};
use crate::rng::mix64;
use crate::scheme::{sup_distance, BrownianPath, CoupledScheme, LevelScheme, SchemeConfig};
use crate::taming::PredictedRate;

/// Default number of batches for batch-means standard errors.
pub const DEFAULT_BATCHES: usize = 10;
/// Smallest accepted path count.
pub const MIN_PATHS: usize = 100;

/// What the level paths are compared against.
#[derive(Clone)]
pub enum Reference {
    /// The same scheme at `n_ref`, driven by the same Brownian path.
    SelfConvergence { n_ref: usize },
    /// A closed-form strong solution evaluated on the Brownian path.
    Exact(Arc<dyn ExactSolution>),
}

impl Reference {
    pub fn describe(&self) -> String {
        match self {
            Reference::SelfConvergence { n_ref } => format!("self-convergence (n_ref = {n_ref})"),
            Reference::Exact(s) => format!("exact ({})", s.name()),
        }
    }
}

#[derive(Clone)]
pub struct RateConfig {
    /// Strictly increasing step counts.
    pub levels: Vec<usize>,
    pub reference: Reference,
    pub paths: usize,
    pub p_bar: f64,
    pub master_seed: u64,
    pub workers: Workers,
    pub batches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelError {
    pub n: usize,
    /// `(E sup_t |Xⁿ − X^{ref}|^{p̄})^{1/p̄}`.
    pub error: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub levels: Vec<LevelError>,
    pub fit: Option<RateFit>,
    pub predicted: Option<PredictedRate>,
    pub reference: String,
    pub p_bar: f64,
    pub paths: usize,
    pub master_seed: u64,
    /// Order-sensitive hash of every per-path error, for reproducibility checks.
    pub digest: u64,
    pub notes: Vec<String>,
}

impl RateReport {
    pub fn errors(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.error).collect()
    }

    /// True when each error is at most the previous one plus two pooled
    /// standard errors.
    pub fn is_monotone(&self) -> bool {
        self.levels.windows(2).all(|w| {
            let pooled = (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
            w[1].error <= w[0].error + 2.0 * pooled
        })
    }
}

/// `(mean vᵖ)^{1/p}` and its delta-method standard error from batch means.
pub fn lp_estimate(values: &[f64], p_bar: f64, batches: usize) -> (f64, f64) {
    let powers: Vec<f64> = values.iter().map(|v| v.abs().powf(p_bar)).collect();
    let (mean, se) = batch_means(&powers, batches);
    if mean <= 0.0 {
        return (0.0, 0.0);
    }
    let est = mean.powf(1.0 / p_bar);
    (est, est / (p_bar * mean) * se)
}

fn validate(rc: &RateConfig) -> Result<()> {
    if rc.levels.is_empty() || rc.levels.windows(2).any(|w| w[0] >= w[1]) || rc.levels[0] == 0 {
        return Err(Error::InvalidArgument(format!(
            "levels must be positive and strictly increasing, got {:?}",
            rc.levels
        )));
    }
    if rc.paths < MIN_PATHS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_PATHS} paths, got {}",
            rc.paths
        )));
    }
    if !(rc.p_bar >= 1.0 && rc.p_bar.is_finite()) {
        return Err(Error::Domain(format!("moment order p_bar = {} must be >= 1", rc.p_bar)));
    }
    Ok(())
}

enum Prepared {
    Coupled(CoupledScheme),
    Exact {
        levels: Vec<LevelScheme>,
        n_fine: usize,
        solution: Arc<dyn ExactSolution>,
    },
}

/// Per-path sup errors, one entry per level.
fn path_errors(prepared: &Prepared, config: &SchemeConfig, rc: &RateConfig, d: usize, index: usize) -> Result<Vec<f64>> {
    let seed = rc.master_seed;
    match prepared {
        Prepared::Coupled(coupled) => {
            let w = BrownianPath::generate(seed, index as u64, d, coupled.n_ref());
            let paths = coupled.simulate(&w)?;
            let reference = &paths[&coupled.n_ref()];
            rc.levels.iter().map(|n| sup_distance(&paths[n], reference)).collect()
        }
        Prepared::Exact {
            levels,
            n_fine,
            solution,
        } => {
            let w = BrownianPath::generate(seed, index as u64, d, *n_fine);
            let b = w.values();
            let x0 = config.x0.sample(seed, index as u64);
            let mut exact = vec![0.0; d];
            levels
                .iter()
                .map(|level| {
                    let n = level.n();
                    let path = level.simulate(&w).map_err(|e| Error::PathFailed {
                        master_seed: seed,
                        path_index: index as u64,
                        level: n,
                        source: Box::new(e),
                    })?;
                    let ratio = n_fine / n;
                    let mut worst = 0.0f64;
                    for j in 0..=n {
                        let k = j * ratio;
                        solution.value(j as f64 / n as f64, &x0, &b[k * d..(k + 1) * d], &mut exact);
                        let dist = path
                            .at(j)
                            .iter()
                            .zip(&exact)
                            .map(|(a, e)| (a - e) * (a - e))
                            .sum::<f64>()
                            .sqrt();
                        worst = worst.max(dist);
                    }
                    Ok(worst)
                })
                .collect()
        }
    }
}

/// Strong-error table `‖sup_t |Xⁿ_t − X_t|‖_{L_{p̄}(Ω)}` over the levels,
/// with a log–log fit when at least three levels have positive errors.
pub fn strong_error(config: &SchemeConfig, rc: &RateConfig) -> Result<RateReport> {
    validate(rc)?;
    config.validate()?;
    let d = config.dim();
    let max_level = *rc.levels.last().expect("validated nonempty");
    let mut notes = Vec::new();
    let prepared = match &rc.reference {
        Reference::SelfConvergence { n_ref } => {
            if *n_ref < 16 * max_level {
                log::warn!("n_ref = {n_ref} is below 16 x the finest level {max_level}");
                notes.push(format!("n_ref = {n_ref} is below 16 x the finest level"));
            }
            notes.push("errors are measured against the scheme at n_ref and include its bias".into());
            Prepared::Coupled(CoupledScheme::new(config, &rc.levels, *n_ref)?)
        }
        Reference::Exact(solution) => {
            if solution.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: solution.dim(),
                });
            }
            if let Some(&bad) = rc.levels.iter().find(|&&n| !max_level.is_multiple_of(n)) {
                return Err(Error::InvalidArgument(format!("level {bad} does not divide {max_level}")));
            }
            let levels = rc.levels.iter().map(|&n| config.prepare(n)).collect::<Result<Vec<_>>>()?;
            Prepared::Exact {
                levels,
                n_fine: max_level,
                solution: solution.clone(),
            }
        }
    };
    let per_path = rc.workers.map(rc.paths, |i| path_errors(&prepared, config, rc, d, i))?;

    let mut digest = mix64(rc.master_seed);
    for row in &per_path {
        for v in row {
            digest = mix64(digest ^ v.to_bits());
        }
    }
    let levels: Vec<LevelError> = rc
        .levels
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let column: Vec<f64> = per_path.iter().map(|row| row[k]).collect();
            let (error, stderr) = lp_estimate(&column, rc.p_bar, rc.batches);
            LevelError { n, error, stderr }
        })
        .collect();
    let ns: Vec<usize> = levels.iter().map(|l| l.n).collect();
    let errs: Vec<f64> = levels.iter().map(|l| l.error).collect();
    let fit = if errs.iter().filter(|e| **e > 0.0).count() >= 3 {
        Some(fit_rate(&ns, &errs, None)?)
    } else {
        None
    };
    Ok(RateReport {
        levels,
        fit,
        predicted: None,
        reference: rc.reference.describe(),
        p_bar: rc.p_bar,
        paths: rc.paths,
        master_seed: rc.master_seed,
        digest,
        notes,
    })
}
