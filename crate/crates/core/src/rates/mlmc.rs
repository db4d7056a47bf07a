//! Multilevel Monte Carlo for `E g(X_1)` with levels `n_ℓ = n₀ 2^ℓ`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::parallel::{pairwise_mean, Workers};
use crate::rng::derive_key;
use crate::scheme::{BrownianPath, SchemeConfig};

#[derive(Debug, Clone)]
pub struct MlmcConfig {
    pub n0: usize,
    /// Paths per level; its length is the number of levels.
    pub paths_per_level: Vec<usize>,
    pub master_seed: u64,
    pub workers: Workers,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MlmcLevel {
    pub level: usize,
    pub n: usize,
    pub paths: usize,
    /// Mean of the level correction (of `g(X^{n₀})` at level 0).
    pub mean: f64,
    pub variance: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MlmcReport {
    pub estimate: f64,
    pub stderr: f64,
    pub levels: Vec<MlmcLevel>,
    /// Log–log slope of `V_ℓ` against `n_ℓ` over levels `ℓ ≥ 1` with `V_ℓ > 0`.
    pub variance_slope: Option<f64>,
    /// `Σ M_ℓ (n_ℓ + n_{ℓ−1})` scheme steps.
    pub total_cost: f64,
}

/// Telescoping estimator `Σ_ℓ mean(g(X^{n_ℓ}) − g(X^{n_{ℓ−1}}))`; each level
/// uses its own stream family derived from the master seed and the level,
/// and each correction shares one Brownian path between its two grids.
pub fn mlmc_estimate<G>(config: &SchemeConfig, mc: &MlmcConfig, payoff: G) -> Result<MlmcReport>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    config.validate()?;
    if mc.n0 == 0 || mc.paths_per_level.is_empty() || mc.paths_per_level.iter().any(|&m| m < 2) {
        return Err(Error::InvalidArgument(
            "MLMC needs n0 >= 1, at least one level and at least 2 paths per level".into(),
        ));
    }
    let d = config.dim();
    let mut levels = Vec::with_capacity(mc.paths_per_level.len());
    for (l, &m) in mc.paths_per_level.iter().enumerate() {
        let n = mc.n0 << l;
        let fine = config.prepare(n)?;
        let coarse = if l > 0 { Some(config.prepare(n / 2)?) } else { None };
        let seed = derive_key(mc.master_seed, l as u64);
        let samples = mc.workers.map(m, |i| {
            let w = BrownianPath::generate(seed, i as u64, d, n);
            let fail = |level: usize| {
                move |e| Error::PathFailed {
                    master_seed: seed,
                    path_index: i as u64,
                    level,
                    source: Box::new(e),
                }
            };
            let pf = fine.simulate(&w).map_err(fail(n))?;
            let mut y = payoff(pf.terminal());
            if let Some(c) = &coarse {
                let pc = c.simulate(&w).map_err(fail(n / 2))?;
                y -= payoff(pc.terminal());
            }
            Ok(y)
        })?;
        let mean = pairwise_mean(&samples);
        let dev: Vec<f64> = samples.iter().map(|y| (y - mean).powi(2)).collect();
        let variance = pairwise_mean(&dev) * m as f64 / (m - 1) as f64;
        let cost = m as f64 * (n + if l > 0 { n / 2 } else { 0 }) as f64;
        levels.push(MlmcLevel {
            level: l,
            n,
            paths: m,
            mean,
            variance,
            cost,
        });
    }
    let estimate = levels.iter().map(|l| l.mean).sum();
    let stderr = levels.iter().map(|l| l.variance / l.paths as f64).sum::<f64>().sqrt();
    let total_cost = levels.iter().map(|l| l.cost).sum();
    let pts: Vec<(f64, f64)> = levels
        .iter()
        .skip(1)
        .filter(|l| l.variance > 0.0)
        .map(|l| ((l.n as f64).ln(), l.variance.ln()))
        .collect();
    let variance_slope = (pts.len() >= 2).then(|| {
        let k = pts.len() as f64;
        let xm = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let ym = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - xm).powi(2)).sum();
        sxy / sxx
    });
    Ok(MlmcReport {
        estimate,
        stderr,
        levels,
        variance_slope,
        total_cost,
    })
}
