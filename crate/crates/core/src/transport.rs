//! Stochastic transport `∂_t u + b·∇u + ∇u ∘ dW = 0`, `u(0) = ρ`, solved by
//! `uⁿ(τ, x) = ρ(X^{τ,n}_τ(x))` along time-reversed tamed characteristics
//! `X^{τ,n}_s = x − ∫_0^s b^{τ,n}(r, X_{k_n(r)}) dr + W^τ_s`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::VectorField;
use crate::parallel::Workers;
use crate::quadrature::trapezoid_weights;
use crate::rates::lp_estimate;
use crate::rng::derive_key;
use crate::scheme::{BrownianPath, DriftModel};

/// Label deriving the seed of the independent extension beyond `τ`.
const EXTENSION_LABEL: u64 = 0x5754_6175;
const GRID_TOL: f64 = 1e-9;

/// `b^{τ,n}(r, x) = bⁿ(τ − r, x)` for `r ∈ [0, τ]`, zero otherwise.
pub struct ReversedDrift {
    inner: Arc<dyn VectorField>,
    tau: f64,
}

impl ReversedDrift {
    pub fn tau(&self) -> f64 {
        self.tau
    }
}

impl VectorField for ReversedDrift {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn out_dim(&self) -> usize {
        self.inner.out_dim()
    }

    fn eval(&self, r: f64, x: &[f64], out: &mut [f64]) {
        let s = self.tau - r;
        if (0.0..=self.tau).contains(&r) && (0.0..=1.0).contains(&s) {
            self.inner.eval(s, x, out);
        } else {
            out.fill(0.0);
        }
    }

    fn singular_points(&self) -> &[Vec<f64>] {
        self.inner.singular_points()
    }
}

pub fn reverse_drift(bn: Arc<dyn VectorField>, tau: f64) -> Result<ReversedDrift> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::Domain(format!("tau = {tau} must lie in (0, 1]")));
    }
    Ok(ReversedDrift { inner: bn, tau })
}

/// Index `k` with `τ = k/n`, or an error when `τ` is off the grid.
pub fn grid_index(tau: f64, n: usize) -> Result<usize> {
    let k = (tau * n as f64).round();
    if !(tau > 0.0 && tau <= 1.0) || (k - tau * n as f64).abs() > GRID_TOL * n as f64 || k < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "tau = {tau} is not a positive point of the grid 1/{n}"
        )));
    }
    Ok(k as usize)
}

/// `W^τ`: reversed increments of `W` on `[0, τ]`, then independent
/// increments from a derived seed on `(τ, 1]`.
pub fn reversed_brownian(w: &BrownianPath, tau: f64) -> Result<BrownianPath> {
    let n = w.n();
    let d = w.dim();
    let k = grid_index(tau, n)?;
    let mut incs = Vec::with_capacity(n * d);
    for j in 0..k {
        incs.extend_from_slice(w.increment(k - 1 - j));
    }
    if k < n {
        let ext = BrownianPath::generate(derive_key(w.master_seed(), EXTENSION_LABEL), w.path_index(), d, n);
        incs.extend_from_slice(&ext.increments()[k * d..]);
    }
    BrownianPath::from_increments(d, incs)
}

/// Initial datum `ρ` with its gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialDatum {
    Constant {
        value: f64,
    },
    /// `exp(−|x − center|² / (2 width²))`.
    Gaussian {
        center: Vec<f64>,
        width: f64,
    },
}

impl InitialDatum {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            InitialDatum::Constant { value } => *value,
            InitialDatum::Gaussian { center, width } => {
                let r2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                (-r2 / (2.0 * width * width)).exp()
            }
        }
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        match self {
            InitialDatum::Constant { .. } => out.fill(0.0),
            InitialDatum::Gaussian { center, width } => {
                let v = self.value(x);
                for ((o, a), c) in out.iter_mut().zip(x).zip(center) {
                    *o = -(a - c) / (width * width) * v;
                }
            }
        }
    }

    fn check(&self, d: usize) -> Result<()> {
        if let InitialDatum::Gaussian { center, width } = self {
            if center.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: center.len(),
                });
            }
            if !(*width > 0.0) {
                return Err(Error::Domain(format!("Gaussian width {width} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TransportProblem {
    pub drift: DriftModel,
    pub rho: InitialDatum,
    pub taus: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    /// Time-quadrature nodes per cell for the drift integral.
    pub quadrature_nodes: usize,
}

impl TransportProblem {
    pub fn dim(&self) -> usize {
        self.drift.dim()
    }

    fn validate(&self) -> Result<()> {
        let d = self.dim();
        self.rho.check(d)?;
        if self.taus.is_empty() || self.points.is_empty() {
            return Err(Error::InvalidArgument("evaluation set is empty".into()));
        }
        if let Some(p) = self.points.iter().find(|p| p.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: p.len(),
            });
        }
        if self.quadrature_nodes == 0 {
            return Err(Error::InvalidArgument("quadrature nodes m must be at least 1".into()));
        }
        let mut grad = vec![0.0; d];
        for x in &self.points {
            self.rho.gradient(x, &mut grad);
            if !self.rho.value(x).is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteSamples {
                    count: 1,
                    first: x.clone(),
                });
            }
        }
        Ok(())
    }
}

/// Monte Carlo setup shared by the scheme and its oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportRun {
    pub paths: usize,
    pub master_seed: u64,
    /// Resolution of the driving `W`; every level must divide it.
    pub brownian_steps: usize,
    pub workers: Workers,
}

/// Samples `u(τ_k, x_j)` per path, laid out `[path][τ][x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportSamples {
    pub n: usize,
    pub taus: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub paths: usize,
    pub values: Vec<f64>,
}

impl TransportSamples {
    pub fn at(&self, path: usize, tau_index: usize, point_index: usize) -> f64 {
        self.values[(path * self.taus.len() + tau_index) * self.points.len() + point_index]
    }

    fn column(&self, tau_index: usize, point_index: usize) -> Vec<f64> {
        (0..self.paths).map(|i| self.at(i, tau_index, point_index)).collect()
    }
}

fn check_run(problem: &TransportProblem, n: usize, run: &TransportRun) -> Result<()> {
    problem.validate()?;
    if n == 0 || !run.brownian_steps.is_multiple_of(n) {
        return Err(Error::InvalidArgument(format!(
            "level {n} must divide the Brownian resolution {}",
            run.brownian_steps
        )));
    }
    if run.paths == 0 {
        return Err(Error::InvalidArgument("need at least one path".into()));
    }
    for &tau in &problem.taus {
        grid_index(tau, n)?;
    }
    Ok(())
}

/// Runs the reversed tamed scheme at `n` steps (σ = I) for every path and
/// evaluation point.
pub fn solve_transport(problem: &TransportProblem, n: usize, run: &TransportRun) -> Result<TransportSamples> {
    check_run(problem, n, run)?;
    let d = problem.dim();
    let bn = problem.drift.at_level(n)?;
    let reversed = problem
        .taus
        .iter()
        .map(|&tau| reverse_drift(bn.clone(), tau))
        .collect::<Result<Vec<_>>>()?;
    let h = 1.0 / n as f64;
    let m = if bn.time_independent() { 1 } else { problem.quadrature_nodes };
    let weights = if m == 1 {
        vec![h]
    } else {
        trapezoid_weights(m, h / (m - 1) as f64)
    };
    let rows = run.workers.map(run.paths, |i| {
        let w = BrownianPath::generate(run.master_seed, i as u64, d, run.brownian_steps).aggregate(n)?;
        let mut out = Vec::with_capacity(problem.taus.len() * problem.points.len());
        let mut drift = vec![0.0; d];
        let mut buf = vec![0.0; d];
        for (k, &tau) in problem.taus.iter().enumerate() {
            let wt = reversed_brownian(&w, tau)?;
            let steps = grid_index(tau, n)?;
            let field = &reversed[k];
            for x0 in &problem.points {
                let mut x = x0.clone();
                for j in 0..steps {
                    let t = j as f64 * h;
                    drift.fill(0.0);
                    for (q, wq) in weights.iter().enumerate() {
                        let r = if m == 1 { t } else { t + q as f64 * h / (m - 1) as f64 };
                        field.eval(r, &x, &mut buf);
                        drift.iter_mut().zip(&buf).for_each(|(a, b)| *a += wq * b);
                    }
                    let db = wt.increment(j);
                    for c in 0..d {
                        x[c] += -drift[c] + db[c];
                    }
                }
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::PathFailed {
                        master_seed: run.master_seed,
                        path_index: i as u64,
                        level: n,
                        source: Box::new(Error::NonFiniteState { step: steps, n, t: tau }),
                    });
                }
                out.push(problem.rho.value(&x));
            }
        }
        Ok(out)
    })?;
    Ok(TransportSamples {
        n,
        taus: problem.taus.clone(),
        points: problem.points.clone(),
        paths: run.paths,
        values: rows.into_iter().flatten().collect(),
    })
}

/// Exact-in-the-limit solution for `b(x) = −κx`: the reversed characteristic
/// solves `dX = κX ds + dW^τ`, integrated with the exponential integrator on
/// the full Brownian grid of `run`.
pub fn linear_transport_oracle(kappa: f64, problem: &TransportProblem, run: &TransportRun) -> Result<TransportSamples> {
    let n = run.brownian_steps;
    check_run(problem, n, run)?;
    let d = problem.dim();
    let h = 1.0 / n as f64;
    let growth = (kappa * h).exp();
    let rows = run.workers.map(run.paths, |i| {
        let w = BrownianPath::generate(run.master_seed, i as u64, d, n);
        let mut out = Vec::with_capacity(problem.taus.len() * problem.points.len());
        for &tau in &problem.taus {
            let wt = reversed_brownian(&w, tau)?;
            let steps = grid_index(tau, n)?;
            for x0 in &problem.points {
                let mut x = x0.clone();
                for j in 0..steps {
                    let db = wt.increment(j);
                    for c in 0..d {
                        x[c] = growth * (x[c] + db[c]);
                    }
                }
                out.push(problem.rho.value(&x));
            }
        }
        Ok(out)
    })?;
    Ok(TransportSamples {
        n,
        taus: problem.taus.clone(),
        points: problem.points.clone(),
        paths: run.paths,
        values: rows.into_iter().flatten().collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportErrorRow {
    pub tau: f64,
    pub x: Vec<f64>,
    pub weighted_error: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportErrorTable {
    pub n: usize,
    pub l: f64,
    pub r_bar: f64,
    pub rows: Vec<TransportErrorRow>,
    pub max: f64,
    pub warnings: Vec<String>,
}

/// `τ^{d/(2r̄)} ‖uⁿ(τ,x) − u(τ,x)‖_{L_l(Ω)}` per evaluation point. `p` is the
/// drift's spatial integrability exponent, used only to validate `l`, `r̄`.
pub fn weighted_transport_error(
    samples: &TransportSamples,
    oracle: &TransportSamples,
    r_bar: f64,
    l: f64,
    p: f64,
    batches: usize,
) -> Result<TransportErrorTable> {
    if samples.paths != oracle.paths || samples.taus != oracle.taus || samples.points != oracle.points {
        return Err(Error::InvalidArgument(
            "samples and oracle cover different evaluation sets".into(),
        ));
    }
    if !(l >= 1.0 && l.is_finite()) || !(r_bar > 1.0) {
        return Err(Error::Domain(format!(
            "need l >= 1 and r_bar > 1 (got l = {l}, r_bar = {r_bar})"
        )));
    }
    let d = samples.points.first().map_or(1, Vec::len) as f64;
    let mut warnings = Vec::new();
    let l_cap = p.min(2.0 * p / d);
    if !(l > 1.0 && l < l_cap) {
        warnings.push(format!("l = {l} outside (1, p ^ 2p/d) = (1, {l_cap})"));
    }
    let slack = 1.0 / l - (1.0 / p) * 1f64.max(d / 2.0);
    if !(1.0 / r_bar < slack) {
        warnings.push(format!(
            "1/r_bar = {} is not below 1/l - (1/p)(1 v d/2) = {slack}",
            1.0 / r_bar
        ));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    let mut rows = Vec::new();
    for (k, &tau) in samples.taus.iter().enumerate() {
        let weight = tau.powf(d / (2.0 * r_bar));
        for (j, x) in samples.points.iter().enumerate() {
            let diffs: Vec<f64> = samples
                .column(k, j)
                .iter()
                .zip(oracle.column(k, j))
                .map(|(a, b)| a - b)
                .collect();
            let (e, se) = lp_estimate(&diffs, l, batches);
            rows.push(TransportErrorRow {
                tau,
                x: x.clone(),
                weighted_error: weight * e,
                stderr: weight * se,
            });
        }
    }
    let max = rows.iter().map(|r| r.weighted_error).fold(0.0, f64::max);
    Ok(TransportErrorTable {
        n: samples.n,
        l,
        r_bar,
        rows,
        max,
        warnings,
    })
}
