//! Drift taming by relative truncation, absolute truncation or Gaussian
//! mollification, the admissible parameter ranges for each, and the
//! Condition-B verifier.

mod admissible;
mod condition_b;
mod mollify;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{slice_lp_norm, DriftField, NormGrid, VectorField};
use crate::grid::floor_index;

pub use admissible::{admissible_chi, Admissibility, AdmissibleParams, PredictedRate, STRICT_MARGIN};
pub use condition_b::{verify_condition_b, ConditionBCertificate, ConditionBReport, CONDITION_B_RTOL};
pub use mollify::{MollifiedGrid, MAX_MOLLIFIER_NODES};

/// The three taming constructions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TamingStrategy {
    /// `b_r 1{|b_r| ≤ C n^χ ‖b_r‖_{L_p}}`.
    RelativeTruncation {
        #[serde(rename = "C")]
        c: f64,
        chi: f64,
    },
    /// `b_r 1{|b_r| ≤ C n^χ}`.
    AbsoluteTruncation {
        #[serde(rename = "C")]
        c: f64,
        chi: f64,
    },
    /// Convolution with the Gaussian density of variance `n^{-χ}` per axis.
    Mollification { chi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TamingKind {
    RelativeTruncation,
    AbsoluteTruncation,
    Mollification,
}

impl TamingStrategy {
    pub fn kind(&self) -> TamingKind {
        match self {
            TamingStrategy::RelativeTruncation { .. } => TamingKind::RelativeTruncation,
            TamingStrategy::AbsoluteTruncation { .. } => TamingKind::AbsoluteTruncation,
            TamingStrategy::Mollification { .. } => TamingKind::Mollification,
        }
    }

    pub fn chi(&self) -> f64 {
        match *self {
            TamingStrategy::RelativeTruncation { chi, .. }
            | TamingStrategy::AbsoluteTruncation { chi, .. }
            | TamingStrategy::Mollification { chi } => chi,
        }
    }

    fn validate(&self) -> Result<()> {
        let chi = self.chi();
        if !(chi > 0.0 && chi.is_finite()) {
            return Err(Error::Domain(format!("chi = {chi} must be positive")));
        }
        match *self {
            TamingStrategy::RelativeTruncation { c, .. } | TamingStrategy::AbsoluteTruncation { c, .. }
                if !(c > 0.0 && c.is_finite()) =>
            {
                Err(Error::Domain(format!("truncation constant C = {c} must be positive")))
            }
            _ => Ok(()),
        }
    }
}

/// Options for building a [`TamedDrift`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct TameOptions {
    /// Quadrature grid for slice norms when no closed form is declared.
    pub norm_grid: NormGrid,
    /// Mollifier nodes per axis; chosen automatically when `None`.
    pub mollifier_nodes: Option<usize>,
}

#[derive(Debug, Clone)]
enum Thresholds {
    Constant(f64),
    /// Indexed by the left grid point `k_n(t)`.
    PerCell(Vec<f64>),
}

#[derive(Debug, Clone)]
enum Taming {
    Truncation(Thresholds),
    Mollified(MollifiedGrid),
}

/// A tamed drift `bⁿ` at a fixed step count `n`.
#[derive(Debug, Clone)]
pub struct TamedDrift {
    base: DriftField,
    strategy: TamingStrategy,
    n: usize,
    taming: Taming,
}

fn cell(t: f64, n: usize) -> usize {
    floor_index(t.clamp(0.0, 1.0), n).unwrap_or(n)
}

impl TamedDrift {
    pub fn new(base: DriftField, strategy: TamingStrategy, n: usize, options: &TameOptions) -> Result<Self> {
        strategy.validate()?;
        if n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        let scale = (n as f64).powf(strategy.chi());
        let taming = match strategy {
            TamingStrategy::AbsoluteTruncation { c, .. } => Taming::Truncation(Thresholds::Constant(c * scale)),
            TamingStrategy::RelativeTruncation { c, .. } => {
                let p = base.p();
                if !p.is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "relative truncation of '{}' needs a declared finite p",
                        base.name()
                    )));
                }
                let norm_at = |t: f64| match base.analytic_slice_norm(t) {
                    Some(v) => Ok(v),
                    None => slice_lp_norm(&base, t, p, &options.norm_grid),
                };
                if base.time_independent() {
                    Taming::Truncation(Thresholds::Constant(c * scale * norm_at(0.0)?))
                } else {
                    let table = (0..=n)
                        .map(|j| norm_at(j as f64 / n as f64).map(|v| c * scale * v))
                        .collect::<Result<Vec<_>>>()?;
                    Taming::Truncation(Thresholds::PerCell(table))
                }
            }
            TamingStrategy::Mollification { chi } => {
                let variance = (n as f64).powf(-chi);
                Taming::Mollified(MollifiedGrid::build(&base, variance, options)?)
            }
        };
        Ok(Self {
            base,
            strategy,
            n,
            taming,
        })
    }

    pub fn base(&self) -> &DriftField {
        &self.base
    }

    pub fn strategy(&self) -> TamingStrategy {
        self.strategy
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Truncation level at time `t`; `None` for mollification.
    pub fn threshold(&self, t: f64) -> Option<f64> {
        match &self.taming {
            Taming::Truncation(Thresholds::Constant(v)) => Some(*v),
            Taming::Truncation(Thresholds::PerCell(table)) => Some(table[cell(t, self.n)]),
            Taming::Mollified(_) => None,
        }
    }

    /// Certified bound on `‖bⁿ_t‖_{L_∞}`.
    pub fn sup_bound(&self, t: f64) -> f64 {
        match &self.taming {
            Taming::Mollified(g) => g.sup(),
            _ => self.threshold(t).unwrap_or(0.0),
        }
    }

    /// `‖bⁿ‖_{L^q_∞([s,t])}` from the piecewise-constant sup certificate,
    /// integrated exactly over grid cells.
    pub fn lq_inf_norm(&self, s: f64, t: f64, q: f64) -> f64 {
        if !(t > s) {
            return 0.0;
        }
        let constant = match &self.taming {
            Taming::Truncation(Thresholds::PerCell(_)) => None,
            _ => Some(self.sup_bound(s)),
        };
        if q.is_infinite() {
            return match constant {
                Some(v) => v,
                None => {
                    let (a, b) = (cell(s, self.n), cell(t, self.n));
                    (a..=b).map(|j| self.sup_bound(j as f64 / self.n as f64)).fold(0.0, f64::max)
                }
            };
        }
        if let Some(v) = constant {
            return v * (t - s).powf(1.0 / q);
        }
        let nf = self.n as f64;
        let (a, b) = (cell(s, self.n), cell(t, self.n));
        let mut acc = 0.0;
        for j in a..=b {
            let lo = (j as f64 / nf).max(s);
            let hi = ((j + 1) as f64 / nf).min(t);
            if hi > lo {
                acc += self.sup_bound(j as f64 / nf).powf(q) * (hi - lo);
            }
        }
        acc.powf(1.0 / q)
    }

    pub fn value(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.base.dim()];
        self.eval(t, x, &mut out);
        out
    }
}

impl VectorField for TamedDrift {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        match &self.taming {
            Taming::Mollified(g) => g.eval(x, out),
            Taming::Truncation(_) => {
                self.base.eval(t, x, out);
                let threshold = self.threshold(t).unwrap_or(0.0);
                let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
                // Ties are kept; NaN magnitudes are cut.
                if !(norm <= threshold) {
                    out.fill(0.0);
                }
            }
        }
    }

    fn singular_points(&self) -> &[Vec<f64>] {
        match self.taming {
            Taming::Mollified(_) => &[],
            Taming::Truncation(_) => self.base.singular_points(),
        }
    }

    fn time_independent(&self) -> bool {
        match &self.taming {
            Taming::Mollified(_) => true,
            Taming::Truncation(Thresholds::Constant(_)) => self.base.time_independent(),
            Taming::Truncation(Thresholds::PerCell(_)) => false,
        }
    }
}
