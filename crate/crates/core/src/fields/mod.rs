//! Drift and diffusion fields with their integrability and regularity
//! metadata, mixed-norm and Bessel-potential norm estimators, and the
//! ellipticity/Hölder validator.

mod bessel;
mod builtins;
mod condition_a;
mod norms;
pub(crate) mod spectral;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bessel::{bessel_norm, BesselNorm, ALIASING_THRESHOLD};
pub use condition_a::{condition_a_check, ConditionAReport};
pub use norms::{mixed_norm, slice_lp_norm, NormGrid, DEFAULT_HALF_WIDTH};

/// Anything that can be evaluated as `(t, x) ↦ ℝ^k`.
pub trait VectorField: Send + Sync {
    /// Spatial dimension of the argument.
    fn dim(&self) -> usize;

    /// Number of output components.
    fn out_dim(&self) -> usize {
        self.dim()
    }

    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]);

    /// Points where the field is singular; quadrature avoids them.
    fn singular_points(&self) -> &[Vec<f64>] {
        &[]
    }

    fn time_independent(&self) -> bool {
        false
    }
}

pub type FieldFn = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;
pub type SliceNormFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A drift `b: [0,1] × ℝ^d → ℝ^d` with its integrability metadata.
#[derive(Clone)]
pub struct DriftField {
    name: String,
    dim: usize,
    eval: FieldFn,
    p: f64,
    /// `f64::INFINITY` for fields flagged effectively time-independent.
    q: f64,
    lps: bool,
    analytic_lqp_norm: Option<f64>,
    analytic_slice_norm: Option<SliceNormFn>,
    support_radius: Option<f64>,
    singular_points: Vec<Vec<f64>>,
    time_independent: bool,
}

impl fmt::Debug for DriftField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DriftField")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("p", &self.p)
            .field("q", &self.q)
            .field("lps", &self.lps)
            .finish_non_exhaustive()
    }
}

impl DriftField {
    /// A field with no integrability claims (`p = q = ∞`, not LPS-flagged).
    pub fn new<F>(name: impl Into<String>, dim: usize, eval: F) -> Self
    where
        F: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            dim,
            eval: Arc::new(eval),
            p: f64::INFINITY,
            q: f64::INFINITY,
            lps: false,
            analytic_lqp_norm: None,
            analytic_slice_norm: None,
            support_radius: None,
            singular_points: Vec::new(),
            time_independent: false,
        }
    }

    /// Declares `b ∈ L^q_p` and flags the field as satisfying `d/p + 2/q < 1`.
    pub fn with_lps_exponents(mut self, p: f64, q: f64) -> Result<Self> {
        let value = lps_value(self.dim, p, q)?;
        if value >= 1.0 {
            return Err(Error::LpsViolated { value });
        }
        self.p = p;
        self.q = q;
        self.lps = true;
        Ok(self)
    }

    pub fn with_lqp_norm(mut self, norm: f64) -> Self {
        self.analytic_lqp_norm = Some(norm);
        self
    }

    /// Closed form for `r ↦ ‖b_r‖_{L_p}`.
    pub fn with_slice_norm<F>(mut self, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.analytic_slice_norm = Some(Arc::new(f));
        self
    }

    pub fn with_support_radius(mut self, radius: f64) -> Self {
        self.support_radius = Some(radius);
        self
    }

    pub fn with_singular_point(mut self, point: Vec<f64>) -> Self {
        self.singular_points.push(point);
        self
    }

    /// Marks the field as time-independent.
    pub fn autonomous(mut self) -> Self {
        self.time_independent = true;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn is_lps(&self) -> bool {
        self.lps
    }

    pub fn analytic_lqp_norm(&self) -> Option<f64> {
        self.analytic_lqp_norm
    }

    pub fn analytic_slice_norm(&self, t: f64) -> Option<f64> {
        self.analytic_slice_norm.as_ref().map(|f| f(t))
    }

    pub fn support_radius(&self) -> Option<f64> {
        self.support_radius
    }

    /// Allocating convenience evaluation.
    pub fn value(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        (self.eval)(t, x, &mut out);
        out
    }
}

impl VectorField for DriftField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.eval)(t, x, out)
    }

    fn singular_points(&self) -> &[Vec<f64>] {
        &self.singular_points
    }

    fn time_independent(&self) -> bool {
        self.time_independent
    }
}

/// `d/p + 2/q`, with exponents validated to lie in `[1, ∞]`.
pub fn lps_value(d: usize, p: f64, q: f64) -> Result<f64> {
    if !(p >= 1.0) || !(q >= 1.0) || d == 0 {
        return Err(Error::Domain(format!("invalid exponents d = {d}, p = {p}, q = {q}")));
    }
    Ok(d as f64 / p + 2.0 / q)
}

/// Sobolev data for `∇σ ∈ L^{q0}_{p0}` with bound `K3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevMeta {
    pub p0: f64,
    pub q0: f64,
    pub k3: f64,
}

/// Declared ellipticity and Hölder constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionA {
    /// Eigenvalues of `σσ*` lie in `[1/K1, K1]`.
    pub k1: f64,
    pub alpha: f64,
    /// `|σσ*(s,x) − σσ*(s,y)| ≤ K2 |x − y|^α`.
    pub k2: f64,
    pub sobolev: Option<SobolevMeta>,
}

/// A diffusion coefficient `σ: [0,1] × ℝ^d → ℝ^{d×d}` (row-major).
#[derive(Clone)]
pub struct DiffusionField {
    name: String,
    dim: usize,
    eval: FieldFn,
    condition_a: Option<ConditionA>,
    time_independent: bool,
}

impl fmt::Debug for DiffusionField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffusionField")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("condition_a", &self.condition_a)
            .finish_non_exhaustive()
    }
}

impl DiffusionField {
    pub fn new<F>(name: impl Into<String>, dim: usize, eval: F) -> Self
    where
        F: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            dim,
            eval: Arc::new(eval),
            condition_a: None,
            time_independent: false,
        }
    }

    pub fn with_condition_a(mut self, meta: ConditionA) -> Self {
        self.condition_a = Some(meta);
        self
    }

    /// Marks the field as time-independent.
    pub fn autonomous(mut self) -> Self {
        self.time_independent = true;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Declared Condition-A constants; `None` for degenerate coefficients.
    pub fn condition_a(&self) -> Option<&ConditionA> {
        self.condition_a.as_ref()
    }

    pub fn is_time_independent(&self) -> bool {
        self.time_independent
    }

    /// Writes `σ(t, x)` into `out` (length `d²`, row-major).
    pub fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.eval)(t, x, out)
    }

    pub fn matrix(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim * self.dim];
        (self.eval)(t, x, &mut out);
        out
    }
}

pub use builtins::{DiffusionSpec, DriftSpec};
