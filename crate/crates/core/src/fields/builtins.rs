//! Named built-in fields, constructible from configuration.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use super::{ConditionA, DiffusionField, DriftField};
use crate::error::{Error, Result};

fn default_one() -> f64 {
    1.0
}

fn default_dim() -> usize {
    1
}

fn default_clip() -> f64 {
    1e6
}

/// Configuration form of the built-in drifts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DriftSpec {
    Zero {
        #[serde(default = "default_dim")]
        dim: usize,
    },
    Constant {
        value: Vec<f64>,
    },
    /// `b(x) = a·x`.
    Linear {
        #[serde(default = "default_dim")]
        dim: usize,
        a: f64,
    },
    /// `b(x) = x/|x| · |x|^{-θ} 1{|x| ≤ R}`, declared in `L^q_p`.
    PowerSingularity {
        #[serde(default = "default_dim")]
        dim: usize,
        theta: f64,
        #[serde(default = "default_one")]
        radius: f64,
        p: f64,
        q: f64,
    },
    /// `b(t, x) = t·v`.
    TimeLinear {
        value: Vec<f64>,
    },
}

impl DriftSpec {
    pub fn build(&self) -> Result<DriftField> {
        match self {
            DriftSpec::Zero { dim } => Ok(DriftField::zero(*dim)),
            DriftSpec::Constant { value } => Ok(DriftField::constant(value.clone())),
            DriftSpec::Linear { dim, a } => Ok(DriftField::linear(*a, *dim)),
            DriftSpec::PowerSingularity {
                dim,
                theta,
                radius,
                p,
                q,
            } => DriftField::power_singularity(*dim, *theta, *radius, *p, *q),
            DriftSpec::TimeLinear { value } => Ok(DriftField::time_linear(value.clone())),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DriftSpec::Zero { dim } | DriftSpec::Linear { dim, .. } | DriftSpec::PowerSingularity { dim, .. } => *dim,
            DriftSpec::Constant { value } | DriftSpec::TimeLinear { value } => value.len(),
        }
    }
}

/// Configuration form of the built-in diffusions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DiffusionSpec {
    Identity {
        #[serde(default = "default_dim")]
        dim: usize,
    },
    /// `σ(x) = diag(√(1 + a sin² x_i))`.
    TrigElliptic {
        #[serde(default = "default_dim")]
        dim: usize,
        a: f64,
    },
    /// `σ(x) = s·clamp(x, ±clip)` in one dimension.
    Gbm {
        sigma: f64,
        #[serde(default = "default_clip")]
        clip: f64,
    },
    Zero {
        #[serde(default = "default_dim")]
        dim: usize,
    },
}

impl DiffusionSpec {
    pub fn build(&self) -> Result<DiffusionField> {
        match self {
            DiffusionSpec::Identity { dim } => Ok(DiffusionField::identity(*dim)),
            DiffusionSpec::TrigElliptic { dim, a } => DiffusionField::trig_elliptic(*dim, *a),
            DiffusionSpec::Gbm { sigma, clip } => Ok(DiffusionField::gbm(*sigma, *clip)),
            DiffusionSpec::Zero { dim } => Ok(DiffusionField::zero(*dim)),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DiffusionSpec::Identity { dim } | DiffusionSpec::TrigElliptic { dim, .. } | DiffusionSpec::Zero { dim } => *dim,
            DiffusionSpec::Gbm { .. } => 1,
        }
    }
}

/// Surface area of the unit sphere in `ℝ^d`.
fn sphere_area(d: usize) -> f64 {
    let h = 0.5 * d as f64;
    2.0 * std::f64::consts::PI.powf(h) / gamma(h)
}

impl DriftField {
    pub fn zero(dim: usize) -> Self {
        DriftField::new("zero", dim, |_, _, out| out.fill(0.0))
            .with_lqp_norm(0.0)
            .with_slice_norm(|_| 0.0)
            .autonomous()
    }

    pub fn constant(value: Vec<f64>) -> Self {
        let dim = value.len();
        DriftField::new("constant", dim, move |_, _, out| out.copy_from_slice(&value)).autonomous()
    }

    /// `b(x) = a·x`.
    pub fn linear(a: f64, dim: usize) -> Self {
        DriftField::new("linear", dim, move |_, x, out| {
            for (o, xi) in out.iter_mut().zip(x) {
                *o = a * xi;
            }
        })
        .autonomous()
    }

    /// `b(t, x) = t·v`.
    pub fn time_linear(value: Vec<f64>) -> Self {
        let dim = value.len();
        DriftField::new("time-linear", dim, move |t, _, out| {
            for (o, v) in out.iter_mut().zip(&value) {
                *o = t * v;
            }
        })
    }

    /// `b(x) = x/|x| · |x|^{-θ} 1{|x| ≤ R}`, with `b(0) = 0`.
    ///
    /// Lies in `L_p` iff `θp < d`; then `‖b‖_{L_p}^p = ω_{d-1} R^{d-θp}/(d-θp)`.
    pub fn power_singularity(dim: usize, theta: f64, radius: f64, p: f64, q: f64) -> Result<Self> {
        if !(theta >= 0.0 && radius > 0.0) {
            return Err(Error::Domain(format!(
                "power singularity needs theta >= 0, R > 0 (theta = {theta}, R = {radius})"
            )));
        }
        let excess = dim as f64 - theta * p;
        if !(excess > 0.0) {
            return Err(Error::Domain(format!(
                "|x|^-{theta} is not in L_{p} in dimension {dim} (needs theta·p < d)"
            )));
        }
        let slice = (sphere_area(dim) * radius.powf(excess) / excess).powf(1.0 / p);
        let field = DriftField::new("power-singularity", dim, move |_, x, out| {
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r == 0.0 || r > radius {
                out.fill(0.0);
            } else {
                let scale = r.powf(-theta) / r;
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = scale * xi;
                }
            }
        })
        .with_lps_exponents(p, q)?
        .with_lqp_norm(slice)
        .with_slice_norm(move |_| slice)
        .with_support_radius(radius)
        .with_singular_point(vec![0.0; dim])
        .autonomous();
        Ok(field)
    }
}

impl DiffusionField {
    pub fn identity(dim: usize) -> Self {
        DiffusionField::new("identity", dim, move |_, _, out| {
            out.fill(0.0);
            for i in 0..dim {
                out[i * dim + i] = 1.0;
            }
        })
        .with_condition_a(ConditionA {
            k1: 1.0,
            alpha: 1.0,
            k2: 0.0,
            sobolev: None,
        })
        .autonomous()
    }

    pub fn zero(dim: usize) -> Self {
        DiffusionField::new("zero", dim, |_, _, out| out.fill(0.0)).autonomous()
    }

    /// `σ(x) = diag(√(1 + a sin² x_i))`, elliptic with `σσ*` in `[1, 1 + a]`
    /// and Lipschitz with constant `a`.
    pub fn trig_elliptic(dim: usize, a: f64) -> Result<Self> {
        if !(a >= 0.0 && a.is_finite()) {
            return Err(Error::Domain(format!("trig-elliptic amplitude {a} must be >= 0")));
        }
        Ok(DiffusionField::new("trig-elliptic", dim, move |_, x, out| {
            out.fill(0.0);
            for i in 0..dim {
                let s = x[i].sin();
                out[i * dim + i] = (1.0 + a * s * s).sqrt();
            }
        })
        .with_condition_a(ConditionA {
            k1: 1.0 + a,
            alpha: 1.0,
            k2: a,
            sobolev: None,
        })
        .autonomous())
    }

    /// Degenerate one-dimensional `σ(x) = s·clamp(x, ±clip)`; carries no
    /// Condition-A metadata.
    pub fn gbm(sigma: f64, clip: f64) -> Self {
        DiffusionField::new("gbm", 1, move |_, x, out| out[0] = sigma * x[0].clamp(-clip, clip)).autonomous()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn power_singularity_values() {
        let b = DriftField::power_singularity(1, 0.4, 1.0, 2.0, 16.0).unwrap();
        assert_eq!(b.value(0.0, &[0.0]), vec![0.0]);
        assert_eq!(b.value(0.0, &[2.0]), vec![0.0]);
        assert_abs_diff_eq!(b.value(0.0, &[-0.5])[0], -(0.5f64.powf(-0.4)), epsilon = 1e-14);
        // (2R^{1-θp}/(1-θp))^{1/p} = √10.
        assert_abs_diff_eq!(b.analytic_slice_norm(0.3).unwrap(), 10f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn power_singularity_rejects_non_integrable() {
        assert!(DriftField::power_singularity(1, 0.6, 1.0, 2.0, 16.0).is_err());
        assert!(matches!(
            DriftField::power_singularity(1, 0.1, 1.0, 2.0, 2.0),
            Err(Error::LpsViolated { .. })
        ));
    }

    #[test]
    fn sphere_areas() {
        assert_abs_diff_eq!(sphere_area(1), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(sphere_area(2), 2.0 * std::f64::consts::PI, epsilon = 1e-13);
        assert_abs_diff_eq!(sphere_area(3), 4.0 * std::f64::consts::PI, epsilon = 1e-13);
    }

    #[test]
    fn specs_deserialize() {
        let d: DriftSpec = serde_json::from_str(r#"{"kind":"power-singularity","theta":0.4,"p":2.0,"q":16.0}"#).unwrap();
        assert_eq!(d.dim(), 1);
        let s: DiffusionSpec = serde_json::from_str(r#"{"kind":"trig-elliptic","a":0.5}"#).unwrap();
        assert_eq!(s.build().unwrap().condition_a().unwrap().k1, 1.5);
    }
}
