//! Empirical check of uniform ellipticity and Hölder continuity of `σσ*`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{ConditionA, DiffusionField};

#[derive(Debug, Clone, Serialize)]
pub struct ConditionAReport {
    pub samples: usize,
    pub min_eig: f64,
    pub max_eig: f64,
    /// Largest `‖σσ*(t,x) − σσ*(t,y)‖_HS / |x − y|^α` seen.
    pub worst_holder_ratio: f64,
    /// Hölder exponent used for the ratio (declared α, or 1).
    pub alpha: f64,
    pub declared: Option<ConditionA>,
    pub violations: Vec<String>,
}

impl ConditionAReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }

    /// Smallest `K1` consistent with the sampled spectrum.
    pub fn empirical_k1(&self) -> f64 {
        self.max_eig.max(1.0 / self.min_eig)
    }
}

fn covariance(sigma: &DiffusionField, t: f64, x: &[f64], buf: &mut [f64]) -> DMatrix<f64> {
    let d = sigma.dim();
    sigma.eval(t, x, buf);
    let s = DMatrix::from_row_slice(d, d, buf);
    &s * s.transpose()
}

/// Samples `t ∈ [0,1]` and `x, y ∈ [-L, L]^d` (half of the pairs close
/// together) and compares the spectrum and modulus of `σσ*` with the
/// declared constants. Report-only.
pub fn condition_a_check(sigma: &DiffusionField, samples: usize, seed: u64, half_width: f64) -> ConditionAReport {
    let d = sigma.dim();
    let declared = sigma.condition_a().copied();
    let alpha = declared.map_or(1.0, |c| c.alpha);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = vec![0.0; d * d];
    let (mut min_eig, mut max_eig, mut worst) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for i in 0..samples {
        let t: f64 = rng.random_range(0.0..=1.0);
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-half_width..=half_width)).collect();
        let y: Vec<f64> = if i % 2 == 0 {
            (0..d).map(|_| rng.random_range(-half_width..=half_width)).collect()
        } else {
            let scale = 10f64.powf(-rng.random_range(1.0..6.0));
            x.iter().map(|v| v + scale * rng.random_range(-1.0..=1.0)).collect()
        };
        let ax = covariance(sigma, t, &x, &mut buf);
        let ay = covariance(sigma, t, &y, &mut buf);
        for e in ax.clone().symmetric_eigen().eigenvalues.iter() {
            min_eig = min_eig.min(*e);
            max_eig = max_eig.max(*e);
        }
        let dist = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if dist > 0.0 {
            worst = worst.max((ax - ay).norm() / dist.powf(alpha));
        }
    }
    let mut violations = Vec::new();
    if let Some(c) = declared {
        let tol = 1e-12;
        if min_eig < 1.0 / c.k1 - tol {
            violations.push(format!("min eigenvalue {min_eig} below 1/K1 = {}", 1.0 / c.k1));
        }
        if max_eig > c.k1 + tol {
            violations.push(format!("max eigenvalue {max_eig} above K1 = {}", c.k1));
        }
        if worst > c.k2 * (1.0 + 1e-9) + tol {
            violations.push(format!("Hölder ratio {worst} above K2 = {}", c.k2));
        }
    }
    ConditionAReport {
        samples,
        min_eig,
        max_eig,
        worst_holder_ratio: worst,
        alpha,
        declared,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_perfect() {
        let r = condition_a_check(&DiffusionField::identity(2), 500, 1, 8.0);
        assert!((r.min_eig - 1.0).abs() < 1e-12 && (r.max_eig - 1.0).abs() < 1e-12);
        assert_eq!(r.worst_holder_ratio, 0.0);
        assert!(r.holds());
    }

    #[test]
    fn trig_elliptic_spectrum() {
        let sigma = DiffusionField::trig_elliptic(1, 0.5).unwrap();
        let r = condition_a_check(&sigma, 2000, 2, 8.0);
        assert!(r.min_eig >= 1.0 - 1e-12 && r.max_eig <= 1.5 + 1e-12);
        assert!(r.max_eig > 1.45);
        assert!(r.holds(), "{:?}", r.violations);
    }

    #[test]
    fn understated_k1_is_reported() {
        let base = DiffusionField::trig_elliptic(1, 0.5).unwrap();
        let meta = ConditionA {
            k1: 1.2,
            ..*base.condition_a().unwrap()
        };
        let sigma = base.with_condition_a(meta);
        let r = condition_a_check(&sigma, 2000, 3, 8.0);
        assert!(!r.holds());
        assert!(r.violations.iter().any(|v| v.contains("K1")));
    }
}
