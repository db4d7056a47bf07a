//! Empirical check of the exponential-moment bound
//! `E exp(λ ∫_S^T β) ≤ 2^{1 + (2λ)^{1/γ} w(S,T)}` for a nonnegative path
//! functional `β` whose conditional increments are controlled by `w^γ`.

use serde::{Deserialize, Serialize};

use crate::controls::ControlFn;
use crate::error::{Error, Result};
use crate::parallel::{batch_means, Workers};
use crate::scheme::BrownianPath;

/// Largest exponent evaluated before `exp` overflows.
const MAX_EXPONENT: f64 = 709.0;
pub const MIN_KHASMINSKII_PATHS: usize = 1000;

/// Built-in functionals `∫_0^1 β(r) dr` evaluated on a Brownian path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PathFunctional {
    /// `β ≡ c`.
    Constant { c: f64 },
    /// `β(r) = |B_r|`, trapezoid on the path grid.
    AbsBrownian,
}

impl PathFunctional {
    pub fn integrate(&self, w: &BrownianPath) -> f64 {
        match *self {
            PathFunctional::Constant { c } => c,
            PathFunctional::AbsBrownian => {
                let d = w.dim();
                let n = w.n();
                let v = w.values();
                let norm = |j: usize| v[j * d..(j + 1) * d].iter().map(|x| x * x).sum::<f64>().sqrt();
                (0..n).map(|j| 0.5 * (norm(j) + norm(j + 1))).sum::<f64>() / n as f64
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KhasminskiiConfig {
    pub lambda: f64,
    pub gamma: f64,
    pub paths: usize,
    /// Brownian grid resolution handed to the functional.
    pub steps: usize,
    pub dim: usize,
    pub master_seed: u64,
    pub workers: Workers,
    pub batches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KhasminskiiReport {
    pub lambda: f64,
    pub gamma: f64,
    pub paths: usize,
    pub empirical: f64,
    pub stderr: f64,
    pub bound: f64,
    /// Largest `λ ∫β` seen.
    pub max_exponent: f64,
    pub overflow: bool,
    pub pass: bool,
}

/// Monte Carlo mean of `exp(λ ∫β)` against the bound over `w`'s domain.
/// Passes when the mean is at most `bound + 3·stderr`. The hypothesis
/// `E[∫_s^t β | F_s] ≤ w(s,t)^γ` is the caller's responsibility.
pub fn khasminskii_check<F>(beta: F, w: &ControlFn, kc: &KhasminskiiConfig) -> Result<KhasminskiiReport>
where
    F: Fn(&BrownianPath) -> f64 + Sync + Send,
{
    if kc.paths < MIN_KHASMINSKII_PATHS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_KHASMINSKII_PATHS} paths, got {}",
            kc.paths
        )));
    }
    if !(kc.lambda >= 0.0 && kc.lambda.is_finite()) || !(kc.gamma > 0.0 && kc.gamma.is_finite()) {
        return Err(Error::Domain(format!(
            "need lambda >= 0 and gamma > 0 (got {}, {})",
            kc.lambda, kc.gamma
        )));
    }
    if kc.steps == 0 || kc.dim == 0 {
        return Err(Error::InvalidArgument("steps and dim must be positive".into()));
    }
    let integrals = kc.workers.map(kc.paths, |i| {
        let path = BrownianPath::generate(kc.master_seed, i as u64, kc.dim, kc.steps);
        let v = beta(&path);
        if !(v >= 0.0) {
            return Err(Error::Domain(format!("path {i}: integral of beta = {v} is not nonnegative")));
        }
        Ok(v)
    })?;
    let (s, t) = w.domain();
    let bound = 2f64.powf(1.0 + (2.0 * kc.lambda).powf(1.0 / kc.gamma) * w.eval(s, t));
    let exponents: Vec<f64> = integrals.iter().map(|v| kc.lambda * v).collect();
    let max_exponent = exponents.iter().copied().fold(0.0, f64::max);
    if max_exponent > MAX_EXPONENT {
        log::warn!("exp overflow: max exponent {max_exponent:.1}");
        return Ok(KhasminskiiReport {
            lambda: kc.lambda,
            gamma: kc.gamma,
            paths: kc.paths,
            empirical: f64::INFINITY,
            stderr: f64::NAN,
            bound,
            max_exponent,
            overflow: true,
            pass: false,
        });
    }
    let values: Vec<f64> = exponents.iter().map(|e| e.exp()).collect();
    let (empirical, stderr) = batch_means(&values, kc.batches);
    Ok(KhasminskiiReport {
        lambda: kc.lambda,
        gamma: kc.gamma,
        paths: kc.paths,
        empirical,
        stderr,
        bound,
        max_exponent,
        overflow: false,
        pass: empirical <= bound + 3.0 * stderr,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentCheck {
    pub m: u32,
    pub lm_norm: f64,
    pub bound: f64,
    pub holds: bool,
}

/// `‖∫β‖_{L_m} ≤ (m!)^{1/m} ρ` for each order, from sampled integrals.
pub fn moment_check(integrals: &[f64], rho: f64, orders: &[u32]) -> Vec<MomentCheck> {
    orders
        .iter()
        .map(|&m| {
            let mf = m as f64;
            let mean = integrals.iter().map(|v| v.abs().powf(mf)).sum::<f64>() / integrals.len().max(1) as f64;
            let lm_norm = mean.powf(1.0 / mf);
            let factorial: f64 = (1..=m).map(f64::from).product();
            let bound = factorial.powf(1.0 / mf) * rho;
            MomentCheck {
                m,
                lm_norm,
                bound,
                holds: lm_norm <= bound * (1.0 + 1e-12),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn config(lambda: f64) -> KhasminskiiConfig {
        KhasminskiiConfig {
            lambda,
            gamma: 1.0,
            paths: 1000,
            steps: 16,
            dim: 1,
            master_seed: 5,
            workers: Workers(1),
            batches: 10,
        }
    }

    #[test]
    fn constant_beta_closed_form() {
        let c = 0.8;
        let lambda = 1.5;
        let w = ControlFn::scaled(ControlFn::elapsed(0.0, 1.0).unwrap(), c).unwrap();
        let f = PathFunctional::Constant { c };
        let r = khasminskii_check(|p| f.integrate(p), &w, &config(lambda)).unwrap();
        assert_abs_diff_eq!(r.empirical, (lambda * c).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.bound, 2f64.powf(1.0 + 2.0 * lambda * c), epsilon = 1e-12);
        assert!(r.pass);
    }

    #[test]
    fn zero_beta() {
        let w = ControlFn::scaled(ControlFn::elapsed(0.0, 1.0).unwrap(), 0.0).unwrap();
        let r = khasminskii_check(|_| 0.0, &w, &config(1.0)).unwrap();
        assert_eq!(r.empirical, 1.0);
        assert_eq!(r.bound, 2.0);
        assert!(r.pass);
    }

    #[test]
    fn overflow_fails_check() {
        let w = ControlFn::elapsed(0.0, 1.0).unwrap();
        let r = khasminskii_check(|_| 1000.0, &w, &config(1.0)).unwrap();
        assert!(r.overflow && !r.pass);
        assert_eq!(r.max_exponent, 1000.0);
    }

    #[test]
    fn moments_of_constant() {
        let c = 0.6;
        for m in moment_check(&[c; 50], c, &[1, 2, 3]) {
            assert_abs_diff_eq!(m.lm_norm, c, epsilon = 1e-14);
            assert!(m.holds);
        }
    }

    #[test]
    fn abs_brownian_integral_mean() {
        let f = PathFunctional::AbsBrownian;
        let vals: Vec<f64> = (0..4000).map(|i| f.integrate(&BrownianPath::generate(9, i, 1, 64))).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        // E ∫_0^1 |B_r| dr = (2/3) sqrt(2/π).
        assert!(
            (mean - 2.0 / 3.0 * (2.0 / std::f64::consts::PI).sqrt()).abs() < 0.03,
            "{mean}"
        );
    }

    #[test]
    fn too_few_paths_rejected() {
        let w = ControlFn::elapsed(0.0, 1.0).unwrap();
        let mut kc = config(1.0);
        kc.paths = 10;
        assert!(khasminskii_check(|_| 0.0, &w, &kc).is_err());
    }
}
