//! Log–log regression of error tables.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    /// Prefactor in `ε ≈ A n^{-β}`.
    pub a: f64,
    pub beta: f64,
    pub r_squared: f64,
    pub beta_stderr: f64,
    /// RMS residual of the fit `ε ≈ A n^{-1/2} log n` (levels with `n ≥ 2`).
    pub constrained_residual: f64,
    pub levels_used: Vec<usize>,
    pub levels_dropped: Vec<usize>,
}

/// Weights `(ε/se)²`, the inverse variance of `log ε` to first order.
pub fn weights_from_stderr(errors: &[f64], stderrs: &[f64]) -> Vec<f64> {
    errors
        .iter()
        .zip(stderrs)
        .map(|(e, s)| if *s > 0.0 { (e / s).powi(2) } else { 1.0 })
        .collect()
}

/// Weighted least squares of `log ε` on `log n`.
pub fn fit_rate(levels: &[usize], errors: &[f64], weights: Option<&[f64]>) -> Result<RateFit> {
    if levels.len() != errors.len() || weights.is_some_and(|w| w.len() != levels.len()) {
        return Err(Error::DimensionMismatch {
            expected: levels.len(),
            got: errors.len(),
        });
    }
    let mut used = Vec::new();
    let mut dropped = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    for (i, (&n, &e)) in levels.iter().zip(errors).enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        if e > 0.0 && e.is_finite() && n > 0 && w > 0.0 {
            used.push(n);
            xs.push((n as f64).ln());
            ys.push(e.ln());
            ws.push(w);
        } else {
            dropped.push(n);
        }
    }
    if !dropped.is_empty() {
        log::warn!("fit_rate: dropped levels with non-positive errors: {dropped:?}");
    }
    if used.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "rate fit needs at least 3 levels with positive errors, have {}",
            used.len()
        )));
    }
    let sw: f64 = ws.iter().sum();
    let xm = ws.iter().zip(&xs).map(|(w, x)| w * x).sum::<f64>() / sw;
    let ym = ws.iter().zip(&ys).map(|(w, y)| w * y).sum::<f64>() / sw;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for ((w, x), y) in ws.iter().zip(&xs).zip(&ys) {
        sxx += w * (x - xm) * (x - xm);
        sxy += w * (x - xm) * (y - ym);
        syy += w * (y - ym) * (y - ym);
    }
    if sxx <= 0.0 {
        return Err(Error::InvalidArgument("rate fit needs at least two distinct levels".into()));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let sse: f64 = ws
        .iter()
        .zip(&xs)
        .zip(&ys)
        .map(|((w, x), y)| w * (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let dof = (used.len() - 2) as f64;
    let beta_stderr = if dof > 0.0 { (sse / dof / sxx).sqrt() } else { f64::NAN };

    let constrained: Vec<(f64, f64)> = xs
        .iter()
        .zip(&ys)
        .filter(|(x, _)| x.exp() >= 2.0 - 1e-9)
        .map(|(x, y)| (*x, y - x.ln() + 0.5 * x))
        .collect();
    let constrained_residual = if constrained.is_empty() {
        f64::NAN
    } else {
        let mean = constrained.iter().map(|(_, z)| z).sum::<f64>() / constrained.len() as f64;
        (constrained.iter().map(|(_, z)| (z - mean).powi(2)).sum::<f64>() / constrained.len() as f64).sqrt()
    };

    Ok(RateFit {
        a: intercept.exp(),
        beta: -slope,
        r_squared,
        beta_stderr,
        constrained_residual,
        levels_used: used,
        levels_dropped: dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn dyadic(lo: u32, hi: u32) -> Vec<usize> {
        (lo..=hi).map(|k| 1usize << k).collect()
    }

    #[test]
    fn exact_half_power() {
        let ns = dyadic(4, 12);
        let errs: Vec<f64> = ns.iter().map(|&n| (n as f64).powf(-0.5)).collect();
        let fit = fit_rate(&ns, &errs, None).unwrap();
        assert_abs_diff_eq!(fit.beta, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn prefactor_recovered() {
        let ns = dyadic(2, 9);
        let errs: Vec<f64> = ns.iter().map(|&n| 3.0 * (n as f64).powf(-0.3)).collect();
        let fit = fit_rate(&ns, &errs, None).unwrap();
        assert_abs_diff_eq!(fit.beta, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.a, 3.0, epsilon = 1e-11);
    }

    #[test]
    fn log_corrected_law_is_distinguished() {
        let ns = dyadic(4, 12);
        let with_log: Vec<f64> = ns.iter().map(|&n| (n as f64).powf(-0.5) * (n as f64).ln()).collect();
        let pure: Vec<f64> = ns.iter().map(|&n| (n as f64).powf(-0.5)).collect();
        let a = fit_rate(&ns, &with_log, None).unwrap();
        let b = fit_rate(&ns, &pure, None).unwrap();
        assert!(a.beta < 0.5);
        assert!(a.constrained_residual < 1e-12);
        assert!(b.constrained_residual > 0.1);
    }

    #[test]
    fn non_positive_levels_dropped() {
        let ns = dyadic(1, 5);
        let errs = vec![0.5, 0.0, 0.125, -1.0, 0.03125];
        let fit = fit_rate(&ns, &errs, None).unwrap();
        assert_eq!(fit.levels_dropped, vec![4, 16]);
        assert_abs_diff_eq!(fit.beta, 1.0, epsilon = 1e-12);
        assert!(fit_rate(&ns, &[0.0, 0.0, 0.0, 1.0, 1.0], None).is_err());
    }

    #[test]
    fn weights_do_not_bias_exact_laws() {
        let ns = dyadic(3, 8);
        let errs: Vec<f64> = ns.iter().map(|&n| 0.7 * (n as f64).powf(-0.8)).collect();
        let w: Vec<f64> = (0..ns.len()).map(|i| 1.0 + i as f64).collect();
        assert_abs_diff_eq!(fit_rate(&ns, &errs, Some(&w)).unwrap().beta, 0.8, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn planted_exponents_recovered(beta in 0.05f64..2.0, a in 0.01f64..100.0, lo in 1u32..5, span in 2u32..8) {
            let ns = dyadic(lo, lo + span);
            let errs: Vec<f64> = ns.iter().map(|&n| a * (n as f64).powf(-beta)).collect();
            let fit = fit_rate(&ns, &errs, None).unwrap();
            prop_assert!((fit.beta - beta).abs() <= 1e-10);
        }
    }
}
