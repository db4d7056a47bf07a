//! Admissible taming parameters and the predicted strong-rate exponent.

use serde::Serialize;

use super::TamingKind;
use crate::error::{Error, Result};
use crate::fields::lps_value;

/// Offset used to realize a supremum over a strict inequality.
pub const STRICT_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdmissibleParams {
    pub kind: TamingKind,
    pub p: f64,
    pub q: f64,
    pub d: usize,
    /// Hölder exponent of `σσ*`.
    pub alpha: f64,
    pub p0: Option<f64>,
    pub q0: Option<f64>,
}

/// The admissible interval `(0, chi_upper]` (or open at the top) and the
/// auxiliary exponent that drives the predicted rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Admissibility {
    pub kind: TamingKind,
    pub chi_upper: f64,
    pub upper_inclusive: bool,
    /// Integrability gain for the truncations.
    pub rho: Option<f64>,
    /// Bessel order for mollification.
    pub nu: Option<f64>,
    pub alpha: f64,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PredictedRate {
    pub exponent: f64,
    /// True when the `n^{-1/2} log n` term is the binding one.
    pub log_factor: bool,
}

impl Admissibility {
    pub fn contains(&self, chi: f64) -> bool {
        chi > 0.0 && (chi < self.chi_upper || (self.upper_inclusive && chi == self.chi_upper))
    }

    /// Largest admissible `χ` (the supremum minus [`STRICT_MARGIN`] when open).
    pub fn chi_max(&self) -> f64 {
        if self.upper_inclusive {
            self.chi_upper
        } else {
            self.chi_upper - STRICT_MARGIN
        }
    }

    /// `min(χ(ρ−1), α/2, 1/2)` for truncations, `min(χν/2, α/2, 1/2)` for mollification.
    pub fn predicted_exponent(&self, chi: f64) -> PredictedRate {
        let taming_term = match (self.rho, self.nu) {
            (Some(rho), _) => chi * (rho - 1.0),
            (None, Some(nu)) => chi * nu / 2.0,
            (None, None) => f64::INFINITY,
        };
        let exponent = taming_term.min(self.alpha / 2.0).min(0.5);
        PredictedRate {
            exponent,
            log_factor: exponent == 0.5,
        }
    }
}

/// Admissible `χ` range and recommended auxiliary exponent for a taming kind.
pub fn admissible_chi(params: &AdmissibleParams) -> Result<Admissibility> {
    let AdmissibleParams {
        kind,
        p,
        q,
        d,
        alpha,
        p0,
        q0,
    } = *params;
    let lps = lps_value(d, p, q)?;
    if lps >= 1.0 {
        return Err(Error::LpsViolated { value: lps });
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("Hölder exponent alpha = {alpha} must lie in (0, 1]")));
    }
    let df = d as f64;
    let mut notes = Vec::new();
    let result = match kind {
        TamingKind::RelativeTruncation => {
            let upper = 0.5 - 1.0 / q;
            if upper <= 0.0 {
                return Err(Error::Constraint(format!(
                    "relative truncation needs chi in (0, 1/2 - 1/q] = (0, {upper}], which is empty for q = {q}"
                )));
            }
            // ρ d/p + 2/q < 2  ⇔  ρ < (2 − 2/q) p/d.
            let sup = (2.0 - 2.0 / q) * p / df;
            let rho = if sup > p { p } else { sup - STRICT_MARGIN };
            Admissibility {
                kind,
                chi_upper: upper,
                upper_inclusive: true,
                rho: Some(rho),
                nu: None,
                alpha,
                notes,
            }
        }
        TamingKind::AbsoluteTruncation => {
            let upper = 1.5 - 2.0 / q;
            // ρ (d/p + 2/q) < 2 with ρ ≤ p ∧ q.
            let sup = 2.0 / lps;
            let cap = p.min(q);
            let rho = if sup > cap { cap } else { sup - STRICT_MARGIN };
            Admissibility {
                kind,
                chi_upper: upper,
                upper_inclusive: false,
                rho: Some(rho),
                nu: None,
                alpha,
                notes,
            }
        }
        TamingKind::Mollification => {
            let upper = p / df * (1.0 - 2.0 / q);
            let bound = 1.5 - df / (2.0 * p) - 2.0 / q;
            if bound <= 0.0 {
                return Err(Error::Constraint(format!(
                    "no Bessel order nu > 0 satisfies nu < 3/2 - d/(2p) - 2/q = {bound}"
                )));
            }
            let nu = (bound - STRICT_MARGIN).min(1.0 - STRICT_MARGIN);
            match q0 {
                Some(q0) if q0.is_finite() => notes.push(format!("mollification rate assumes q0 = inf, got {q0}")),
                None => notes.push("mollification rate assumes q0 = inf (undeclared)".into()),
                _ => {}
            }
            match p0 {
                Some(p0) if 1.0 / p + 1.0 / p0 >= 1.0 => notes.push(format!(
                    "mollification rate assumes 1/p + 1/p0 < 1, got {}",
                    1.0 / p + 1.0 / p0
                )),
                None => notes.push("mollification rate assumes 1/p + 1/p0 < 1 (p0 undeclared)".into()),
                _ => {}
            }
            Admissibility {
                kind,
                chi_upper: upper,
                upper_inclusive: true,
                rho: None,
                nu: Some(nu),
                alpha,
                notes,
            }
        }
    };
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn params(kind: TamingKind, p: f64, q: f64, d: usize) -> AdmissibleParams {
        AdmissibleParams {
            kind,
            p,
            q,
            d,
            alpha: 1.0,
            p0: Some(f64::INFINITY),
            q0: Some(f64::INFINITY),
        }
    }

    #[test]
    fn absolute_truncation_interval() {
        let a = admissible_chi(&params(TamingKind::AbsoluteTruncation, 4.0, 8.0, 1)).unwrap();
        assert_abs_diff_eq!(a.chi_upper, 1.25, epsilon = 1e-15);
        assert!(!a.upper_inclusive);
        assert!(a.contains(1.2) && !a.contains(1.25));
    }

    #[test]
    fn large_chi_gives_half_with_log() {
        let a = admissible_chi(&params(TamingKind::AbsoluteTruncation, 4.0, 8.0, 1)).unwrap();
        // ρ = 2 is admissible since 2(d/p + 2/q) = 1 < 2; the recommended ρ is larger still.
        assert!(a.rho.unwrap() >= 2.0);
        let r = a.predicted_exponent(0.6);
        assert_eq!(r.exponent, 0.5);
        assert!(r.log_factor);
    }

    #[test]
    fn relative_truncation_empty_for_q_two() {
        assert!(matches!(
            admissible_chi(&params(TamingKind::RelativeTruncation, 100.0, 2.0, 1)),
            Err(Error::LpsViolated { .. }) | Err(Error::Constraint(_))
        ));
    }

    #[test]
    fn relative_truncation_rho() {
        // (2 − 2/q) p/d = 3.5 > p = 2, so ρ = p.
        let a = admissible_chi(&params(TamingKind::RelativeTruncation, 2.0, 8.0, 1)).unwrap();
        assert_eq!(a.rho, Some(2.0));
        assert_abs_diff_eq!(a.chi_upper, 0.375, epsilon = 1e-15);
        assert_abs_diff_eq!(a.predicted_exponent(0.25).exponent, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn mollification_order() {
        let a = admissible_chi(&params(TamingKind::Mollification, 2.0, 16.0, 1)).unwrap();
        // 3/2 − 1/4 − 1/8 = 1.125 > 1, so ν is capped below 1.
        assert_abs_diff_eq!(a.nu.unwrap(), 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(a.chi_upper, 2.0 * 0.875, epsilon = 1e-15);
        assert!(a.notes.is_empty());
    }

    #[test]
    fn lps_violation_is_an_error() {
        assert!(matches!(
            admissible_chi(&params(TamingKind::Mollification, 2.0, 4.0, 1)),
            Err(Error::LpsViolated { .. })
        ));
    }

    proptest! {
        #[test]
        fn recommended_exponents_satisfy_constraints(p in 2.0f64..20.0, q in 2.0f64..40.0, d in 1usize..4) {
            prop_assume!(d as f64 / p + 2.0 / q < 1.0);
            let df = d as f64;
            let a = admissible_chi(&params(TamingKind::RelativeTruncation, p, q, d)).unwrap();
            let rho = a.rho.unwrap();
            prop_assert!(rho > 1.0 && rho <= p && rho * df / p + 2.0 / q < 2.0);
            let b = admissible_chi(&params(TamingKind::AbsoluteTruncation, p, q, d)).unwrap();
            let rho = b.rho.unwrap();
            prop_assert!(rho > 1.0 && rho <= p.min(q) && rho * (df / p + 2.0 / q) < 2.0);
            let c = admissible_chi(&params(TamingKind::Mollification, p, q, d)).unwrap();
            let nu = c.nu.unwrap();
            prop_assert!(nu > 0.0 && nu < 1.0 && nu < 1.5 - df / (2.0 * p) - 2.0 / q);
        }
    }
}
