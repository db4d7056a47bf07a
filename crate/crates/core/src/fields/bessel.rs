//! Negative-order Bessel-potential norms `‖(1 − Δ)^{-ν/2} f‖_{L_2}` on a periodic box.

use rustfft::num_complex::Complex64;
use serde::Serialize;

use super::spectral::{fft_nd, signed_mode, unravel};
use crate::error::{Error, Result};

/// Energy fraction in the top modes above which aliasing is reported.
pub const ALIASING_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BesselNorm {
    pub value: f64,
    /// Fraction of spectral energy in modes with `max_axis |k| > N/4`.
    pub top_mode_fraction: f64,
    pub aliasing_warning: bool,
}

/// `‖f‖_{L_{-ν,p}}` for `f` sampled row-major on a periodic grid of the given
/// `shape` with side length `box_len` per axis. Only `p = 2` is supported.
pub fn bessel_norm(samples: &[f64], shape: &[usize], box_len: f64, nu: f64, p: f64) -> Result<BesselNorm> {
    if p != 2.0 {
        return Err(Error::Unsupported(format!(
            "Bessel-potential norms are implemented for p = 2 only (got p = {p})"
        )));
    }
    if !(nu >= 0.0) {
        return Err(Error::Domain(format!("order nu = {nu} must be >= 0")));
    }
    if !(box_len > 0.0) {
        return Err(Error::Domain(format!("box length {box_len} must be positive")));
    }
    let total: usize = shape.iter().product();
    if total != samples.len() || shape.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: total,
            got: samples.len(),
        });
    }
    let bad = samples.iter().filter(|v| !v.is_finite()).count();
    if bad > 0 {
        return Err(Error::NonFiniteSamples {
            count: bad,
            first: Vec::new(),
        });
    }
    let mut spec: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_nd(&mut spec, shape, false);

    let cell: f64 = shape.iter().map(|&n| box_len / n as f64).product();
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut idx = vec![0usize; shape.len()];
    let (mut energy, mut top, mut filtered) = (0.0, 0.0, 0.0);
    for (flat, c) in spec.iter().enumerate() {
        unravel(flat, shape, &mut idx);
        let mut xi2 = 0.0;
        let mut is_top = false;
        for (axis, &k) in idx.iter().enumerate() {
            let m = signed_mode(k, shape[axis]);
            if m.unsigned_abs() as usize > shape[axis] / 4 {
                is_top = true;
            }
            let xi = two_pi * m as f64 / box_len;
            xi2 += xi * xi;
        }
        let e = c.norm_sqr();
        energy += e;
        if is_top {
            top += e;
        }
        filtered += e * (1.0 + xi2).powf(-nu);
    }
    // Plancherel: Σ|f|² = Σ|f̂|² / N.
    let value = (filtered / total as f64 * cell).sqrt();
    let top_mode_fraction = if energy > 0.0 { top / energy } else { 0.0 };
    let aliasing_warning = top_mode_fraction > ALIASING_THRESHOLD;
    if aliasing_warning {
        log::warn!(
            "bessel_norm: {:.2e} of the energy sits in the top modes; refine the grid",
            top_mode_fraction
        );
    }
    Ok(BesselNorm {
        value,
        top_mode_fraction,
        aliasing_warning,
    })
}
