//! Gaussian mollification on a periodic box via FFT convolution.

use rustfft::num_complex::Complex64;

use super::TameOptions;
use crate::error::{Error, Result};
use crate::fields::spectral::{fft_nd, signed_mode, unravel};
use crate::fields::{DriftField, VectorField};

/// Upper limit on the total number of mollifier grid nodes.
pub const MAX_MOLLIFIER_NODES: usize = 1 << 24;

/// Minimum number of grid nodes per kernel standard deviation.
const NODES_PER_STD: f64 = 4.0;

/// Mollified field sampled on the periodic grid `-L + i·h`, `h = 2L/N`,
/// evaluated off-grid at the nearest node.
#[derive(Debug, Clone)]
pub struct MollifiedGrid {
    dim: usize,
    nodes: usize,
    half_width: f64,
    h: f64,
    /// Node-major: `values[node·d + c]`.
    values: Vec<f64>,
    sup: f64,
}

impl MollifiedGrid {
    pub(super) fn build(base: &DriftField, variance: f64, options: &TameOptions) -> Result<Self> {
        if !base.time_independent() {
            return Err(Error::Unsupported(format!(
                "mollification of the time-dependent field '{}'",
                base.name()
            )));
        }
        let d = base.dim();
        let l = options.norm_grid.half_width;
        let std = variance.sqrt();
        let h_max = std / NODES_PER_STD;
        let nodes = match options.mollifier_nodes {
            Some(n) => {
                if 2.0 * l / n as f64 > h_max {
                    return Err(Error::Domain(format!(
                        "mollifier grid spacing {} is coarser than kernel width {std}/{NODES_PER_STD}",
                        2.0 * l / n as f64
                    )));
                }
                n
            }
            None => ((2.0 * l / h_max).ceil() as usize).next_power_of_two().max(64),
        };
        let total = nodes
            .checked_pow(d as u32)
            .filter(|&t| t <= MAX_MOLLIFIER_NODES)
            .ok_or_else(|| Error::InvalidArgument(format!("mollifier grid {nodes}^{d} exceeds {MAX_MOLLIFIER_NODES} nodes")))?;
        let h = 2.0 * l / nodes as f64;
        let shape = vec![nodes; d];

        // Discrete kernel on periodic offsets, normalized to unit mass.
        let mut idx = vec![0usize; d];
        let mut kernel: Vec<Complex64> = (0..total)
            .map(|flat| {
                unravel(flat, &shape, &mut idx);
                let r2: f64 = idx
                    .iter()
                    .map(|&k| {
                        let z = signed_mode(k, nodes) as f64 * h;
                        z * z
                    })
                    .sum();
                Complex64::new((-0.5 * r2 / variance).exp(), 0.0)
            })
            .collect();
        let mass: f64 = kernel.iter().map(|c| c.re).sum();
        kernel.iter_mut().for_each(|c| *c /= mass);
        fft_nd(&mut kernel, &shape, false);

        // Samples of the base field, nudged off declared singular points.
        let mut samples = vec![0.0; total * d];
        let mut x = vec![0.0; d];
        let mut nudged = 0usize;
        for flat in 0..total {
            unravel(flat, &shape, &mut idx);
            for (xi, &k) in x.iter_mut().zip(&idx) {
                *xi = -l + k as f64 * h;
            }
            if base
                .singular_points()
                .iter()
                .any(|p| p.iter().zip(&x).all(|(a, b)| (a - b).abs() <= 1e-12 * l))
            {
                x.iter_mut().for_each(|v| *v += 0.5 * h);
                nudged += 1;
            }
            base.eval(0.0, &x, &mut samples[flat * d..(flat + 1) * d]);
        }
        if nudged > 0 {
            log::info!("mollifier: nudged {nudged} node(s) off singular points by half a cell");
        }
        let bad = samples.iter().filter(|v| !v.is_finite()).count();
        if bad > 0 {
            return Err(Error::NonFiniteSamples {
                count: bad,
                first: Vec::new(),
            });
        }

        let mut values = vec![0.0; total * d];
        let mut buf = vec![Complex64::new(0.0, 0.0); total];
        for c in 0..d {
            for (slot, flat) in buf.iter_mut().zip(0..total) {
                *slot = Complex64::new(samples[flat * d + c], 0.0);
            }
            fft_nd(&mut buf, &shape, false);
            for (b, k) in buf.iter_mut().zip(&kernel) {
                *b *= k;
            }
            fft_nd(&mut buf, &shape, true);
            for (flat, b) in buf.iter().enumerate() {
                values[flat * d + c] = b.re / total as f64;
            }
        }
        let sup = values
            .chunks(d)
            .map(|v| v.iter().map(|a| a * a).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        Ok(Self {
            dim: d,
            nodes,
            half_width: l,
            h,
            values,
            sup,
        })
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.nodes
    }

    /// Largest Euclidean magnitude over the grid; exact for nearest-node evaluation.
    pub fn sup(&self) -> f64 {
        self.sup
    }

    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        let mut flat = 0usize;
        for xi in x.iter().take(self.dim) {
            let k = ((xi + self.half_width) / self.h).round();
            let k = if k.is_nan() {
                0.0
            } else {
                k.clamp(0.0, (self.nodes - 1) as f64)
            } as usize;
            flat = flat * self.nodes + k;
        }
        out.copy_from_slice(&self.values[flat * self.dim..(flat + 1) * self.dim]);
    }
}
