//! Tensor-product quadrature for mixed `L^q_p` norms over a truncated box.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::VectorField;
use crate::error::{Error, Result};
use crate::quadrature::trapezoid_weights;

/// Default half-width `L` of the spatial box `[-L, L]^d`.
pub const DEFAULT_HALF_WIDTH: f64 = 8.0;

/// Discretization used by [`mixed_norm`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormGrid {
    pub half_width: f64,
    /// Points per spatial axis.
    pub resolution: usize,
    /// Time nodes on the window for time-dependent fields.
    pub time_nodes: usize,
}

impl Default for NormGrid {
    fn default() -> Self {
        Self {
            half_width: DEFAULT_HALF_WIDTH,
            resolution: 1025,
            time_nodes: 33,
        }
    }
}

impl NormGrid {
    fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return Err(Error::Domain(format!("box half-width {} must be positive", self.half_width)));
        }
        if self.resolution < 8 {
            return Err(Error::InvalidArgument(format!(
                "norm grid needs at least 8 points per axis, got {}",
                self.resolution
            )));
        }
        if self.time_nodes < 2 {
            return Err(Error::InvalidArgument("norm grid needs at least 2 time nodes".into()));
        }
        Ok(())
    }
}

fn check_exponent(name: &str, v: f64) -> Result<()> {
    if v >= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("exponent {name} = {v} must lie in [1, inf]")))
    }
}

/// Spatial quadrature nodes, with nodes on singular points nudged by half a cell.
struct SpatialGrid {
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl SpatialGrid {
    fn new(field: &dyn VectorField, grid: &NormGrid) -> Self {
        let d = field.dim();
        let n = grid.resolution;
        let l = grid.half_width;
        let h = 2.0 * l / (n - 1) as f64;
        let axis_w = trapezoid_weights(n, h);
        let total = n.pow(d as u32);
        let mut nodes = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        let mut idx = vec![0usize; d];
        let mut nudged = 0usize;
        for flat in 0..total {
            super::spectral::unravel(flat, &vec![n; d], &mut idx);
            let mut x: Vec<f64> = idx.iter().map(|&i| -l + i as f64 * h).collect();
            let on_singular = field
                .singular_points()
                .iter()
                .any(|p| p.iter().zip(&x).all(|(a, b)| (a - b).abs() <= 1e-12 * l));
            if on_singular {
                x.iter_mut().for_each(|v| *v += 0.5 * h);
                nudged += 1;
            }
            weights.push(idx.iter().map(|&i| axis_w[i]).product());
            nodes.push(x);
        }
        if nudged > 0 {
            log::info!("nudged {nudged} quadrature node(s) off singular points by half a cell");
        }
        Self { nodes, weights }
    }

    /// Per-component `‖f_c(t, ·)‖_{L_p}` on the box.
    fn component_norms(&self, field: &dyn VectorField, t: f64, p: f64) -> Result<Vec<f64>> {
        let k = field.out_dim();
        let mut acc = vec![0.0f64; k];
        let mut buf = vec![0.0; k];
        let mut bad = 0usize;
        let mut first = None;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            field.eval(t, x, &mut buf);
            if buf.iter().any(|v| !v.is_finite()) {
                bad += 1;
                if first.is_none() {
                    let mut loc = vec![t];
                    loc.extend_from_slice(x);
                    first = Some(loc);
                }
                continue;
            }
            for (a, v) in acc.iter_mut().zip(&buf) {
                if p.is_infinite() {
                    *a = a.max(v.abs());
                } else {
                    *a += w * v.abs().powf(p);
                }
            }
        }
        if bad > 0 {
            return Err(Error::NonFiniteSamples {
                count: bad,
                first: first.unwrap_or_default(),
            });
        }
        if p.is_finite() {
            acc.iter_mut().for_each(|a| *a = a.powf(1.0 / p));
        }
        Ok(acc)
    }
}

/// `‖f_t‖_{L_p([-L,L]^d)}`, maximum over components.
pub fn slice_lp_norm(field: &dyn VectorField, t: f64, p: f64, grid: &NormGrid) -> Result<f64> {
    check_exponent("p", p)?;
    grid.validate()?;
    let space = SpatialGrid::new(field, grid);
    Ok(space.component_norms(field, t, p)?.into_iter().fold(0.0, f64::max))
}

/// `‖f‖_{L^q_p([s,t])}`: composite trapezoid in space over `[-L, L]^d`,
/// then a trapezoid of `‖f_r‖^q_{L_p}` in time. Vector fields take the
/// maximum over components.
pub fn mixed_norm(field: &dyn VectorField, p: f64, q: f64, window: (f64, f64), grid: &NormGrid) -> Result<f64> {
    check_exponent("p", p)?;
    check_exponent("q", q)?;
    grid.validate()?;
    let (s, t) = window;
    if !(s <= t) {
        return Err(Error::Domain(format!("norm window [{s}, {t}] is reversed")));
    }
    if s == t {
        return Ok(0.0);
    }
    let space = SpatialGrid::new(field, grid);
    let per_component: Vec<f64> = if field.time_independent() {
        let norms = space.component_norms(field, s, p)?;
        let length = if q.is_infinite() { 1.0 } else { (t - s).powf(1.0 / q) };
        norms.into_iter().map(|v| v * length).collect()
    } else {
        let m = grid.time_nodes;
        let dt = (t - s) / (m - 1) as f64;
        let slices = (0..m)
            .into_par_iter()
            .map(|i| space.component_norms(field, s + i as f64 * dt, p))
            .collect::<Result<Vec<_>>>()?;
        let weights = trapezoid_weights(m, dt);
        (0..field.out_dim())
            .map(|c| {
                if q.is_infinite() {
                    slices.iter().map(|row| row[c]).fold(0.0, f64::max)
                } else {
                    slices
                        .iter()
                        .zip(&weights)
                        .map(|(row, w)| w * row[c].powf(q))
                        .sum::<f64>()
                        .powf(1.0 / q)
                }
            })
            .collect()
    };
    Ok(per_component.into_iter().fold(0.0, f64::max))
}
