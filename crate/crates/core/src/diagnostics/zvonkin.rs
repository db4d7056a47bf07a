//! Backward PDE `∂_t U + ½ σσ*:∇²U + bⁿ·∇U = λU − bⁿ`, `U(1, ·) = 0`,
//! solved componentwise on `[-L, L]^d` (d ≤ 2) with homogeneous Dirichlet data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{DiffusionField, VectorField};

/// Damping values tried by [`solve_with_default_lambda`].
pub const LAMBDA_LADDER: [f64; 4] = [1.0, 4.0, 16.0, 64.0];
/// Target for `sup |∇U|` when choosing λ.
pub const GRADIENT_TARGET: f64 = 0.5;
/// Largest tolerated per-step growth of `max |U|`.
pub const MAX_GROWTH: f64 = 10.0;

/// Space-time discretization of `[0, 1] × [-L, L]^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdeGrid {
    /// Spatial cells per axis (`cells + 1` nodes).
    pub cells: usize,
    pub steps: usize,
    pub half_width: f64,
}

impl Default for PdeGrid {
    fn default() -> Self {
        Self {
            cells: 200,
            steps: 200,
            half_width: 8.0,
        }
    }
}

impl PdeGrid {
    fn nodes(&self) -> usize {
        self.cells + 1
    }

    fn h(&self) -> f64 {
        2.0 * self.half_width / self.cells as f64
    }

    fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.h()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ZvonkinSolution {
    pub lambda: f64,
    pub grid: PdeGrid,
    pub dim: usize,
    /// `U` at `t_k = k/steps`, node-major within a level: `u[k][node·d + h]`.
    #[serde(skip)]
    u: Vec<Vec<f64>>,
    /// `sup |∂_j U^h|` over `|x|_∞ ≤ L/2` and all time levels.
    pub sup_grad_u: f64,
}

impl ZvonkinSolution {
    fn total_nodes(&self) -> usize {
        self.grid.nodes().pow(self.dim as u32)
    }

    fn time_index(&self, t: f64) -> usize {
        ((t.clamp(0.0, 1.0) * self.grid.steps as f64).round() as usize).min(self.grid.steps)
    }

    fn node_index(&self, x: &[f64]) -> Option<usize> {
        let n = self.grid.nodes();
        let mut flat = 0usize;
        for xi in x {
            if !(xi.abs() <= self.grid.half_width) {
                return None;
            }
            let i = ((xi + self.grid.half_width) / self.grid.h()).round() as usize;
            flat = flat * n + i.min(n - 1);
        }
        Some(flat)
    }

    /// `U(t_k, ·)` at the node nearest `x`; `None` outside the box.
    pub fn value(&self, t: f64, x: &[f64]) -> Option<Vec<f64>> {
        let node = self.node_index(x)?;
        let level = &self.u[self.time_index(t)];
        Some(level[node * self.dim..(node + 1) * self.dim].to_vec())
    }

    /// Writes `∇U` (row `h`, column `j` holds `∂_j U^h`) at the nearest node.
    /// Returns `false` and writes zeros outside the box.
    pub fn grad(&self, t: f64, x: &[f64], out: &mut [f64]) -> bool {
        match self.node_index(x) {
            Some(node) => {
                gradient_at(&self.u[self.time_index(t)], &self.grid, self.dim, node, out);
                true
            }
            None => {
                out.fill(0.0);
                false
            }
        }
    }

    /// `(t_k, U(t_k, 0))` for every time level.
    pub fn center_trace(&self) -> Vec<(f64, Vec<f64>)> {
        let center = vec![0.0; self.dim];
        (0..=self.grid.steps)
            .map(|k| {
                let t = k as f64 / self.grid.steps as f64;
                (t, self.value(t, &center).unwrap_or_default())
            })
            .collect()
    }

    /// Largest `|U|` over all nodes and times.
    pub fn max_abs(&self) -> f64 {
        self.u.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn terminal_is_zero(&self) -> bool {
        self.u[self.grid.steps].iter().all(|v| *v == 0.0) && self.u[self.grid.steps].len() == self.total_nodes() * self.dim
    }
}

fn gradient_at(level: &[f64], grid: &PdeGrid, d: usize, node: usize, out: &mut [f64]) {
    let n = grid.nodes();
    let h = grid.h();
    let mut idx = [0usize; 2];
    let mut rem = node;
    for axis in (0..d).rev() {
        idx[axis] = rem % n;
        rem /= n;
    }
    let stride = |axis: usize| n.pow((d - 1 - axis) as u32);
    for comp in 0..d {
        for axis in 0..d {
            let s = stride(axis);
            let i = idx[axis];
            let at = |k: usize| level[k * d + comp];
            out[comp * d + axis] = if i == 0 {
                (at(node + s) - at(node)) / h
            } else if i == n - 1 {
                (at(node) - at(node - s)) / h
            } else {
                (at(node + s) - at(node - s)) / (2.0 * h)
            };
        }
    }
}

/// Solves `(1 + 2r_i) u_i − r_i (u_{i−1} + u_{i+1}) = f_i` with zero ends.
fn thomas(r: &[f64], rhs: &mut [f64], scratch: &mut [f64]) {
    let n = rhs.len();
    rhs[0] = 0.0;
    rhs[n - 1] = 0.0;
    // Forward sweep on interior rows 1..n−1, with c' in scratch.
    scratch[0] = 0.0;
    let mut prev_c = 0.0;
    let mut prev_d = 0.0;
    for i in 1..n - 1 {
        let a = -r[i];
        let b = 1.0 + 2.0 * r[i];
        let c = -r[i];
        let denom = b - a * prev_c;
        prev_c = c / denom;
        prev_d = (rhs[i] - a * prev_d) / denom;
        scratch[i] = prev_c;
        rhs[i] = prev_d;
    }
    for i in (1..n - 1).rev() {
        let next = if i + 1 < n - 1 { rhs[i + 1] } else { 0.0 };
        rhs[i] -= scratch[i] * next;
    }
}

/// Backward semi-implicit finite differences: diffusion implicit (Thomas in
/// 1-D, Lie splitting across axes in 2-D with the cross term explicit),
/// drift and damping explicit.
pub fn solve_backward_pde(
    drift: &dyn VectorField,
    sigma: &DiffusionField,
    lambda: f64,
    grid: &PdeGrid,
) -> Result<ZvonkinSolution> {
    let d = drift.dim();
    if d == 0 || d > 2 {
        return Err(Error::Unsupported(format!("PDE solver handles d <= 2, got d = {d}")));
    }
    if sigma.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: sigma.dim(),
        });
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("lambda = {lambda} must be positive")));
    }
    if grid.cells < 4 || grid.steps == 0 || !(grid.half_width > 0.0) {
        return Err(Error::InvalidArgument(format!("degenerate PDE grid {grid:?}")));
    }
    let n = grid.nodes();
    let total = n.pow(d as u32);
    let h = grid.h();
    let dt = 1.0 / grid.steps as f64;
    let coords: Vec<Vec<f64>> = (0..total)
        .map(|flat| {
            if d == 1 {
                vec![grid.coord(flat)]
            } else {
                vec![grid.coord(flat / n), grid.coord(flat % n)]
            }
        })
        .collect();
    let boundary: Vec<bool> = (0..total)
        .map(|flat| {
            let edge = |i: usize| i == 0 || i == n - 1;
            if d == 1 {
                edge(flat)
            } else {
                edge(flat / n) || edge(flat % n)
            }
        })
        .collect();

    let sample_drift = |t: f64| {
        let mut b = vec![0.0; total * d];
        for (flat, x) in coords.iter().enumerate() {
            drift.eval(t, x, &mut b[flat * d..(flat + 1) * d]);
        }
        b
    };
    let sample_cov = |t: f64| {
        let mut a = vec![0.0; total * d * d];
        let mut s = vec![0.0; d * d];
        for (flat, x) in coords.iter().enumerate() {
            sigma.eval(t, x, &mut s);
            for i in 0..d {
                for j in 0..d {
                    a[flat * d * d + i * d + j] = (0..d).map(|k| s[i * d + k] * s[j * d + k]).sum();
                }
            }
        }
        a
    };
    let frozen_b = drift.time_independent().then(|| sample_drift(0.0));
    let frozen_a = sigma.is_time_independent().then(|| sample_cov(0.0));
    if let Some(b) = &frozen_b {
        if let Some(bad) = b.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSamples {
                count: b.iter().filter(|v| !v.is_finite()).count(),
                first: coords[bad / d].clone(),
            });
        }
    }

    let mut levels = vec![Vec::new(); grid.steps + 1];
    levels[grid.steps] = vec![0.0; total * d];
    let mut grad = vec![0.0; d * d];
    let mut line_r = vec![0.0; n];
    let mut line_f = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    for k in (0..grid.steps).rev() {
        let t_known = (k + 1) as f64 * dt;
        let b_owned;
        let b = match &frozen_b {
            Some(b) => b,
            None => {
                b_owned = sample_drift(t_known);
                &b_owned
            }
        };
        let a_owned;
        let a = match &frozen_a {
            Some(a) => a,
            None => {
                a_owned = sample_cov(t_known);
                &a_owned
            }
        };
        let prev = &levels[k + 1];
        let mut next = vec![0.0; total * d];
        let mut forcing_max = 0.0f64;
        for flat in 0..total {
            if boundary[flat] {
                continue;
            }
            gradient_at(prev, grid, d, flat, &mut grad);
            for comp in 0..d {
                let u = prev[flat * d + comp];
                let advect: f64 = (0..d).map(|j| b[flat * d + j] * grad[comp * d + j]).sum();
                let mut rhs = u + dt * (advect - lambda * u + b[flat * d + comp]);
                if d == 2 {
                    let (i, j) = (flat / n, flat % n);
                    let at = |ii: usize, jj: usize| prev[(ii * n + jj) * d + comp];
                    let cross = (at(i + 1, j + 1) - at(i + 1, j - 1) - at(i - 1, j + 1) + at(i - 1, j - 1)) / (4.0 * h * h);
                    rhs += dt * a[flat * 4 + 1] * cross;
                }
                forcing_max = forcing_max.max(b[flat * d + comp].abs());
                next[flat * d + comp] = rhs;
            }
        }
        // Implicit diffusion sweeps.
        for axis in 0..d {
            let lines = total / n;
            for line in 0..lines {
                let node_of = |i: usize| {
                    if d == 1 {
                        i
                    } else if axis == 0 {
                        i * n + line
                    } else {
                        line * n + i
                    }
                };
                for comp in 0..d {
                    for i in 0..n {
                        let node = node_of(i);
                        line_r[i] = dt * 0.5 * a[node * d * d + axis * d + axis] / (h * h);
                        line_f[i] = next[node * d + comp];
                    }
                    thomas(&line_r, &mut line_f, &mut scratch);
                    for i in 0..n {
                        next[node_of(i) * d + comp] = line_f[i];
                    }
                }
            }
        }
        let prev_max = prev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let next_max = next.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !next_max.is_finite() {
            return Err(Error::Instability {
                step: k,
                factor: f64::INFINITY,
            });
        }
        let reference = prev_max + dt * forcing_max;
        if next_max > MAX_GROWTH * reference && next_max > 1e-300 {
            return Err(Error::Instability {
                step: k,
                factor: next_max / reference,
            });
        }
        levels[k] = next;
    }

    let interior = 0.5 * grid.half_width;
    let mut sup = 0.0f64;
    for level in &levels {
        for (flat, x) in coords.iter().enumerate() {
            if x.iter().all(|v| v.abs() <= interior + 1e-12) {
                gradient_at(level, grid, d, flat, &mut grad);
                sup = grad.iter().fold(sup, |m, g| m.max(g.abs()));
            }
        }
    }
    Ok(ZvonkinSolution {
        lambda,
        grid: *grid,
        dim: d,
        u: levels,
        sup_grad_u: sup,
    })
}

/// Solves with the smallest λ in [`LAMBDA_LADDER`] giving
/// `sup |∇U| ≤ GRADIENT_TARGET`, or the largest λ otherwise.
pub fn solve_with_default_lambda(drift: &dyn VectorField, sigma: &DiffusionField, grid: &PdeGrid) -> Result<ZvonkinSolution> {
    let mut last = None;
    for &lambda in &LAMBDA_LADDER {
        let sol = solve_backward_pde(drift, sigma, lambda, grid)?;
        if sol.sup_grad_u <= GRADIENT_TARGET {
            return Ok(sol);
        }
        last = Some(sol);
    }
    let sol = last.expect("ladder is nonempty");
    log::warn!(
        "sup |grad U| = {:.3e} exceeds {GRADIENT_TARGET} even at lambda = {}",
        sol.sup_grad_u,
        sol.lambda
    );
    Ok(sol)
}
