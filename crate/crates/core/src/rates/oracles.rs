//! Closed-form strong solutions used as exact references.

/// A strong solution expressible through `x₀`, `t` and `B_t` alone.
pub trait ExactSolution: Send + Sync {
    fn dim(&self) -> usize;

    /// `X_t` given `x₀` and the driving Brownian value `B_t`.
    fn value(&self, t: f64, x0: &[f64], b_t: &[f64], out: &mut [f64]);

    fn name(&self) -> &str;
}

/// `dX = μX dt + σX dB`: `X_t = x₀ exp((μ − σ²/2)t + σB_t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricBrownian {
    pub mu: f64,
    pub sigma: f64,
}

impl ExactSolution for GeometricBrownian {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, t: f64, x0: &[f64], b_t: &[f64], out: &mut [f64]) {
        out[0] = x0[0] * ((self.mu - 0.5 * self.sigma * self.sigma) * t + self.sigma * b_t[0]).exp();
    }

    fn name(&self) -> &str {
        "geometric-brownian"
    }
}

/// `dX = aX dt`: `X_t = x₀ e^{at}` in every component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearOde {
    pub a: f64,
    pub dim: usize,
}

impl ExactSolution for LinearOde {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, t: f64, x0: &[f64], _b_t: &[f64], out: &mut [f64]) {
        let g = (self.a * t).exp();
        for (o, x) in out.iter_mut().zip(x0) {
            *o = x * g;
        }
    }

    fn name(&self) -> &str {
        "linear-ode"
    }
}

/// `dX = c dt + dB`: `X_t = x₀ + ct + B_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftedBrownian {
    pub c: Vec<f64>,
}

impl ExactSolution for DriftedBrownian {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn value(&self, t: f64, x0: &[f64], b_t: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = x0[k] + self.c[k] * t + b_t[k];
        }
    }

    fn name(&self) -> &str {
        "drifted-brownian"
    }
}
