//! Uniform time grids on [0, 1], the left-anchor map and the grid-kernel
//! integrals that appear when a frozen-coefficient scheme is compared with
//! its continuous-time counterpart.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Tolerance used to classify a time as a grid point.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// The grid `{ j/n : j = 0..=n }`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UniformGrid {
    n: usize,
}

impl UniformGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("grid needs n >= 1".into()));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn step(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// The `j`-th grid point, computed as `j / n` without accumulation.
    #[inline]
    pub fn point(&self, j: usize) -> f64 {
        j as f64 / self.n as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..=self.n).map(|j| self.point(j)).collect()
    }

    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, t: f64) -> bool {
        on_grid(t, self.n)
    }
}

/// Index `j` with `j/n <= t < (j+1)/n`, for any `t >= 0`.
fn cell_index(t: f64, n: usize) -> usize {
    let x = t * n as f64;
    let r = x.round();
    if (x - r).abs() <= BOUNDARY_TOL * n as f64 {
        r as usize
    } else {
        x.floor() as usize
    }
}

fn on_grid(t: f64, n: usize) -> bool {
    let x = t * n as f64;
    (x - x.round()).abs() <= BOUNDARY_TOL * n as f64
}

/// Index form of [`floor_time`].
pub fn floor_index(t: f64, n: usize) -> Result<usize> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("time {t} outside [0, 1]")));
    }
    Ok(cell_index(t, n).min(n))
}

/// Left anchor `k_n(t)`: the grid point `j/n` with `j/n <= t < (j+1)/n`;
/// `k_n(1) = 1`.
pub fn floor_time(t: f64, n: usize) -> Result<f64> {
    Ok(floor_index(t, n)? as f64 / n as f64)
}

/// Exact value of `∫_s^r (r - k_n(θ))^power dθ`.
///
/// The integrand is constant on every grid cell, so the integral is a finite
/// sum of `(r - j/n)^power` times the overlap of `[s, r]` with the cell.
pub fn kernel_integral(s: f64, r: f64, n: usize, power: f64) -> Result<f64> {
    kernel_integral_anchored(s, r, r, n, power)
}

/// `∫_a^b (anchor - k_n(θ))^power dθ` for `0 <= a <= b <= anchor`.
///
/// With `anchor = r` this is [`kernel_integral`]; splitting `[s, r]` at an
/// intermediate point while keeping the anchor gives additive pieces.
pub fn kernel_integral_anchored(a: f64, b: f64, anchor: f64, n: usize, power: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    if !(a >= 0.0 && a <= b && b <= anchor) || !power.is_finite() {
        return Err(Error::Domain(format!(
            "kernel integral needs 0 <= a <= b <= anchor, got a = {a}, b = {b}, anchor = {anchor}"
        )));
    }
    if anchor == a {
        return Err(Error::Domain("kernel integral needs s < r".into()));
    }
    if a == b {
        return Ok(0.0);
    }
    let nf = n as f64;
    let ja = cell_index(a, n);
    let jb = cell_index(b, n);
    let mut total = 0.0;
    for j in ja..=jb {
        let lo = (j as f64 / nf).max(a);
        let hi = ((j + 1) as f64 / nf).min(b);
        let width = hi - lo;
        if width <= 0.0 {
            continue;
        }
        let dist = anchor - j as f64 / nf;
        total += dist.powf(power) * width;
    }
    Ok(total)
}

/// The three grid-kernel inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum KernelBound {
    /// power `-1-ε`, bound `N_ε min(r-s, 1/n)^{-ε} + 1_{r∉D_n}(r-k_n(r))^{-ε}`
    MinusEps,
    /// power `-1`, bound `log(n(k_n(r)-s)) + 2`
    Log,
    /// power `-1+ε`, bound `(1/ε)(r-s)^ε`
    PlusEps,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub bound: KernelBound,
    pub s: f64,
    pub r: f64,
    pub n: usize,
    pub eps: f64,
    pub value: f64,
    pub limit: f64,
}

impl BoundCheck {
    pub fn slack(&self) -> f64 {
        self.limit - self.value
    }

    pub fn holds(&self) -> bool {
        self.value <= self.limit + 1e-12 * self.limit.abs().max(1.0)
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct KernelBoundReport {
    pub trials: usize,
    pub checks: usize,
    pub violations: Vec<BoundCheck>,
    /// Largest `limit - value` over all checks (0 when nothing was checked).
    pub max_slack: f64,
    /// Smallest `limit - value` over all checks (0 when nothing was checked).
    pub min_slack: f64,
}

/// Constant of the `-1-ε` bound: `1 + Σ_{j=1}^{10^6} j^{-1-ε}`.
///
/// The first thousand terms are summed directly and the remainder by
/// Euler-Maclaurin with two derivative corrections.
pub fn n_eps_minus(eps: f64) -> f64 {
    const DIRECT: u64 = 1000;
    const LAST: f64 = 1e6;
    let s = 1.0 + eps;
    let mut sum = 0.0;
    for j in (1..=DIRECT).rev() {
        sum += (j as f64).powf(-s);
    }
    let a = (DIRECT + 1) as f64;
    let b = LAST;
    let f = |x: f64| x.powf(-s);
    let d1 = |x: f64| -s * x.powf(-s - 1.0);
    let d3 = |x: f64| -s * (s + 1.0) * (s + 2.0) * x.powf(-s - 3.0);
    let integral = (a.powf(-eps) - b.powf(-eps)) / eps;
    let tail = integral + 0.5 * (f(a) + f(b)) + (d1(b) - d1(a)) / 12.0 - (d3(b) - d3(a)) / 720.0;
    1.0 + sum + tail
}

/// Evaluates all three inequalities at one tuple `(s, r, n, ε)`.
///
/// The logarithmic bound is undefined when `k_n(r) = s` (then `r` lies in the
/// first cell after `s` and the integral equals 1); there the logarithm is
/// read as `log max(1, n(k_n(r) - s)) = 0`.
pub fn check_kernel_bounds(s: f64, r: f64, n: usize, eps: f64) -> Result<[BoundCheck; 3]> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {eps}")));
    }
    let nf = n as f64;
    let kr = cell_index(r, n) as f64 / nf;
    let r_on_grid = on_grid(r, n);

    let minus = kernel_integral(s, r, n, -1.0 - eps)?;
    let mut minus_limit = n_eps_minus(eps) * (r - s).min(1.0 / nf).powf(-eps);
    if !r_on_grid {
        minus_limit += (r - kr).powf(-eps);
    }

    let log_value = kernel_integral(s, r, n, -1.0)?;
    let cells = (nf * (kr - s)).round().max(1.0);
    let log_limit = cells.ln() + 2.0;

    let plus = kernel_integral(s, r, n, -1.0 + eps)?;
    let plus_limit = (r - s).powf(eps) / eps;

    let mk = |bound, value, limit| BoundCheck {
        bound,
        s,
        r,
        n,
        eps,
        value,
        limit,
    };
    Ok([
        mk(KernelBound::MinusEps, minus, minus_limit),
        mk(KernelBound::Log, log_value, log_limit),
        mk(KernelBound::PlusEps, plus, plus_limit),
    ])
}

/// Samples random tuples with `s ∈ D_n`, `r ∈ (s, 1]` and checks every
/// grid-kernel inequality; all violations are returned.
pub fn verify_kernel_bounds(trials: usize, seed: u64) -> Result<KernelBoundReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = KernelBoundReport {
        trials,
        ..Default::default()
    };
    let mut max_slack = f64::NEG_INFINITY;
    let mut min_slack = f64::INFINITY;
    for _ in 0..trials {
        let n: usize = rng.random_range(1..=64);
        let i: usize = rng.random_range(0..n);
        let s = i as f64 / n as f64;
        let r = if rng.random_bool(0.25) {
            rng.random_range(i + 1..=n) as f64 / n as f64
        } else {
            let u: f64 = 1.0 - rng.random::<f64>();
            s + (1.0 - s) * u
        };
        let eps: f64 = rng.random_range(0.01..1.0);
        for check in check_kernel_bounds(s, r, n, eps)? {
            report.checks += 1;
            max_slack = max_slack.max(check.slack());
            min_slack = min_slack.min(check.slack());
            if !check.holds() {
                report.violations.push(check);
            }
        }
    }
    if report.checks > 0 {
        report.max_slack = max_slack;
        report.min_slack = min_slack;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Midpoint rule with many sub-cells; independent of the cell-sum path.
    fn brute_force(s: f64, r: f64, n: usize, power: f64) -> f64 {
        let m = 400_000;
        let h = (r - s) / m as f64;
        (0..m)
            .map(|i| {
                let theta = s + (i as f64 + 0.5) * h;
                let k = (theta * n as f64).floor() / n as f64;
                (r - k).powf(power) * h
            })
            .sum()
    }

    #[test]
    fn floor_time_examples() {
        assert_eq!(floor_time(0.3, 4).unwrap(), 0.25);
        assert_eq!(floor_time(0.25, 4).unwrap(), 0.25);
        assert_eq!(floor_time(1.0, 7).unwrap(), 1.0);
        assert_eq!(floor_time(0.0, 3).unwrap(), 0.0);
    }

    #[test]
    fn floor_time_rejects_out_of_range() {
        assert!(matches!(floor_time(-0.1, 4), Err(Error::Domain(_))));
        assert!(matches!(floor_time(1.5, 4), Err(Error::Domain(_))));
    }

    #[test]
    fn floor_time_handles_representation_error() {
        // 0.1 * 3 = 0.30000000000000004 lies on the grid D_10.
        assert_eq!(floor_index(0.1 * 3.0, 10).unwrap(), 3);
        assert_eq!(floor_index(0.7, 10).unwrap(), 7);
    }

    #[test]
    fn grid_points_are_exact() {
        let g = UniformGrid::new(7).unwrap();
        let p = g.points();
        assert_eq!(p.len(), 8);
        assert_eq!(p[0], 0.0);
        assert_eq!(p[7], 1.0);
        for w in p.windows(2) {
            assert!(w[1] > w[0]);
            assert!((w[1] - w[0] - 1.0 / 7.0).abs() < 1e-15);
        }
    }

    #[test]
    fn kernel_integral_examples() {
        assert_abs_diff_eq!(kernel_integral(0.0, 0.25, 4, -1.0).unwrap(), 1.0, epsilon = 1e-15);
        let v = kernel_integral(0.0, 1.0, 4, -1.0).unwrap();
        assert_abs_diff_eq!(v, 25.0 / 12.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v, brute_force(0.0, 1.0, 4, -1.0), epsilon = 1e-9);
        assert!(v <= 4f64.ln() + 2.0);
    }

    #[test]
    fn kernel_integral_half_power_example() {
        let v = kernel_integral(0.0, 1.0, 4, -0.5).unwrap();
        let expected = 0.25 * (1.0 + 2.0 / 3f64.sqrt() + 2f64.sqrt() + 2.0);
        assert_abs_diff_eq!(v, expected, epsilon = 1e-14);
        assert_abs_diff_eq!(expected, 1.39223, epsilon = 1e-5);
        assert!(v <= 2.0);
    }

    #[test]
    fn kernel_integral_matches_brute_force_off_grid() {
        for &(s, r, n, p) in &[(0.25, 0.83, 4, -1.3), (0.1, 0.77, 10, -0.6), (0.0, 0.33, 3, -1.0)] {
            let exact = kernel_integral(s, r, n, p).unwrap();
            // Cells straddling a jump of k_n limit the midpoint oracle to ~1e-5.
            assert_abs_diff_eq!(exact, brute_force(s, r, n, p), epsilon = 1e-4 * exact.max(1.0));
        }
    }

    #[test]
    fn kernel_integral_rejects_empty_interval() {
        assert!(kernel_integral(0.5, 0.5, 4, -1.0).is_err());
        assert!(kernel_integral(0.6, 0.5, 4, -1.0).is_err());
    }

    #[test]
    fn worked_example_slack() {
        let checks = check_kernel_bounds(0.0, 1.0, 4, 0.5).unwrap();
        let log = &checks[1];
        assert!(log.holds());
        assert_abs_diff_eq!(log.slack(), 4f64.ln() + 2.0 - 25.0 / 12.0, epsilon = 1e-14);
        assert!(checks.iter().all(BoundCheck::holds));
    }

    #[test]
    fn n_eps_matches_direct_partial_sum() {
        // Direct summation to 10^6 for a single epsilon.
        let eps = 0.3;
        let direct: f64 = 1.0 + (1..=1_000_000u64).rev().map(|j| (j as f64).powf(-1.0 - eps)).sum::<f64>();
        assert_abs_diff_eq!(n_eps_minus(eps), direct, epsilon = 1e-10);
    }

    #[test]
    fn zero_trials_give_empty_report() {
        let rep = verify_kernel_bounds(0, 1).unwrap();
        assert_eq!(rep.checks, 0);
        assert!(rep.violations.is_empty());
    }

    #[test]
    fn random_tuples_satisfy_bounds() {
        let rep = verify_kernel_bounds(2000, 11).unwrap();
        assert!(rep.violations.is_empty(), "{:?}", rep.violations.first());
        assert!(rep.min_slack >= -1e-12);
    }

    proptest! {
        #[test]
        fn floor_time_is_idempotent(t in 0.0f64..=1.0, n in 1usize..200) {
            let k = floor_time(t, n).unwrap();
            prop_assert_eq!(floor_time(k, n).unwrap(), k);
            if t < 1.0 {
                prop_assert!(k <= t + BOUNDARY_TOL);
                prop_assert!(t < k + 1.0 / n as f64);
            }
        }

        #[test]
        fn kernel_integral_is_additive(n in 1usize..40, i in 0usize..39, a in 0.0f64..1.0, b in 0.0f64..1.0, p in -1.9f64..-0.1) {
            let i = i % n;
            let s = i as f64 / n as f64;
            let r = s + (1.0 - s) * a.max(1e-3);
            let m = s + (r - s) * b;
            let whole = kernel_integral(s, r, n, p).unwrap();
            let left = kernel_integral_anchored(s, m, r, n, p).unwrap();
            let right = kernel_integral_anchored(m, r, r, n, p).unwrap();
            prop_assert!((left + right - whole).abs() <= 1e-12 * whole.max(1.0));
        }

        #[test]
        fn plus_eps_bound_holds(n in 1usize..64, i in 0usize..63, a in 0.001f64..1.0, eps in 0.01f64..1.0) {
            let i = i % n;
            let s = i as f64 / n as f64;
            let r = s + (1.0 - s) * a;
            let v = kernel_integral(s, r, n, -1.0 + eps).unwrap();
            prop_assert!(v <= (r - s).powf(eps) / eps * (1.0 + 1e-12));
        }
    }
}
