//! Superadditive control functions on the simplex, w-midpoints and the
//! dyadic-in-w partitions used by sewing-type arguments.
//!
//! A control is a map `w(s, t) >= 0`, defined for `S <= s <= t <= T`, with
//! `w(s, u) + w(u, t) <= w(s, t)` and `w(s, s) = 0`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::adaptive_simpson;

/// Default relative tolerance for w-midpoints.
pub const MIDPOINT_TOL: f64 = 1e-10;
/// Largest number of bisection steps for a w-midpoint.
pub const MIDPOINT_MAX_ITER: usize = 200;
/// Largest dyadic level accepted by [`dyadic_partition`].
pub const MAX_DYADIC_LEVEL: u32 = 20;

const DENSITY_CELLS: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlKind {
    ElapsedTime,
    LqDensity,
    SingularWeight,
    ProductInterpolation,
    Sum,
    SumWithPower,
    Scaled,
}

type Density = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

enum DensitySource {
    /// `|φ|^q` from a closed form, integrated adaptively.
    Closed { integrand: Density },
    /// `|φ|^q` at the table nodes, linearly interpolated.
    Sampled { values: Vec<f64> },
}

struct DensityTable {
    start: f64,
    end: f64,
    cells: usize,
    cumulative: Vec<f64>,
    source: DensitySource,
    /// Absolute tolerance for partial-cell quadrature.
    abs_tol: f64,
}

impl DensityTable {
    fn node(&self, i: usize) -> f64 {
        if i == self.cells {
            self.end
        } else {
            self.start + (self.end - self.start) * i as f64 / self.cells as f64
        }
    }

    fn cell_of(&self, x: f64) -> usize {
        let u = (x - self.start) / (self.end - self.start) * self.cells as f64;
        (u.floor().max(0.0) as usize).min(self.cells - 1)
    }

    fn partial(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        match &self.source {
            DensitySource::Closed { integrand } => adaptive_simpson(&|x| integrand(x), a, b, self.abs_tol).max(0.0),
            DensitySource::Sampled { values } => {
                let lin = |x: f64| {
                    let i = self.cell_of(x);
                    let (x0, x1) = (self.node(i), self.node(i + 1));
                    let w = (x - x0) / (x1 - x0);
                    values[i] * (1.0 - w) + values[i + 1] * w
                };
                0.5 * (b - a) * (lin(a) + lin(b))
            }
        }
    }

    fn window(&self, s: f64, t: f64) -> f64 {
        let (is, it) = (self.cell_of(s), self.cell_of(t));
        if is == it {
            return self.partial(s, t);
        }
        let head = self.partial(s, self.node(is + 1));
        let body = self.cumulative[it] - self.cumulative[is + 1];
        let tail = self.partial(self.node(it), t);
        head + body.max(0.0) + tail
    }
}

enum ControlImpl {
    Elapsed,
    Density(DensityTable),
    SingularWeight { nu: f64 },
    Product { w1: ControlFn, w2: ControlFn, theta: f64 },
    Sum { w1: ControlFn, w2: ControlFn },
    SumWithPower { w1: ControlFn, w2: ControlFn, power: f64 },
    Scaled { w: ControlFn, factor: f64 },
}

/// An immutable, cheaply clonable control function.
#[derive(Clone)]
pub struct ControlFn {
    kind: ControlKind,
    start: f64,
    end: f64,
    inner: Arc<ControlImpl>,
    /// Set for controls built from sampled densities.
    approximate: bool,
}

impl fmt::Debug for ControlFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlFn")
            .field("kind", &self.kind)
            .field("domain", &(self.start, self.end))
            .finish()
    }
}

fn check_domain(start: f64, end: f64) -> Result<()> {
    if !(start.is_finite() && end.is_finite() && start < end) {
        return Err(Error::Domain(format!("invalid control window [{start}, {end}]")));
    }
    Ok(())
}

impl ControlFn {
    fn build(kind: ControlKind, start: f64, end: f64, inner: ControlImpl, approximate: bool) -> Self {
        Self {
            kind,
            start,
            end,
            inner: Arc::new(inner),
            approximate,
        }
    }

    /// `w(s, t) = t - s`.
    pub fn elapsed(start: f64, end: f64) -> Result<Self> {
        check_domain(start, end)?;
        Ok(Self::build(ControlKind::ElapsedTime, start, end, ControlImpl::Elapsed, false))
    }

    /// `w(s, t) = ∫_s^t |φ(r)|^q dr` for a closed-form `φ`.
    pub fn lq_density<F>(phi: F, q: f64, start: f64, end: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        check_domain(start, end)?;
        if !(q >= 1.0 && q.is_finite()) {
            return Err(Error::Domain(format!("density exponent q = {q} must lie in [1, inf)")));
        }
        let integrand: Density = Arc::new(move |r| phi(r).abs().powf(q));
        let cells = DENSITY_CELLS;
        let h = (end - start) / cells as f64;
        // Rough scale for the absolute tolerance.
        let scale: f64 = (0..=cells)
            .map(|i| integrand(start + i as f64 * h).abs())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE)
            * (end - start);
        let abs_tol = 1e-10 * scale / cells as f64;
        let mut table = DensityTable {
            start,
            end,
            cells,
            cumulative: vec![0.0; cells + 1],
            source: DensitySource::Closed { integrand },
            abs_tol,
        };
        for i in 0..cells {
            let mass = table.partial(table.node(i), table.node(i + 1));
            table.cumulative[i + 1] = table.cumulative[i] + mass;
        }
        Ok(Self::build(
            ControlKind::LqDensity,
            start,
            end,
            ControlImpl::Density(table),
            false,
        ))
    }

    /// `w(s, t) = ∫_s^t |φ|^q` for `φ` sampled at `len` equispaced nodes
    /// spanning `[start, end]`; `|φ|^q` is interpolated linearly.
    pub fn lq_density_sampled(samples: &[f64], q: f64, start: f64, end: f64) -> Result<Self> {
        check_domain(start, end)?;
        if samples.len() < 2 {
            return Err(Error::InvalidArgument("sampled density needs at least two nodes".into()));
        }
        if !(q >= 1.0 && q.is_finite()) {
            return Err(Error::Domain(format!("density exponent q = {q} must lie in [1, inf)")));
        }
        let values: Vec<f64> = samples.iter().map(|v| v.abs().powf(q)).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("sampled density has non-finite values".into()));
        }
        let cells = values.len() - 1;
        let h = (end - start) / cells as f64;
        let mut cumulative = vec![0.0; cells + 1];
        for i in 0..cells {
            cumulative[i + 1] = cumulative[i] + 0.5 * h * (values[i] + values[i + 1]);
        }
        let table = DensityTable {
            start,
            end,
            cells,
            cumulative,
            source: DensitySource::Sampled { values },
            abs_tol: 0.0,
        };
        Ok(Self::build(
            ControlKind::LqDensity,
            start,
            end,
            ControlImpl::Density(table),
            true,
        ))
    }

    /// `w(s, t) = s^{-ν} (t - s)` on `[S, T]` with `S > 0`.
    pub fn singular_weight(nu: f64, start: f64, end: f64) -> Result<Self> {
        check_domain(start, end)?;
        if start <= 0.0 {
            return Err(Error::Domain("singular-weight control needs S > 0".into()));
        }
        if !(nu >= 0.0) {
            return Err(Error::Domain(format!("exponent nu = {nu} must be nonnegative")));
        }
        Ok(Self::build(
            ControlKind::SingularWeight,
            start,
            end,
            ControlImpl::SingularWeight { nu },
            false,
        ))
    }

    /// `w = w1^θ w2^{1-θ}` with `θ ∈ [0, 1]`.
    pub fn product(w1: ControlFn, w2: ControlFn, theta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::Domain(format!("interpolation exponent {theta} outside [0, 1]")));
        }
        let (start, end) = intersect(&w1, &w2)?;
        let approx = w1.approximate || w2.approximate;
        Ok(Self::build(
            ControlKind::ProductInterpolation,
            start,
            end,
            ControlImpl::Product { w1, w2, theta },
            approx,
        ))
    }

    pub fn sum(w1: ControlFn, w2: ControlFn) -> Result<Self> {
        let (start, end) = intersect(&w1, &w2)?;
        let approx = w1.approximate || w2.approximate;
        Ok(Self::build(ControlKind::Sum, start, end, ControlImpl::Sum { w1, w2 }, approx))
    }

    /// `w = w1 + w2^γ` with `γ >= 1`.
    pub fn sum_with_power(w1: ControlFn, w2: ControlFn, power: f64) -> Result<Self> {
        if !(power >= 1.0 && power.is_finite()) {
            return Err(Error::Domain(format!("power {power} must be >= 1")));
        }
        let (start, end) = intersect(&w1, &w2)?;
        let approx = w1.approximate || w2.approximate;
        Ok(Self::build(
            ControlKind::SumWithPower,
            start,
            end,
            ControlImpl::SumWithPower { w1, w2, power },
            approx,
        ))
    }

    /// `c · w` for `c >= 0`.
    pub fn scaled(w: ControlFn, factor: f64) -> Result<Self> {
        if !(factor >= 0.0 && factor.is_finite()) {
            return Err(Error::Domain(format!("scale factor {factor} must be finite and >= 0")));
        }
        let (start, end, approx) = (w.start, w.end, w.approximate);
        Ok(Self::build(
            ControlKind::Scaled,
            start,
            end,
            ControlImpl::Scaled { w, factor },
            approx,
        ))
    }

    pub fn kind(&self) -> ControlKind {
        self.kind
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.start, self.end)
    }

    /// True when built from sampled data; such controls are only piecewise
    /// smooth approximations of the continuous control they stand for.
    pub fn is_approximate(&self) -> bool {
        self.approximate
    }

    /// Evaluates `w(s, t)`. Arguments are clamped into the domain and
    /// `w(s, t) = 0` for `t <= s`.
    pub fn eval(&self, s: f64, t: f64) -> f64 {
        let s = s.clamp(self.start, self.end);
        let t = t.clamp(self.start, self.end);
        if t <= s {
            return 0.0;
        }
        match &*self.inner {
            ControlImpl::Elapsed => t - s,
            ControlImpl::Density(table) => table.window(s, t),
            ControlImpl::SingularWeight { nu } => s.powf(-nu) * (t - s),
            ControlImpl::Product { w1, w2, theta } => {
                let a = w1.eval(s, t);
                let b = w2.eval(s, t);
                if *theta == 1.0 {
                    a
                } else if *theta == 0.0 {
                    b
                } else {
                    a.powf(*theta) * b.powf(1.0 - theta)
                }
            }
            ControlImpl::Sum { w1, w2 } => w1.eval(s, t) + w2.eval(s, t),
            ControlImpl::SumWithPower { w1, w2, power } => w1.eval(s, t) + w2.eval(s, t).powf(*power),
            ControlImpl::Scaled { w, factor } => factor * w.eval(s, t),
        }
    }

    /// `w(S, T)`.
    pub fn total(&self) -> f64 {
        self.eval(self.start, self.end)
    }
}

fn intersect(w1: &ControlFn, w2: &ControlFn) -> Result<(f64, f64)> {
    let start = w1.start.max(w2.start);
    let end = w1.end.min(w2.end);
    check_domain(start, end)?;
    Ok((start, end))
}

/// The w-midpoint `u = inf { r ∈ [s, t] : w(s, r) >= w(s, t) / 2 }`.
///
/// Found by bisection to machine resolution; the result must satisfy
/// `|w(s, u) - w(s, t)/2| <= tol · w(s, t)`, otherwise `w` is treated as
/// discontinuous and an error is returned.
pub fn midpoint(w: &ControlFn, s: f64, t: f64, tol: f64) -> Result<f64> {
    if !(s <= t) {
        return Err(Error::Domain(format!("midpoint needs s <= t, got [{s}, {t}]")));
    }
    let total = w.eval(s, t);
    if total <= 0.0 {
        return Ok(s);
    }
    let half = 0.5 * total;
    let (mut lo, mut hi) = (s, t);
    let mut converged = false;
    for _ in 0..MIDPOINT_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            converged = true;
            break;
        }
        if w.eval(s, mid) >= half {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if !converged {
        return Err(Error::NoConvergence { s, t });
    }
    if (w.eval(s, hi) - half).abs() > tol * total {
        return Err(Error::NoConvergence { s, t });
    }
    Ok(hi)
}

/// Level-`h` dyadic partition `D^h_w(s, t)` obtained by recursive w-midpoint
/// refinement; returns `2^h + 1` ordered points.
pub fn dyadic_partition(w: &ControlFn, s: f64, t: f64, level: u32) -> Result<Vec<f64>> {
    if level > MAX_DYADIC_LEVEL {
        return Err(Error::InvalidArgument(format!(
            "dyadic level {level} exceeds the size guard {MAX_DYADIC_LEVEL}"
        )));
    }
    if !(s <= t) {
        return Err(Error::Domain(format!("partition needs s <= t, got [{s}, {t}]")));
    }
    let mut points = vec![s, t];
    for _ in 0..level {
        let mut next = Vec::with_capacity(2 * points.len() - 1);
        for pair in points.windows(2) {
            next.push(pair[0]);
            next.push(midpoint(w, pair[0], pair[1], MIDPOINT_TOL)?);
        }
        next.push(*points.last().expect("partition is never empty"));
        points = next;
    }
    Ok(points)
}

#[derive(Debug, Clone, Serialize)]
pub struct SuperadditivityReport {
    pub kind: ControlKind,
    pub triples: usize,
    pub violations: usize,
    /// Largest `(w(s,u) + w(u,t) - w(s,t)) / w(s,t)` seen.
    pub worst_relative_excess: f64,
}

/// Checks `w(s,u) + w(u,t) <= w(s,t)(1 + rel_tol)` on random ordered triples.
pub fn check_superadditivity(w: &ControlFn, triples: usize, rel_tol: f64, seed: u64) -> SuperadditivityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (start, end) = w.domain();
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..triples {
        let mut v = [
            rng.random_range(start..=end),
            rng.random_range(start..=end),
            rng.random_range(start..=end),
        ];
        v.sort_by(f64::total_cmp);
        let [s, u, t] = v;
        let whole = w.eval(s, t);
        let parts = w.eval(s, u) + w.eval(u, t);
        let excess = parts - whole;
        let rel = if whole > 0.0 { excess / whole } else { excess };
        worst = worst.max(rel);
        if excess > rel_tol * whole {
            violations += 1;
        }
    }
    SuperadditivityReport {
        kind: w.kind(),
        triples,
        violations,
        worst_relative_excess: if triples == 0 { 0.0 } else { worst },
    }
}

/// Largest `w(cell) / (2^{-h} w(s, t))` over the cells of `D^h_w(s, t)`.
pub fn partition_cell_ratio(w: &ControlFn, points: &[f64], level: u32) -> f64 {
    let total = w.eval(points[0], *points.last().expect("nonempty partition"));
    if total <= 0.0 {
        return 0.0;
    }
    let cap = total / 2f64.powi(level as i32);
    points.windows(2).map(|c| w.eval(c[0], c[1]) / cap).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn step_density() -> ControlFn {
        ControlFn::lq_density(|r| if r <= 0.5 { 2.0 } else { 0.0 }, 1.0, 0.0, 1.0).unwrap()
    }

    fn all_kinds() -> Vec<ControlFn> {
        let e = ControlFn::elapsed(0.0, 1.0).unwrap();
        let d = ControlFn::lq_density(|r| (1.0 + r).powf(-0.3) + (7.0 * r).sin(), 2.0, 0.0, 1.0).unwrap();
        let sw = ControlFn::singular_weight(0.7, 0.1, 1.0).unwrap();
        vec![
            e.clone(),
            d.clone(),
            sw.clone(),
            ControlFn::product(e.clone(), d.clone(), 0.3).unwrap(),
            ControlFn::sum(d.clone(), sw.clone()).unwrap(),
            ControlFn::sum_with_power(e.clone(), d, 1.5).unwrap(),
            ControlFn::scaled(sw, 3.0).unwrap(),
        ]
    }

    #[test]
    fn elapsed_is_additive() {
        let w = ControlFn::elapsed(0.0, 1.0).unwrap();
        assert_eq!(w.eval(0.0, 0.5) + w.eval(0.5, 1.0), w.eval(0.0, 1.0));
        assert_eq!(w.eval(0.3, 0.3), 0.0);
    }

    #[test]
    fn step_density_total_mass() {
        assert_abs_diff_eq!(step_density().total(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn product_of_elapsed_is_elapsed() {
        let e = ControlFn::elapsed(0.0, 1.0).unwrap();
        let p = ControlFn::product(e.clone(), e.clone(), 0.3).unwrap();
        for &(s, t) in &[(0.0, 1.0), (0.2, 0.7), (0.5, 0.51)] {
            assert_abs_diff_eq!(p.eval(s, t), e.eval(s, t), epsilon = 1e-15);
        }
    }

    #[test]
    fn constructor_errors() {
        assert!(matches!(ControlFn::singular_weight(0.5, 0.0, 1.0), Err(Error::Domain(_))));
        let e = ControlFn::elapsed(0.0, 1.0).unwrap();
        assert!(matches!(ControlFn::product(e.clone(), e.clone(), 1.2), Err(Error::Domain(_))));
        assert!(ControlFn::sum_with_power(e.clone(), e, 0.5).is_err());
    }

    #[test]
    fn midpoint_examples() {
        let e = ControlFn::elapsed(0.0, 1.0).unwrap();
        assert_eq!(midpoint(&e, 0.0, 1.0, MIDPOINT_TOL).unwrap(), 0.5);
        let d = step_density();
        assert_abs_diff_eq!(midpoint(&d, 0.0, 1.0, MIDPOINT_TOL).unwrap(), 0.25, epsilon = 1e-12);
        // Null window: no mass on [0.6, 0.9].
        assert_eq!(midpoint(&d, 0.6, 0.9, MIDPOINT_TOL).unwrap(), 0.6);
    }

    #[test]
    fn dyadic_examples() {
        let e = ControlFn::elapsed(0.0, 1.0).unwrap();
        assert_eq!(dyadic_partition(&e, 0.0, 1.0, 2).unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let d = step_density();
        let p = dyadic_partition(&d, 0.0, 1.0, 1).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!((p[0], p[2]), (0.0, 1.0));
        assert_abs_diff_eq!(p[1], 0.25, epsilon = 1e-12);
        assert!(dyadic_partition(&e, 0.0, 1.0, 21).is_err());
    }

    #[test]
    fn dyadic_partitions_are_nested() {
        for w in all_kinds() {
            let (s, t) = w.domain();
            let d1 = dyadic_partition(&w, s, t, 1).unwrap();
            let d2 = dyadic_partition(&w, s, t, 2).unwrap();
            assert!(d1.iter().all(|x| d2.contains(x)));
        }
    }

    #[test]
    fn superadditivity_for_every_kind() {
        for w in all_kinds() {
            let rep = check_superadditivity(&w, 1000, 1e-12, 3);
            assert_eq!(rep.violations, 0, "{:?} worst {}", rep.kind, rep.worst_relative_excess);
        }
    }

    #[test]
    fn sampled_density_is_superadditive() {
        let samples: Vec<f64> = (0..=200).map(|i| (i as f64 / 200.0 * 5.0).cos() + 1.2).collect();
        let w = ControlFn::lq_density_sampled(&samples, 1.5, 0.0, 1.0).unwrap();
        assert!(w.is_approximate());
        let rep = check_superadditivity(&w, 1000, 1e-8, 5);
        assert_eq!(rep.violations, 0);
    }

    #[test]
    fn partition_cells_are_bounded() {
        for w in all_kinds() {
            let (s, t) = w.domain();
            for h in 0..=10 {
                let pts = dyadic_partition(&w, s, t, h).unwrap();
                assert_eq!(pts.len(), (1 << h) + 1);
                assert!(partition_cell_ratio(&w, &pts, h) <= 1.0 + 1e-9, "{:?} level {h}", w.kind());
            }
        }
    }

    #[test]
    fn controls_are_continuous() {
        for w in all_kinds() {
            let (s, t) = w.domain();
            let m = 0.5 * (s + t);
            let base = w.eval(s, m);
            let moved = w.eval(s, m + 1e-9);
            assert!((moved - base).abs() < 1e-6, "{:?}", w.kind());
        }
    }

    proptest! {
        #[test]
        fn elapsed_midpoint_is_arithmetic(a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (s, t) = if a < b { (a, b) } else { (b, a) };
            let w = ControlFn::elapsed(0.0, 1.0).unwrap();
            let u = midpoint(&w, s, t, MIDPOINT_TOL).unwrap();
            prop_assert!((u - 0.5 * (s + t)).abs() <= 1e-12);
        }
    }
}
