//! Shared fixtures for the criterion benches.

use tamed_em_core::fields::{DiffusionField, DriftField};
use tamed_em_core::scheme::{DriftModel, InitialCondition, SchemeConfig};
use tamed_em_core::taming::{TameOptions, TamingStrategy};

/// `sign(x)|x|^{-0.4}` on `|x| ≤ 1`, declared in `L_2`.
pub fn singular_drift() -> DriftField {
    DriftField::power_singularity(1, 0.4, 1.0, 2.0, 16.0).expect("valid singular drift")
}

/// The singular benchmark: absolute truncation at `n^{1/2}`, elliptic noise.
pub fn singular_scheme(n: usize) -> SchemeConfig {
    SchemeConfig::new(
        n,
        InitialCondition::Point { x: vec![0.0] },
        DriftModel::Tamed {
            base: singular_drift(),
            strategy: TamingStrategy::AbsoluteTruncation { c: 1.0, chi: 0.5 },
            options: TameOptions::default(),
        },
        DiffusionField::trig_elliptic(1, 0.5).expect("valid diffusion"),
    )
}

/// Geometric Brownian motion with `μ = 0.1`, `σ = 0.2`.
pub fn gbm_scheme(n: usize) -> SchemeConfig {
    SchemeConfig::new(
        n,
        InitialCondition::Point { x: vec![1.0] },
        DriftModel::Plain(DriftField::linear(0.1, 1)),
        DiffusionField::gbm(0.2, 1e6),
    )
}
