//! Tamed Euler–Maruyama simulation for SDEs with integrable drifts.
//!
//! The scheme replaces a singular drift `b ∈ L^q_p` by a bounded
//! approximation `bⁿ` and runs Euler–Maruyama on `D_n = {j/n}`. Alongside the
//! simulator the crate provides the verifiers used to measure its strong
//! convergence rate: grid-kernel bounds, control functions, Condition B
//! certificates, a Zvonkin-PDE diagnostic and a transport-equation solver.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controls;
pub mod diagnostics;
pub mod error;
pub mod fields;
pub mod grid;
pub mod parallel;
pub mod quadrature;
pub mod rates;
pub mod rng;
pub mod scheme;
pub mod taming;
pub mod transport;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use controls::{ControlFn, ControlKind};
pub use error::{Error, Result};
pub use fields::{DiffusionField, DiffusionSpec, DriftField, DriftSpec, NormGrid, VectorField};
pub use parallel::Workers;
pub use rates::{RateConfig, RateReport, Reference};
pub use scheme::{BrownianPath, DriftModel, InitialCondition, PathResult, SchemeConfig};
pub use taming::{TameOptions, TamedDrift, TamingKind, TamingStrategy};
