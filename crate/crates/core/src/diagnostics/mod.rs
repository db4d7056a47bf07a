//! Zvonkin-PDE solver, drift-error functional ϖₙ and its norm proxies, and
//! an empirical Khasminskii checker.

mod khasminskii;
mod varpi;
mod zvonkin;

pub use khasminskii::{
    khasminskii_check, moment_check, KhasminskiiConfig, KhasminskiiReport, MomentCheck, PathFunctional, MIN_KHASMINSKII_PATHS,
};
pub use varpi::{
    estimate_varpi, varpi_bound_from_norms, DifferenceField, VarpiBound, VarpiBoundMode, VarpiConfig, VarpiEstimate, VarpiMode,
};
pub use zvonkin::{
    solve_backward_pde, solve_with_default_lambda, PdeGrid, ZvonkinSolution, GRADIENT_TARGET, LAMBDA_LADDER, MAX_GROWTH,
};
