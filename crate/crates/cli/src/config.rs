//! Experiment configuration: a TOML tree with `--set` overrides, parsed into
//! typed sections with unknown keys rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tamed_em_core::diagnostics::{PathFunctional, PdeGrid};
use tamed_em_core::transport::InitialDatum;
use tamed_em_core::{DiffusionSpec, DriftSpec, InitialCondition, NormGrid, TameOptions, TamingStrategy};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub master_seed: u64,
    pub worker_count: Option<usize>,
    /// Output directory; `--out` takes precedence.
    pub output: Option<String>,
    pub scheme: Option<SchemeSection>,
    pub rate: Option<RateSection>,
    pub simulate: Option<SimulateSection>,
    pub mlmc: Option<MlmcSection>,
    pub transport: Option<TransportSection>,
    pub zvonkin: Option<ZvonkinSection>,
    pub varpi: Option<VarpiSection>,
    pub khasminskii: Option<KhasminskiiSection>,
    pub validate: Option<ValidateSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    /// Step count used by `simulate`, `zvonkin` and `varpi`.
    pub n: usize,
    pub x0: InitialCondition,
    pub drift: DriftSpec,
    pub diffusion: DiffusionSpec,
    pub taming: Option<TamingStrategy>,
    #[serde(default = "one")]
    pub quadrature_nodes: usize,
    pub norm_grid: Option<NormGrid>,
    /// Hölder exponent of `σσ*` used for the predicted rate.
    #[serde(default = "one_f")]
    pub alpha: f64,
}

impl SchemeSection {
    pub fn tame_options(&self) -> TameOptions {
        TameOptions {
            norm_grid: self.norm_grid.unwrap_or_default(),
            ..TameOptions::default()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ReferenceSpec {
    SelfConvergence { n_ref: usize },
    ExactGbm { mu: f64, sigma: f64 },
    ExactLinearOde { a: f64 },
    ExactDriftedBrownian { c: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSection {
    pub levels: Vec<usize>,
    pub reference: ReferenceSpec,
    pub paths: usize,
    #[serde(default = "two")]
    pub p_bar: f64,
    #[serde(default = "batches")]
    pub batches: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Record {
    Terminal,
    Full,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub paths: usize,
    #[serde(default = "terminal")]
    pub record: Record,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Payoff {
    /// First component of `X_1`.
    Identity,
    /// `|X_1|²`.
    Square,
    /// `max(X_1[0] − strike, 0)`.
    Call { strike: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlmcSection {
    pub n0: usize,
    pub paths_per_level: Vec<usize>,
    pub payoff: Payoff,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TransportReference {
    /// Exact characteristics for `b(x) = −κx`; the scheme drift must be that untamed linear field.
    Linear {
        kappa: f64,
    },
    SelfConvergence {
        n_ref: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportSection {
    pub rho: InitialDatum,
    pub taus: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub levels: Vec<usize>,
    pub paths: usize,
    pub brownian_steps: usize,
    pub reference: TransportReference,
    pub r_bar: f64,
    pub l: f64,
    /// Spatial integrability of the drift; `inf` is allowed.
    pub p: f64,
    #[serde(default = "batches")]
    pub batches: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZvonkinSection {
    #[serde(default)]
    pub grid: PdeGrid,
    /// Empty means the default ladder.
    #[serde(default)]
    pub lambdas: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BoundSpec {
    MixedNorm { p1: f64, q1: f64 },
    Bessel { nu: f64, p: f64, q: f64, nodes: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarpiSection {
    pub levels: Vec<usize>,
    pub n_ref: usize,
    pub paths: usize,
    #[serde(default = "two")]
    pub p_bar: f64,
    /// Solve the Zvonkin PDE per level and include `∇U`.
    #[serde(default)]
    pub with_grad_u: bool,
    #[serde(default)]
    pub grid: PdeGrid,
    pub bound: Option<BoundSpec>,
    #[serde(default = "batches")]
    pub batches: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KhasminskiiSection {
    pub lambdas: Vec<f64>,
    #[serde(default = "one_f")]
    pub gamma: f64,
    pub paths: usize,
    pub steps: usize,
    #[serde(default = "one")]
    pub dim: usize,
    pub beta: PathFunctional,
    /// `w(s, t) = scale · (t − s)`.
    pub w_scale: f64,
    #[serde(default = "batches")]
    pub batches: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSection {
    #[serde(default = "kernel_trials")]
    pub kernel_trials: usize,
    #[serde(default = "thousand")]
    pub control_triples: usize,
    #[serde(default = "thousand")]
    pub condition_b_windows: usize,
    #[serde(default = "thousand")]
    pub condition_a_samples: usize,
    /// Levels for Condition B; defaults to the rate levels or `scheme.n`.
    #[serde(default)]
    pub levels: Vec<usize>,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self {
            kernel_trials: kernel_trials(),
            control_triples: thousand(),
            condition_b_windows: thousand(),
            condition_a_samples: thousand(),
            levels: Vec::new(),
        }
    }
}

fn one() -> usize {
    1
}
fn one_f() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn batches() -> usize {
    10
}
fn terminal() -> Record {
    Record::Terminal
}
fn kernel_trials() -> usize {
    10_000
}
fn thousand() -> usize {
    1000
}

/// A parsed configuration together with its canonical text and digest.
pub struct Loaded {
    pub config: ExperimentConfig,
    pub canonical: String,
    pub sha256: String,
}

/// Reads `path`, applies `key=value` overrides and deserializes the result.
pub fn load(path: &Path, overrides: &[String], seed: Option<u64>) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::Config(format!("{}: {}", path.display(), e.message())))?;
    for item in overrides {
        apply_override(&mut table, item)?;
    }
    if let Some(seed) = seed {
        let seed = i64::try_from(seed).map_err(|_| CliError::Config(format!("seed {seed} exceeds the TOML integer range")))?;
        table.insert("master_seed".into(), toml::Value::Integer(seed));
    }
    let config: ExperimentConfig = table
        .clone()
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
    // Worker count and output location do not affect results, so they are
    // left out of the digest.
    let mut hashed = table;
    hashed.remove("worker_count");
    hashed.remove("output");
    let canonical = toml::to_string(&hashed).map_err(|e| CliError::Config(e.to_string()))?;
    let sha256 = hex::encode(Sha256::digest(canonical.as_bytes()));
    Ok(Loaded {
        config,
        canonical,
        sha256,
    })
}

/// `a.b.c=value`, where `value` is read as a TOML value and falls back to a
/// plain string.
fn apply_override(table: &mut toml::Table, item: &str) -> Result<(), CliError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override '{item}' is not of the form key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("override key '{key}' is malformed")));
    }
    let value = parse_value(raw.trim());
    let mut cursor = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cursor
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override '{key}': '{part}' is not a table")))?;
    }
    cursor.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}
