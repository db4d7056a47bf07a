//! In-memory artifacts, CSV/JSON encoding and the run manifest.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Default)]
pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn push(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }
}

/// Shortest round-trip decimal, switching to exponent form outside
/// `[1e-4, 1e15)` so tiny values stay compact.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

pub fn csv_bytes<H: AsRef<str>>(headers: &[H], rows: &[Vec<String>]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(headers.iter().map(|h| h.as_ref()))?;
    for row in rows {
        w.write_record(row)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

pub fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

#[derive(Serialize)]
struct ArtifactEntry<'a> {
    name: &'a str,
    sha256: String,
}

#[derive(Serialize)]
struct Versions {
    #[serde(rename = "tamed-em-cli")]
    cli: &'static str,
    #[serde(rename = "tamed-em-core")]
    core: &'static str,
}

#[derive(Serialize)]
struct Manifest<'a> {
    subcommand: &'a str,
    config_sha256: &'a str,
    master_seed: u64,
    worker_count: usize,
    versions: Versions,
    wall_time_seconds: f64,
    artifacts: Vec<ArtifactEntry<'a>>,
}

pub struct RunInfo<'a> {
    pub subcommand: &'a str,
    pub canonical_config: &'a str,
    pub config_sha256: &'a str,
    pub master_seed: u64,
    pub workers: usize,
    pub wall_time_seconds: f64,
}

/// Writes the artifacts, the effective configuration (`config.toml`, which
/// reproduces the run) and `manifest.json` into `dir`.
pub fn write_all(dir: &Path, artifacts: &Artifacts, info: &RunInfo) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let write = |name: &str, bytes: &[u8]| {
        std::fs::write(dir.join(name), bytes).map_err(|e| CliError::Io(format!("cannot write {name}: {e}")))
    };
    for (name, bytes) in &artifacts.files {
        write(name, bytes)?;
    }
    write("config.toml", info.canonical_config.as_bytes())?;
    let manifest = Manifest {
        subcommand: info.subcommand,
        config_sha256: info.config_sha256,
        master_seed: info.master_seed,
        worker_count: info.workers,
        versions: Versions {
            cli: env!("CARGO_PKG_VERSION"),
            core: tamed_em_core::VERSION,
        },
        wall_time_seconds: info.wall_time_seconds,
        artifacts: artifacts
            .files
            .iter()
            .map(|(name, bytes)| ArtifactEntry {
                name,
                sha256: hex::encode(Sha256::digest(bytes)),
            })
            .collect(),
    };
    write("manifest.json", &json_bytes(&manifest)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_uses_plain_decimal_formatting() {
        let rows = vec![vec![fmt_f64(0.1), fmt_f64(1.5e-20), fmt_f64(-2.0), fmt_f64(0.0)]];
        let bytes = csv_bytes(&["a", "b", "c", "d"], &rows).unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap(), "a,b,c,d\n0.1,1.5e-20,-2,0\n");
        for v in [1e-300, 3.0e17, 0.3, 1.0 / 3.0] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }
}
