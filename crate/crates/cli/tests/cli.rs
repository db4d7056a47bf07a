use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_tamed-em"));
    c.env_remove("TAMED_EM_WORKERS");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn tamed-em")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("exp.toml");
    fs::write(&p, body).unwrap();
    p
}

const ZERO_DRIFT: &str = r#"
master_seed = 3

[scheme]
n = 8
x0 = { kind = "point", x = [0.5] }
drift = { kind = "zero" }
diffusion = { kind = "identity" }

[rate]
levels = [4, 8, 16]
reference = { kind = "self-convergence", n_ref = 256 }
paths = 200
"#;

#[test]
fn shipped_configs_validate() {
    let tmp = TempDir::new().unwrap();
    let mut seen = 0;
    for entry in fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        seen += 1;
        let out = tmp.path().join(path.file_stem().unwrap());
        let o = run(&["validate", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}: {}", path.display(), stderr(&o));
        let csv = fs::read_to_string(out.join("validate.csv")).unwrap();
        assert!(csv.lines().skip(1).all(|l| l.contains(",true,")), "{csv}");
    }
    assert!(seen >= 5);
}

#[test]
fn zero_drift_rate_errors_vanish() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), ZERO_DRIFT);
    let out = tmp.path().join("out");
    let o = run(&["rate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut rdr = csv::Reader::from_path(out.join("rate.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["n", "error", "stderr"]);
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let err: f64 = rec[1].parse().unwrap();
        assert!(err.abs() < 1e-12, "{rec:?}");
        rows += 1;
    }
    assert_eq!(rows, 3);
    for name in ["rate.json", "manifest.json", "config.toml"] {
        assert!(out.join(name).exists(), "{name}");
    }
}

#[test]
fn worker_count_does_not_change_artifacts() {
    let tmp = TempDir::new().unwrap();
    let gbm = configs().join("gbm_rate.toml");
    let transport = configs().join("transport_linear.toml");
    let cases: [(&str, &Path, &[&str], &str); 3] = [
        ("rate", &gbm, &["--set", "rate.paths=300"], "rate.csv"),
        ("simulate", &gbm, &[], "paths.csv"),
        (
            "transport",
            &transport,
            &["--set", "transport.paths=100", "--set", "transport.levels=[16, 32, 64]"],
            "transport.csv",
        ),
    ];
    for (cmd, cfg, extra, file) in cases {
        let mut bodies = Vec::new();
        for workers in ["1", "8"] {
            let out = tmp.path().join(format!("{cmd}-{workers}"));
            let mut args = vec![
                cmd,
                "--config",
                cfg.to_str().unwrap(),
                "--workers",
                workers,
                "--out",
                out.to_str().unwrap(),
            ];
            args.extend_from_slice(extra);
            let o = run(&args);
            assert_eq!(code(&o), 0, "{cmd}: {}", stderr(&o));
            bodies.push(fs::read(out.join(file)).unwrap());
        }
        assert_eq!(bodies[0], bodies[1], "{cmd} differs across worker counts");
    }
}

#[test]
fn workers_from_environment() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), ZERO_DRIFT);
    let out = tmp.path().join("out");
    let o = bin()
        .args(["rate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env("TAMED_EM_WORKERS", "3")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["worker_count"], 3);
}

#[test]
fn manifest_rerun_reproduces_artifacts() {
    let tmp = TempDir::new().unwrap();
    let first = tmp.path().join("first");
    let o = run(&[
        "rate",
        "--config",
        configs().join("gbm_rate.toml").to_str().unwrap(),
        "--set",
        "rate.paths=200",
        "--seed",
        "99",
        "--out",
        first.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let second = tmp.path().join("second");
    let o = run(&[
        "rate",
        "--config",
        first.join("config.toml").to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let read =
        |dir: &Path| -> serde_json::Value { serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap() };
    let (m1, m2) = (read(&first), read(&second));
    assert_eq!(m1["master_seed"], 99);
    assert_eq!(m1["config_sha256"], m2["config_sha256"]);
    assert_eq!(m1["artifacts"], m2["artifacts"]);
    assert_eq!(
        fs::read(first.join("rate.csv")).unwrap(),
        fs::read(second.join("rate.csv")).unwrap()
    );
}

#[test]
fn seed_changes_results_and_hash() {
    let tmp = TempDir::new().unwrap();
    let cfg = configs().join("gbm_rate.toml");
    let mut hashes = Vec::new();
    let mut bodies = Vec::new();
    for seed in ["1", "2"] {
        let out = tmp.path().join(seed);
        let o = run(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let m: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
        hashes.push(m["config_sha256"].clone());
        bodies.push(fs::read(out.join("paths.csv")).unwrap());
    }
    assert_ne!(hashes[0], hashes[1]);
    assert_ne!(bodies[0], bodies[1]);
}

#[test]
fn unknown_key_is_rejected_without_artifacts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &format!("{ZERO_DRIFT}\n[rate.extra]\nfoo = 1\n"));
    let out = tmp.path().join("out");
    let o = run(&["rate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("unknown field"), "{}", stderr(&o));
    assert!(!out.exists());

    let o = run(&[
        "rate",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "scheme.colour=red",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
}

#[test]
fn invalid_values_exit_2() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), ZERO_DRIFT);
    let out = tmp.path().join("out");
    for set in [
        "rate.levels=[8, 4]",
        "scheme.drift={ kind = \"power-singularity\", theta = 0.4, p = 0.5, q = 2.0 }",
        "rate.reference={ kind = \"self-convergence\", n_ref = 24 }",
        "worker_count=0",
    ] {
        let o = run(&[
            "rate",
            "--config",
            cfg.to_str().unwrap(),
            "--set",
            set,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 2, "{set}: {}", stderr(&o));
        assert!(!out.exists());
    }
    let o = run(&["zvonkin", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("missing [zvonkin]"));
    let o = run(&["rate", "--config", tmp.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let o = run(&["rate"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn numerical_failure_exits_3() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"
[scheme]
n = 4
x0 = { kind = "point", x = [1.0] }
drift = { kind = "linear", a = 1e200 }
diffusion = { kind = "zero" }

[simulate]
paths = 2
"#,
    );
    let out = tmp.path().join("out");
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("numerical failure"));
    assert!(!out.exists());
}

#[test]
fn failed_verifier_exits_3_without_artifacts() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = run(&[
        "validate",
        "--config",
        configs().join("singular_rate.toml").to_str().unwrap(),
        "--set",
        "scheme.taming={ kind = \"absolute-truncation\", C = 1.0, chi = 1.4 }",
        "--set",
        "validate.levels=[16]",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("taming admissibility"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn every_subcommand_produces_artifacts() {
    let tmp = TempDir::new().unwrap();
    let singular = configs().join("singular_rate.toml");
    let cases: [(&str, PathBuf, &[&str], &[&str]); 5] = [
        ("mlmc", configs().join("gbm_rate.toml"), &[], &["mlmc.csv", "mlmc.json"]),
        (
            "khasminskii",
            configs().join("khasminskii.toml"),
            &[],
            &["khasminskii.csv", "khasminskii.json"],
        ),
        (
            "zvonkin",
            singular.clone(),
            &["--set", "zvonkin.grid={ cells = 100, steps = 100, half_width = 8.0 }"],
            &["zvonkin.csv", "zvonkin_center.csv", "zvonkin.json"],
        ),
        (
            "varpi",
            singular.clone(),
            &[
                "--set",
                "varpi.paths=50",
                "--set",
                "varpi.levels=[16, 64]",
                "--set",
                "varpi.n_ref=1024",
            ],
            &["varpi.csv", "varpi.json"],
        ),
        (
            "rate",
            singular,
            &[
                "--set",
                "rate.levels=[16, 32, 64]",
                "--set",
                "rate.reference.n_ref=1024",
                "--set",
                "rate.paths=100",
            ],
            &["rate.csv", "rate.json"],
        ),
    ];
    for (cmd, cfg, extra, files) in cases {
        let out = tmp.path().join(cmd);
        let mut args = vec![cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        let o = run(&args);
        assert_eq!(code(&o), 0, "{cmd}: {}", stderr(&o));
        for f in files {
            let bytes = fs::read(out.join(f)).unwrap_or_else(|_| panic!("{cmd}: {f} missing"));
            assert!(!bytes.is_empty());
        }
    }
    let report: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("rate/rate.json")).unwrap()).unwrap();
    assert_eq!(report["predicted"]["exponent"], 0.5);
    let z = fs::read_to_string(tmp.path().join("zvonkin/zvonkin.csv")).unwrap();
    let grads: Vec<f64> = z
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(grads.windows(2).all(|w| w[1] < w[0]), "{grads:?}");
}
