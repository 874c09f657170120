use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SMALL: &str = r#"{
  "seed": 11,
  "study": {"family": {"kind": "sk"}, "sizes": [12, 24], "betas": [0.2], "seeds": [1, 2],
            "options": {"sweeps": 3000, "pilotSweeps": 300}, "exportTraces": true},
  "sweep": {"betas": [0.1, 0.3], "sizes": [20, 40], "samplesPerCell": 8},
  "oracle": {"instances": 3, "maxSize": 5, "restarts": 6, "mixtureSamples": 20000,
             "duplicationFunctions": 50, "dumpOptimizer": false}
}"#;

fn lsicert(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lsicert"))
        .args(args)
        .current_dir(dir)
        .env_remove("LSICERT_OUT_DIR")
        .output()
        .unwrap()
}

fn workspace() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("ok.json"),
        r#"{"n": 2, "rows": [[0, 0.4], [0.4, 0]]}"#,
    )
    .unwrap();
    fs::write(
        dir.path().join("bad.json"),
        r#"{"n": 2, "rows": [[0, 0.6], [0.6, 0]]}"#,
    )
    .unwrap();
    fs::write(
        dir.path().join("skew.json"),
        r#"{"n": 2, "rows": [[0, 0.6], [0.5, 0]]}"#,
    )
    .unwrap();
    fs::write(dir.path().join("small.json"), SMALL).unwrap();
    dir
}

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas")
}

fn validate(command: &str, doc: &Value) {
    let schema: Value = serde_json::from_str(
        &fs::read_to_string(schema_dir().join(format!("{command}.schema.json"))).unwrap(),
    )
    .unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator
        .iter_errors(doc)
        .map(|e| format!("{} at {}", e, e.instance_path))
        .collect();
    assert!(errors.is_empty(), "{command}: {errors:#?}");
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: stderr = {}", String::from_utf8_lossy(&out.stderr));
    })
}

#[test]
fn exit_codes_follow_the_certificate() {
    let dir = workspace();
    let p = dir.path();
    assert_eq!(lsicert(&["certify", "ok.json"], p).status.code(), Some(0));
    assert_eq!(lsicert(&["certify", "bad.json"], p).status.code(), Some(2));
    let missing = lsicert(&["certify", "missing.json"], p);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("missing.json"));
    let skew = lsicert(&["certify", "skew.json"], p);
    assert_eq!(skew.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&skew.stderr).contains("not symmetric"));
    assert_eq!(lsicert(&["no-such-command"], p).status.code(), Some(1));
}

#[test]
fn vector_spins_need_an_explicit_gamma() {
    let dir = workspace();
    let p = dir.path();
    let out = lsicert(&["certify", "ok.json", "--spin-dim", "2"], p);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamma"));
    let out = lsicert(
        &["certify", "ok.json", "--spin-dim", "2", "--gamma", "1.5"],
        p,
    );
    assert_eq!(out.status.code(), Some(0));
    let doc = stdout_json(&out);
    assert_eq!(doc["certificate"]["singleSpinLsi"], 1.5);
    assert_eq!(doc["config"]["spinDimension"], 2);
}

#[test]
fn renormalize_rejects_inadmissible_scales() {
    let dir = workspace();
    let p = dir.path();
    assert_eq!(
        lsicert(&["renormalize", "ok.json"], p).status.code(),
        Some(0)
    );
    // c below the spectral width cannot be reached by any shift.
    assert_eq!(
        lsicert(&["renormalize", "ok.json", "--c", "0.7"], p)
            .status
            .code(),
        Some(2)
    );
    // Width 1.2 is not below n = 1.
    assert_eq!(
        lsicert(&["renormalize", "bad.json"], p).status.code(),
        Some(2)
    );
}

#[test]
fn every_command_matches_its_schema() {
    let dir = workspace();
    let p = dir.path();
    let runs: [(&str, &[&str]); 6] = [
        ("certify", &["certify", "ok.json"]),
        ("renormalize", &["renormalize", "ok.json"]),
        (
            "spin-study",
            &["spin-study", "--spin-dim", "3", "--gamma", "1"],
        ),
        ("simulate", &["simulate", "--config", "small.json"]),
        ("oracle", &["oracle", "--config", "small.json"]),
        ("goe-sweep", &["goe-sweep", "--config", "small.json"]),
    ];
    for (command, args) in runs {
        let out = lsicert(args, p);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{command}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let doc = stdout_json(&out);
        assert_eq!(doc["command"], command);
        validate(command, &doc);
    }
}

#[test]
fn schema_rejects_a_malformed_document() {
    let dir = workspace();
    let mut doc = stdout_json(&lsicert(&["certify", "ok.json"], dir.path()));
    doc["certificate"]["status"] = Value::from("maybe");
    let schema: Value = serde_json::from_str(
        &fs::read_to_string(schema_dir().join("certify.schema.json")).unwrap(),
    )
    .unwrap();
    assert!(!jsonschema::validator_for(&schema).unwrap().is_valid(&doc));
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn output_is_byte_identical_across_runs_and_worker_counts() {
    let dir = workspace();
    let p = dir.path();
    for command in ["simulate", "oracle", "goe-sweep"] {
        for format in ["json", "csv"] {
            let mut trees = Vec::new();
            for (k, workers) in ["1", "4", "4"].iter().enumerate() {
                let out = format!("run-{command}-{format}-{k}");
                let status = lsicert(
                    &[
                        command,
                        "--config",
                        "small.json",
                        "--format",
                        format,
                        "--workers",
                        workers,
                        "--out",
                        &out,
                    ],
                    p,
                )
                .status;
                assert!(status.success());
                trees.push(read_tree(&p.join(&out)));
            }
            assert!(!trees[0].is_empty());
            assert_eq!(trees[0], trees[1], "{command} {format}: workers 1 vs 4");
            assert_eq!(trees[1], trees[2], "{command} {format}: repeated run");
        }
    }
}

#[test]
fn seed_changes_random_outputs() {
    let dir = workspace();
    let p = dir.path();
    let a = lsicert(&["goe-sweep", "--config", "small.json"], p).stdout;
    let b = lsicert(&["goe-sweep", "--config", "small.json", "--seed", "12"], p).stdout;
    assert_ne!(a, b);
    assert_eq!(
        stdout_json(&lsicert(
            &["goe-sweep", "--config", "small.json", "--seed", "12"],
            p
        ))["config"]["seed"],
        12
    );
}

#[test]
fn csv_outputs_carry_the_config_and_expected_columns() {
    let dir = workspace();
    let p = dir.path();
    let out = lsicert(&["renormalize", "ok.json", "--format", "csv"], p);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let config: Value =
        serde_json::from_str(lines.next().unwrap().strip_prefix("# config: ").unwrap()).unwrap();
    assert_eq!(config["model"]["path"], "ok.json");
    assert_eq!(
        lines.next().unwrap(),
        "abs_psi,V,V2_analytic,V2_finite_difference"
    );
    assert_eq!(lines.count(), 101);

    assert!(lsicert(
        &[
            "simulate",
            "--config",
            "small.json",
            "--format",
            "csv",
            "--out",
            "sim"
        ],
        p
    )
    .status
    .success());
    let trace = fs::read_to_string(p.join("sim/trace-N12-beta0.2-seed1-energy.csv")).unwrap();
    let mut lines = trace.lines();
    assert!(lines.next().unwrap().starts_with("# config: "));
    assert_eq!(lines.next().unwrap(), "sweep,energy");
    assert_eq!(lines.count(), 3000);
    let table = fs::read_to_string(p.join("sim/simulate.csv")).unwrap();
    assert!(table.lines().nth(1).unwrap().starts_with("size,beta,seed,"));
    assert_eq!(table.lines().count(), 2 + 4);

    assert!(
        lsicert(&["goe-sweep", "--config", "small.json", "--out", "goe"], p)
            .status
            .success()
    );
    for name in ["goe-sweep.json", "histogram-N20.csv", "histogram-N40.csv"] {
        assert!(p.join("goe").join(name).exists(), "{name}");
    }
}

#[test]
fn environment_supplies_the_default_output_directory() {
    let dir = workspace();
    let p = dir.path();
    let run = |extra: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_lsicert"))
            .args(["certify", "ok.json"])
            .args(extra)
            .current_dir(p)
            .env("LSICERT_OUT_DIR", "from-env")
            .output()
            .unwrap()
    };
    let out = run(&[]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert!(p.join("from-env/certify.json").exists());
    assert!(run(&["--out", "from-flag"]).status.success());
    assert!(p.join("from-flag/certify.json").exists());
}

#[test]
fn config_errors_point_at_the_offending_line() {
    let dir = workspace();
    let p = dir.path();
    fs::write(p.join("typo.json"), "{\n  \"seed\": 1,\n  \"sede\": 2\n}\n").unwrap();
    let out = lsicert(&["certify", "ok.json", "--config", "typo.json"], p);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("typo.json: line 3"), "{err}");
}

#[test]
fn flags_override_the_config_file() {
    let dir = workspace();
    let p = dir.path();
    fs::write(
        p.join("cfg.json"),
        r#"{"seed": 3, "spinDimension": 3, "gamma": 2.0, "model": {"kind": "mean-field", "size": 4, "strength": 0.1}}"#,
    )
    .unwrap();
    let doc = stdout_json(&lsicert(
        &["certify", "--config", "cfg.json", "--gamma", "1.0"],
        p,
    ));
    assert_eq!(doc["config"]["gamma"], 1.0);
    assert_eq!(doc["config"]["seed"], 3);
    assert_eq!(doc["certificate"]["spinDimension"], 3);
    assert_eq!(doc["size"], 4);
}
