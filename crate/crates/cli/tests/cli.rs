use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dirjump"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

const BM: &str = r#"{"schema_version": 1,
  "model": {"dim": 1, "coeff": {"family": "constant", "params": [1.0], "lambda": 1.0}, "kernel": {"family": "zero"}},
  "grid": {"dim": 1, "extent": 1.0, "h": 0.25, "boundary_mode": "restricted"},
  "claims": ["thm_2_7"]}"#;

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn list_claims_prints_every_id() {
    let o = bin().arg("list-claims").output().unwrap();
    assert_eq!(code(&o), 0);
    let s = String::from_utf8(o.stdout).unwrap();
    assert_eq!(s.lines().count(), 11);
    assert!(s.contains("prop_4_1a") && s.contains("nash"));
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", &BM.replacen("\"claims\"", "\"clams\"", 1));
    let o = bin().arg("run").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("clams"));
}

#[test]
fn unknown_claim_and_low_path_count_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", BM);
    let o = bin().args(["run", "--claims", "thm_9_9", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(code(&o), 2);
    let low = write(dir.path(), "low.json", &BM.replacen("\"claims\"", "\"mc\": {\"n_paths\": 10}, \"claims\"", 1));
    let o = bin().args(["run", "--claims", "prop_3_2", "--config"]).arg(&low).output().unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn missing_config_exits_2() {
    let o = bin().args(["validate", "--config", "/nonexistent/config.json"]).output().unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn validate_brownian_passes() {
    let o = bin().arg("validate").arg("--config").arg(configs().join("bm1d.json")).output().unwrap();
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["pass_symmetry"], true);
}

#[test]
fn validate_violating_kernel_exits_3_with_witness() {
    let o = bin().arg("validate").arg("--config").arg(configs().join("violating.json")).output().unwrap();
    assert_eq!(code(&o), 3);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("comparability") && err.contains("witness"), "{err}");
}

#[test]
fn asymmetric_kernel_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let text = BM.replace(r#"{"family": "zero"}"#, r#"{"family": "stable-like", "alpha": 0.5, "asym_perturbation": 0.3}"#);
    let cfg = write(dir.path(), "asym.json", &text);
    let o = bin().arg("validate").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("symmetry"));
    let o = bin().arg("run").arg("--config").arg(&cfg).arg("--out").arg(dir.path().join("r")).output().unwrap();
    assert_eq!(code(&o), 3);
}

#[test]
fn violating_harnack_run_exits_4_with_counterexample() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let o = bin().arg("run").arg("--config").arg(configs().join("violating.json")).arg("--out").arg(&out).output().unwrap();
    assert_eq!(code(&o), 4);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("thm_2_7.json")).unwrap()).unwrap();
    assert_eq!(v["pass"], false);
    assert!(v["fitted_constants"]["counterexample_amplification"].as_f64().unwrap() >= 10.0);
}

#[test]
fn run_writes_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", BM);
    let out = dir.path().join("r");
    let o = bin().args(["run", "--seed", "5", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("thm_2_7.json")).unwrap()).unwrap();
    for key in ["claim_id", "fitted_constants", "tolerance", "pass", "diagnostics", "config_digest", "seed"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["seed"], 5);
    assert_eq!(v["config_digest"].as_str().unwrap().len(), 64);
    let csv = std::fs::read_to_string(out.join("thm_2_7.csv")).unwrap();
    assert!(csv.starts_with("index,kind,sup_u,inf_u,ratio\n"));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));
}

#[test]
fn seed_changes_the_digest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", BM);
    let digest = |seed: &str| {
        let out = dir.path().join(seed);
        bin().args(["run", "--seed", seed, "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("thm_2_7.json")).unwrap()).unwrap();
        v["config_digest"].as_str().unwrap().to_string()
    };
    assert_ne!(digest("1"), digest("2"));
}

#[test]
fn export_operator_writes_generator() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", BM);
    let out = dir.path().join("op.json");
    let o = bin().arg("export-operator").arg("--config").arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# dirjump generator"));
    let nnz: usize = text.lines().nth(2).unwrap().rsplit(' ').next().unwrap().parse().unwrap();
    let entries: Vec<(usize, usize, f64)> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            let f: Vec<&str> = l.split(' ').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    assert_eq!(entries.len(), nnz);
    // Nearest-neighbour Brownian generator on 9 nodes: symmetric off-diagonal part.
    for &(i, j, q) in &entries {
        if i != j {
            assert!(q > 0.0);
            assert!(entries.iter().any(|&(a, b, r)| a == j && b == i && r == q));
        }
    }
    let no_grid = write(dir.path(), "ng.json", &BM.replacen(r#""grid": {"dim": 1, "extent": 1.0, "h": 0.25, "boundary_mode": "restricted"},"#, "", 1));
    let o = bin().arg("export-operator").arg("--config").arg(&no_grid).output().unwrap();
    assert_eq!(code(&o), 2);
}
