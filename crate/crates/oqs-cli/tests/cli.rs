//! End-to-end runs of the `oqs` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn oqs(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oqs")).args(args).arg("--out-dir").arg(dir).output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap()
}

fn schema_validates(name: &str, v: &Value) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(name);
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(v).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
}

#[test]
fn qep_preset_writes_tables_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let v = stdout_json(&oqs(&["qep", "--preset", "table1"], dir.path()));
    schema_validates("summary.schema.json", &v);
    assert_eq!(v["outputs"]["pairs"].as_array().unwrap().len(), 4);
    assert!(v["residuals"]["completeness"].as_f64().unwrap() < 1e-10);
    let csv = std::fs::read_to_string(dir.path().join("qep.csv")).unwrap();
    let first = csv.lines().nth(1).unwrap();
    // 17 significant digits
    assert!(first.contains("3.3333333333333"), "{first}");
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn missing_required_flag_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = oqs(&["transmission", "--alpha0", "0"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    schema_validates("error.schema.json", &err);
    assert!(err["error"]["message"].as_str().unwrap().contains("alpha1"));
}

#[test]
fn unknown_flag_and_bad_preset_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(oqs(&["qep", "--bogus"], dir.path()).status.code(), Some(2));
    let out = oqs(&["qep", "--preset", "fig16"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"]["kind"], "validation");
}

#[test]
fn numerical_failure_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    // The pair only collides near alpha0 = 0.66.
    let out = oqs(&["ep", "--alpha1", "1", "--alpha0-min", "0", "--alpha0-max", "0.3", "--steps", "5"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    schema_validates("error.schema.json", &stderr_json(&out));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"preset": "table1", "v0": 1.0}"#).unwrap();
    let v = stdout_json(&oqs(&["qep", "--config", cfg.to_str().unwrap()], dir.path()));
    assert_eq!(v["inputs"]["v0"], 1.0);
    assert_eq!(v["inputs"]["w1"], 0.5);
    let v = stdout_json(&oqs(&["qep", "--config", cfg.to_str().unwrap(), "--v0", "-3"], dir.path()));
    assert_eq!(v["inputs"]["v0"], -3.0);
    std::fs::write(&cfg, r#"{"w1": "half"}"#).unwrap();
    assert_eq!(oqs(&["qep", "--config", cfg.to_str().unwrap()], dir.path()).status.code(), Some(2));
}

#[test]
fn survival_is_reproducible_and_matches_oracle() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["survival", "--preset", "fig16", "--tmin", "-10", "--tmax", "10", "--oracle"];
    let v = stdout_json(&oqs(&args, a.path()));
    stdout_json(&oqs(&args, b.path()));
    assert!(v["residuals"]["max_abs_p_surv_minus_oracle"].as_f64().unwrap() < 1e-6);
    let read = |d: &Path| std::fs::read(d.join("survival.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    let text = String::from_utf8(read(a.path())).unwrap();
    assert!(text.starts_with("t,Re_c1,Im_c1,Re_c2,Im_c2,Re_c3,Im_c3,Re_c4,Im_c4,P_surv,P_oracle\n"));
}

#[test]
fn thread_cap_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let run = |n: &str| {
        Command::new(env!("CARGO_BIN_EXE_oqs"))
            .args(["zeno", "--out-dir"])
            .arg(dir.path())
            .env("OQS_THREADS", n)
            .output()
            .unwrap()
    };
    assert!(run("1").status.success());
    assert_eq!(run("zero").status.code(), Some(2));
}

#[test]
fn gnuplot_script_references_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    stdout_json(&oqs(&["zeno", "--gamma", "1", "--t", "1", "--plot", "gnuplot"], dir.path()));
    let gp = std::fs::read_to_string(dir.path().join("zeno.gp")).unwrap();
    assert!(gp.contains("'zeno.csv' using 1:2"));
}

#[test]
fn every_command_runs_with_small_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 6] = [
        &["transmission", "--preset", "fig4", "--points", "50"],
        &["poles", "--preset", "fig5", "--xi-max", "6", "--density-xi", "10", "--density-eta", "5"],
        &["sweep", "--preset", "fig11", "--steps", "21"],
        &["ep", "--preset", "figB1"],
        &["zeno"],
        &["continuum-limit", "--preset", "fig4"],
    ];
    for args in runs {
        let v = stdout_json(&oqs(args, dir.path()));
        schema_validates("summary.schema.json", &v);
    }
    let v: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("ep_summary.json")).unwrap()).unwrap();
    assert!((v["outputs"]["alpha0"].as_f64().unwrap() - 0.6598057357).abs() < 1e-8);
}
