use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gsm_core::derivpoly::TableJson;
use gsm_core::{build_coeff_table, CoeffTable};

fn gsm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gsm")).args(args).env_remove("GSM_PRECISION_BITS").output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("terminated by signal")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn read(p: &Path) -> String {
    fs::read_to_string(p).unwrap()
}

#[test]
fn table_prints_rows() {
    let out = gsm(&["table", "--m", "3", "--kmax", "4"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "0: 1\n1: 1\n2: 1 2\n3: 1 6 2\n4: 1 12 20\n");
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&gsm(&["table", "--m", "1", "--kmax", "3"])), 2);
    assert_eq!(code(&gsm(&["wedge", "classify", "--theta", "2", "--s", "1", "--m", "2"])), 2);
    assert_eq!(code(&gsm(&["wedge", "classify", "--theta", "0", "--s", "1", "--m", "2", "--space", "roumieu"])), 2);
    assert_eq!(code(&gsm(&["nonsense"])), 2);
    let out = gsm(&["probe", "run", "--m", "4", "--theta", "1/4", "--kmax", "10"]);
    assert_eq!(code(&out), 2, "θ below 2/m is a hypothesis error");
}

#[test]
fn failed_checks_exit_1() {
    let ok = gsm(&["gs", "bound", "--theta", "1", "--kmax", "24"]);
    assert_eq!(code(&ok), 0, "{}", stdout(&ok));
    let strict = gsm(&["gs", "bound", "--theta", "1", "--kmax", "24", "--max-slope=-1"]);
    assert_eq!(code(&strict), 1);
    assert!(stdout(&strict).contains("FAIL"));
}

#[test]
fn verifiers_pass() {
    for args in [
        &["verify", "coeffs", "--m", "2", "--kmax", "20"][..],
        &["verify", "identities", "--m", "3", "--kmax", "30", "--jmax", "2"],
        &["probe", "criterion", "--m", "2", "--theta", "1", "--s", "1/2", "--jmax", "3"],
    ] {
        let out = gsm(args);
        assert_eq!(code(&out), 0, "{args:?}: {}", stdout(&out));
        assert!(!stdout(&out).contains("FAIL"));
    }
}

#[test]
fn identities_run_each_theta_once() {
    let out = stdout(&gsm(&["verify", "identities", "--m", "2", "--kmax", "12", "--jmax", "1"]));
    assert_eq!(out.matches("ratio-bound").count(), 1);
}

#[test]
fn wedge_classify_json() {
    let out = gsm(&["--json", "wedge", "classify", "--theta", "1/2", "--s", "1", "--m", "3", "--space", "beurling"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["verdict"], "Unknown");
    assert_eq!(v["citation"], "beurling-excluded-point");
    assert_eq!(v["boundary_excluded"], true);
}

#[test]
fn out_dir_resolves_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    let out = gsm(&["--out-dir", dir.path().to_str().unwrap(), "table", "--m", "4", "--kmax", "12", "--out", "t.json"]);
    assert_eq!(code(&out), 0);
    let doc: TableJson = serde_json::from_str(&read(&dir.path().join("t.json"))).unwrap();
    assert_eq!(CoeffTable::from_json(&doc).unwrap(), build_coeff_table(4, 12).unwrap());
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let runs = |threads: &str, tag: &str| -> Vec<String> {
        let svg = format!("fig{tag}.svg");
        let csv = format!("fig{tag}.csv");
        let probe = format!("probe{tag}.csv");
        let seminorm = format!("sn{tag}.csv");
        for args in [
            vec!["wedge", "figure", "--m", "4", "--space", "beurling", "--format", "svg", "--out", &svg],
            vec!["wedge", "figure", "--m", "3", "--format", "csv", "--out", &csv, "--monomial"],
            vec!["probe", "run", "--m", "3", "--theta", "3/2", "--kmax", "20", "--csv", &probe],
            vec!["gs", "seminorm", "--kind", "h", "--h", "1", "--theta", "1", "--s", "2", "--kmax", "5", "--grid", "uniform:0:3:7", "--csv", &seminorm],
        ] {
            let mut full = vec!["--threads", threads, "--out-dir", d];
            full.extend(args);
            let out = gsm(&full);
            assert_eq!(code(&out), 0, "{full:?}: {}", String::from_utf8_lossy(&out.stderr));
        }
        [svg, csv, probe, seminorm].iter().map(|f| read(&dir.path().join(f))).collect()
    };
    assert_eq!(runs("1", "a"), runs("4", "b"));
}

#[test]
fn precision_env_var_is_honoured() {
    let run = |bits: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_gsm"));
        cmd.args(["probe", "run", "--m", "2", "--theta", "3/2", "--kmax", "10"]);
        match bits {
            Some(b) => cmd.env("GSM_PRECISION_BITS", b),
            None => cmd.env_remove("GSM_PRECISION_BITS"),
        };
        cmd.output().unwrap()
    };
    let default = run(None);
    let high = run(Some("512"));
    assert_eq!(code(&default), 0);
    assert_eq!(code(&high), 0);
    assert_eq!(code(&run(Some("not-a-number"))), 2);
}
