use imbalance_lab::experiments::exit_code;
use imbalance_lab::Error;
use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_imbalance-lab");

fn run(sub: &str, config: &str, dir: &Path) -> (i32, String) {
    let cfg = dir.join("config.json");
    std::fs::write(&cfg, config).unwrap();
    let out = Command::new(BIN)
        .args([sub, "--config", cfg.to_str().unwrap(), "--out", dir.join("out").to_str().unwrap(), "--threads", "2"])
        .output()
        .unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

const SMALL_SWEEP: &str = r#"{
    "instance": {"d": 2000, "n": [3, 10, 30], "s": 1.0},
    "methods": ["mm", "ma", {"method": "la", "rho": 1.0}],
    "grid": {"from": 0.0, "to": 1.0, "steps": 3},
    "seeds": [0, 1],
    "mc_samples": 2000,
    "test_per_class": 100
}"#;

#[test]
fn configuration_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let empty_grid = SMALL_SWEEP.replace(r#""steps": 3"#, r#""steps": 0"#);
    assert_eq!(run("sweep", &empty_grid, dir.path()).0, 2);
    let (code, err) = run("sweep", "{ not json", dir.path());
    assert_eq!(code, 2);
    assert!(err.contains("error"));
    assert_eq!(run("sweep", r#"{"instance": {"d": 10, "n": [1, 1], "s": 1.0}, "colour": 3}"#, dir.path()).0, 2);
    assert_eq!(run("sweep", r#"{"instance": {"d": 1, "n": [1, 1], "s": 1.0}}"#, dir.path()).0, 2);

    let missing = Command::new(BIN).args(["sweep", "--config", "/nonexistent/config.json"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
    let bad_sub = Command::new(BIN).args(["bogus", "--config", "x.json"]).output().unwrap();
    assert_eq!(bad_sub.status.code(), Some(2));
}

#[test]
fn infeasible_kernel_data_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    // the same point carries two labels
    let data = "label,f0,f1\n1,0.5,0.5\n2,0.5,0.5\n2,1.0,0.0\n";
    std::fs::write(dir.path().join("train.csv"), data).unwrap();
    std::fs::write(dir.path().join("test.csv"), data).unwrap();
    let cfg = format!(
        r#"{{"kernel": {{"train": "{0}/train.csv", "test": "{0}/test.csv", "zetas": [5.0]}},
            "methods": ["mm"], "tuning": "standard", "grid": {{"from": 0.0, "to": 0.0, "steps": 1}}, "seeds": [0]}}"#,
        dir.path().display()
    );
    let (code, err) = run("kernel", &cfg, dir.path());
    assert_eq!(code, 3, "{err}");
    assert!(err.contains("infeasible"));
}

#[test]
fn numerical_failures_map_to_4() {
    assert_eq!(exit_code(&Error::Numerical("x".into())), 4);
    assert_eq!(exit_code(&Error::Infeasible { point: 0, class: 1 }), 3);
    assert_eq!(exit_code(&Error::InvalidArgument("x".into())), 2);
    assert_eq!(exit_code(&Error::Parse { line: 1, msg: "x".into() }), 2);
}

#[test]
fn sweep_writes_csv_and_plots_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = run("sweep", SMALL_SWEEP, dir.path());
    assert_eq!(code, 0, "{err}");
    let csv = std::fs::read_to_string(dir.path().join("out/results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "method,param,seed,metric,value,analytic_value");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert!(rows.iter().all(|r| r.len() == 6));
    for label in ["mm", "ma", "la_rho=1"] {
        assert!(rows.iter().any(|r| r[0] == label && r[3] == "worst_class_error"), "{label}");
    }
    let svgs: Vec<_> = std::fs::read_dir(dir.path().join("out"))
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "svg"))
        .collect();
    assert!(!svgs.is_empty());
    let svg = std::fs::read_to_string(dir.path().join("out/worst_class_error.svg")).unwrap();
    assert!(svg.starts_with("<svg"));

    let again = tempfile::tempdir().unwrap();
    assert_eq!(run("sweep", SMALL_SWEEP, again.path()).0, 0);
    let csv2 = std::fs::read_to_string(again.path().join("out/results.csv")).unwrap();
    assert_eq!(csv, csv2);
}

#[test]
fn failure_command_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = run("cdt-failure", r#"{"epsilon": 0.1, "classes": 3}"#, dir.path());
    assert_eq!(code, 0, "{err}");
    let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(rep["n"], serde_json::json!([1, 473, 223066]));
    assert_eq!(rep["separation_holds"], true);
    assert_eq!(rep["cdt_bounds"].as_array().unwrap().len(), 61);
    // epsilon too small for the size cap
    assert_eq!(run("cdt-failure", r#"{"epsilon": 0.01, "classes": 4}"#, dir.path()).0, 2);
}

#[test]
fn help_documents_columns_and_exit_codes() {
    let out = Command::new(BIN).arg("--help").output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("analytic_value"));
    assert!(text.contains("Exit codes"));
}
