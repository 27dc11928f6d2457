use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn feederopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_feederopt")).args(args).output().expect("binary runs")
}

fn stdout_value(out: &Output, key: &str) -> String {
    let text = String::from_utf8_lossy(&out.stdout);
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("no `{key}` in output:\n{text}"))
        .to_string()
}

fn history(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(Result::unwrap).collect()
}

fn quick_run(out: &Path, extra: &[&str]) -> Output {
    let t1 = fixture("t1.json");
    let mut args = vec![
        "run",
        "--scenario",
        t1.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--set",
        "solver.pso.epochs=2",
        "--set",
        "solver.pso.particles=4",
    ];
    args.extend_from_slice(extra);
    let res = feederopt(&args);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    res
}

#[test]
fn run_is_deterministic_and_writes_every_table() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    quick_run(&a, &["--seed", "7"]);
    quick_run(&b, &["--seed", "7"]);
    for file in ["solution.json", "history.csv", "served.csv", "patterns.csv", "sams.csv"] {
        let left = fs::read(a.join(file)).unwrap();
        assert!(!left.is_empty(), "{file}");
        assert_eq!(left, fs::read(b.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn epochs_override_sets_history_length() {
    let dir = tempfile::tempdir().unwrap();
    quick_run(dir.path(), &[]);
    let rows = history(&dir.path().join("history.csv"));
    let mut epochs: Vec<&str> = rows.iter().map(|r| r.get(0).unwrap()).collect();
    epochs.dedup();
    assert_eq!(epochs, ["0", "1"]);
    assert_eq!(rows.len(), 8);
}

#[test]
fn pso_only_history_has_no_improvement() {
    let dir = tempfile::tempdir().unwrap();
    quick_run(dir.path(), &["--pso-only"]);
    for row in history(&dir.path().join("history.csv")) {
        assert_eq!(row.get(2), row.get(3));
    }
}

#[test]
fn thread_count_does_not_change_history() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("one"), dir.path().join("eight"));
    quick_run(&a, &["--threads", "1", "--seed", "3"]);
    quick_run(&b, &["--threads", "8", "--seed", "3"]);
    assert_eq!(fs::read(a.join("history.csv")).unwrap(), fs::read(b.join("history.csv")).unwrap());
}

#[test]
fn evaluate_reproduces_the_frozen_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let t1 = fixture("t1.json");
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&t1).unwrap()).unwrap();
    let expected: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fixture("t1.expected.json")).unwrap()).unwrap();
    let sol = dir.path().join("baseline.json");
    fs::write(&sol, doc["baseline"].to_string()).unwrap();
    let out = dir.path().join("tables");
    let res = feederopt(&[
        "evaluate",
        "--scenario",
        t1.to_str().unwrap(),
        "--solution",
        sol.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let objective: f64 = stdout_value(&res, "objective").parse().unwrap();
    assert_eq!(objective, expected["objective"].as_f64().unwrap());
    assert_eq!(stdout_value(&res, "feasible"), "true");
    for file in ["served.csv", "patterns.csv", "sams.csv"] {
        assert!(history(&out.join(file)).len() >= 2, "{file}");
    }
}

#[test]
fn all_zero_solution_serves_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let sol = dir.path().join("zero.json");
    fs::write(&sol, r#"{"freq_per_h": [[0, 0], [0, 0]], "fleet": [0, 0]}"#).unwrap();
    let t1 = fixture("t1.json");
    let res = feederopt(&["evaluate", "--scenario", t1.to_str().unwrap(), "--solution", sol.to_str().unwrap()]);
    assert!(res.status.success());
    assert_eq!(stdout_value(&res, "objective").parse::<f64>().unwrap(), 0.0);
    assert_eq!(stdout_value(&res, "cost").parse::<f64>().unwrap(), 0.0);
}

#[test]
fn over_budget_input_is_repaired_only_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let sol = dir.path().join("rich.json");
    fs::write(&sol, r#"{"freq_per_h": [[20, 20], [20, 20]], "fleet": [200, 200]}"#).unwrap();
    let t1 = fixture("t1.json");
    let base = ["evaluate", "--scenario", t1.to_str().unwrap(), "--solution", sol.to_str().unwrap()];
    let plain = feederopt(&base);
    assert!(plain.status.success());
    assert_eq!(stdout_value(&plain, "feasible"), "false");
    let mut args = base.to_vec();
    args.push("--repair");
    let repaired = feederopt(&args);
    assert_eq!(stdout_value(&repaired, "feasible"), "true");
    assert!(stdout_value(&repaired, "cost").parse::<f64>().unwrap() <= 30_000.0 * (1.0 + 1e-9));
}

#[test]
fn dimension_mismatch_exits_with_failure() {
    let dir = tempfile::tempdir().unwrap();
    let sol = dir.path().join("short.json");
    fs::write(&sol, r#"{"freq_per_h": [[1, 1]], "fleet": [0, 0]}"#).unwrap();
    let t1 = fixture("t1.json");
    let res = feederopt(&["evaluate", "--scenario", t1.to_str().unwrap(), "--solution", sol.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn oracle_writes_the_full_grid() {
    let dir = tempfile::tempdir().unwrap();
    let t1 = fixture("t1.json");
    let res = feederopt(&[
        "oracle",
        "--scenario",
        t1.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--freq-grid",
        "0,5",
        "--fleet-grid",
        "0,100",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(history(&dir.path().join("oracle_grid.csv")).len(), 64);
    let best: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("oracle_best.json")).unwrap()).unwrap();
    assert_eq!(best["fleet"].as_array().unwrap().len(), 2);

    // The best grid point evaluates to the reported objective.
    let check = feederopt(&[
        "evaluate",
        "--scenario",
        t1.to_str().unwrap(),
        "--solution",
        dir.path().join("oracle_best.json").to_str().unwrap(),
    ]);
    assert_eq!(stdout_value(&check, "objective"), stdout_value(&res, "objective"));
}

#[test]
fn oversized_grid_exits_with_failure() {
    let dir = tempfile::tempdir().unwrap();
    let t1 = fixture("t1.json");
    let grid = (0..60).map(|i| i.to_string()).collect::<Vec<_>>().join(",");
    let res = feederopt(&[
        "oracle",
        "--scenario",
        t1.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--freq-grid",
        &grid,
        "--fleet-grid",
        "0",
    ]);
    assert_eq!(res.status.code(), Some(1));
    assert!(!dir.path().join("oracle_grid.csv").exists());
}

#[test]
fn invalid_scenario_reports_violations() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(fixture("t1.json")).unwrap()).unwrap();
    doc["sams"]["cutoff_lo"] = 0.9.into();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, doc.to_string()).unwrap();
    let res = feederopt(&["run", "--scenario", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("sams.cutoff_lo"), "{err}");
    assert!(!dir.path().join("history.csv").exists());
}

#[test]
fn unknown_override_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let t1 = fixture("t1.json");
    let res = feederopt(&[
        "run",
        "--scenario",
        t1.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--set",
        "solver.pso.nope=3",
    ]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn export_history_writes_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let t1 = fixture("t1.json");
    let res = feederopt(&[
        "export-history",
        "--scenario",
        t1.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--set",
        "solver.pso.epochs=3",
        "--set",
        "solver.pso.particles=3",
        "--pso-only",
    ]);
    assert!(res.status.success());
    let conv = history(&dir.path().join("convergence.csv"));
    assert_eq!(conv.len(), 3);
    let best: Vec<f64> = conv.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(best.windows(2).all(|w| w[1] >= w[0]));
    assert!(!dir.path().join("solution.json").exists());
}
