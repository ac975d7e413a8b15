use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn eiv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eiv"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn column<'a>(csv: &'a str, idx: usize) -> Vec<&'a str> {
    csv.lines().skip(1).map(|l| l.split(',').nth(idx).unwrap()).collect()
}

#[test]
fn no_arguments_prints_usage_and_exits_one() {
    let o = eiv(&[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"));
    assert!(stdout(&o).is_empty());
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let o = eiv(&["regress"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"));
}

#[test]
fn help_exits_zero() {
    let o = eiv(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("simulate"));
}

#[test]
fn list_scenarios_names_seven_designs() {
    let o = eiv(&["list-scenarios"]);
    assert!(o.status.success());
    let names: Vec<String> = stdout(&o)
        .lines()
        .map(|l| l.split('\t').next().unwrap().to_string())
        .collect();
    assert_eq!(
        names,
        ["table2", "table3", "table4", "table5", "table6", "table7", "appendix"]
    );
}

#[test]
fn table_two_has_four_estimators_at_both_sizes() {
    let o = eiv(&["table", "2", "--reps", "4", "--seed", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("estimator,coefficient,n,bias,rmse,ci_low,ci_high,"));
    let pairs: Vec<(String, String)> = out
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[2].to_string())
        })
        .collect();
    let mut expect = Vec::new();
    for n in ["200", "2000"] {
        for e in ["OLS", "MM", "DetMCD", "DetS"] {
            expect.push((e.to_string(), n.to_string()));
        }
    }
    assert_eq!(pairs, expect);
    assert!(column(&out, 10).iter().all(|s| *s == "1"));
    assert!(stderr(&o).contains("4/4"));
}

#[test]
fn simulate_overrides_and_json_output() {
    let o = eiv(&[
        "simulate", "--scenario", "table6", "--n", "100,150", "--reps", "6", "--estimators",
        "ols,geom", "--format", "json",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0]["estimator"], "OLS");
    assert_eq!(rows[1]["estimator"], "GEOM");
    assert_eq!(rows[2]["n"], 150);
    assert_eq!(rows[0]["replications"], 6);
    assert_eq!(rows[0]["seed"], 20_200_301);
}

#[test]
fn scenario_file_is_accepted_and_unknown_keys_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let good = r#"{
        "name": "custom", "n": 60, "replications": 5, "beta": [1.0],
        "regressor_law": [{"law": "normal", "mean": 0.0, "sd": 2.0}],
        "noise_sd": 1.0, "estimators": ["OLS", "DetMCD"], "seed": 9
    }"#;
    let path = dir.path().join("custom.json");
    std::fs::write(&path, good).unwrap();
    let o = eiv(&["simulate", "--scenario", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 3);
    assert!(column(&stdout(&o), 10).iter().all(|s| *s == "9"));

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, good.replace("\"seed\"", "\"sed\"")).unwrap();
    let o = eiv(&["simulate", "--scenario", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("sed"));
}

#[test]
fn invalid_parameters_exit_one() {
    assert_eq!(eiv(&["table", "9"]).status.code(), Some(1));
    assert_eq!(eiv(&["table", "6", "--reps", "0"]).status.code(), Some(1));
    assert_eq!(eiv(&["table", "6", "--format", "xml"]).status.code(), Some(1));
    assert_eq!(
        eiv(&["simulate", "--scenario", "table4", "--estimators", "geom", "--reps", "2"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn out_writes_manifest_and_requires_force() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t6.csv");
    let args = [
        "table", "6", "--reps", "8", "--seed", "5", "--out", out.to_str().unwrap(),
    ];
    let o = eiv(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
    let first = std::fs::read(&out).unwrap();

    let manifest_path = dir.path().join("t6.csv.manifest.json");
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&manifest_path).unwrap()).unwrap();
    assert_eq!(m["seed"], 5);
    assert_eq!(m["id"], "table6");
    assert_eq!(m["artifacts"][0], out.to_str().unwrap());
    assert!(m["command_line"].as_str().unwrap().contains("table 6 --reps 8 --seed 5"));
    assert!(m["started_at"].is_string() && m["finished_at"].is_string());
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));

    let again = eiv(&args);
    assert_eq!(again.status.code(), Some(1));
    assert!(stderr(&again).contains("--force"));

    let mut forced = args.to_vec();
    forced.push("--force");
    assert!(eiv(&forced).status.success());
    assert_eq!(std::fs::read(&out).unwrap(), first);
}

#[test]
fn thread_count_does_not_change_output() {
    let run = |t: &str| {
        let o = eiv(&["table", "2", "--reps", "6", "--threads", t]);
        assert!(o.status.success(), "{}", stderr(&o));
        stdout(&o)
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn analyze_fixture_reports_difference() {
    let data = fixture("un_synthetic.csv");
    let o = eiv(&[
        "analyze",
        "--data",
        data.to_str().unwrap(),
        "--response",
        "infant.mortality",
        "--regressors",
        "gdp",
        "--boot",
        "200",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "row,coefficient,estimate,se_classical,se_bootstrap");
    assert!(lines[1].starts_with("OLS,"));
    assert!(lines[2].starts_with("DetMCD,"));
    assert!(lines[3].starts_with("DetMCD - OLS,"));
    assert!(out.contains("dropped = 4"));
}

#[test]
fn analyze_data_problems_exit_two() {
    let data = fixture("un_synthetic.csv");
    let missing_col = eiv(&[
        "analyze", "--data", data.to_str().unwrap(), "--response", "mortality", "--regressors",
        "gdp",
    ]);
    assert_eq!(missing_col.status.code(), Some(2));
    let missing_file = eiv(&[
        "analyze", "--data", "/nonexistent/un.csv", "--response", "a", "--regressors", "b",
    ]);
    assert_eq!(missing_file.status.code(), Some(2));
    assert!(stderr(&missing_file).contains("/nonexistent/un.csv"));
}

#[test]
fn analyze_small_bootstrap_is_a_usage_error() {
    let data = fixture("un_synthetic.csv");
    let o = eiv(&[
        "analyze", "--data", data.to_str().unwrap(), "--response", "infant.mortality",
        "--regressors", "gdp", "--boot", "10",
    ]);
    assert_eq!(o.status.code(), Some(1));
}
