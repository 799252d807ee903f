use std::process::{Command, Output};

fn freedens(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freedens"))
        .args(args)
        .env_remove("FREEDENS_MEMORY_MB")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Data rows of a CSV report, keyed by the header.
fn csv_rows(text: &str) -> Vec<std::collections::HashMap<String, String>> {
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let header = reader.headers().unwrap().clone();
    reader
        .records()
        .map(|r| header.iter().map(String::from).zip(r.unwrap().iter().map(String::from)).collect())
        .collect()
}

#[test]
fn lattice_density_rows() {
    let out = freedens(&["lattice-density", "--k", "2", "--t", "1", "--r", "1000", "--format", "csv"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("# command=lattice-density\n"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 1);
    let row = &rows[0];
    assert_eq!(row["r"], "1000");
    assert_eq!(row["total"], "4004001");
    assert_eq!(row["density"], format!("{}/4004001", row["hits"]));
    let err: f64 = row["error"].parse().unwrap();
    assert!(err <= 5e-3);
    assert_eq!(row["theory"], "0.607927101854");
}

#[test]
fn mobius_and_scan_agree() {
    let scan = csv_rows(&stdout(&freedens(&["lattice-density", "--k", "3", "--set", "2..=4", "--r", "30"])));
    let mobius = csv_rows(&stdout(&freedens(&[
        "lattice-density", "--k", "3", "--set", "2..=4", "--r", "30", "--method", "mobius",
    ])));
    assert_eq!(scan[0]["hits"], mobius[0]["hits"]);
}

#[test]
fn group_series_approaches_the_limit() {
    let out = freedens(&["group-series", "--k", "2", "--set", "visible", "--n-max", "60"]);
    assert!(out.status.success());
    let rows = csv_rows(&stdout(&out));
    assert_eq!(rows.len(), 60);
    assert_eq!(rows[0]["annular"], "");
    assert_eq!(rows[1]["spherical"], "8/12");
    let q: f64 = rows[59]["annular_decimal"].parse().unwrap();
    assert!((q - 6.0 / std::f64::consts::PI.powi(2)).abs() < 0.02);
    // progress stays off the data stream
    assert!(String::from_utf8(out.stderr).unwrap().contains("count table"));
}

#[test]
fn test_element_verdicts() {
    let out = freedens(&["test-elements", "--word", "aabb", "--word", "ab", "--word", "ababab", "--word", "abAB"]);
    let verdicts: Vec<String> = csv_rows(&stdout(&out)).iter().map(|r| r["is_test"].clone()).collect();
    assert_eq!(verdicts, ["true", "false", "false", "true"]);
}

#[test]
fn hybrid_and_exact_series_agree() {
    let hybrid = csv_rows(&stdout(&freedens(&["test-elements", "--n-max", "8"])));
    let exact = csv_rows(&stdout(&freedens(&["test-elements", "--n-max", "8", "--method", "exact"])));
    let hits = |rows: &[std::collections::HashMap<String, String>]| -> Vec<String> {
        rows.iter().map(|r| r["hits"].clone()).collect()
    };
    assert_eq!(hits(&hybrid), hits(&exact));
    assert_eq!(hybrid[3]["proper_powers"], "20");
}

#[test]
fn oracle_check_passes() {
    let out = freedens(&["oracle-check", "--k", "2", "--n-max", "8"]);
    assert!(out.status.success());
    assert!(csv_rows(&stdout(&out)).iter().all(|r| r["status"] == "match"));
}

#[test]
fn json_carries_config_and_rows() {
    let out = freedens(&["zeta", "--k", "2,3", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["command"], "zeta");
    assert_eq!(v["rows"][0]["visible_density"], 0.607927101854);
    assert_eq!(v["rows"][1]["k"], 3);
}

#[test]
fn deterministic_output() {
    let args = ["sample", "--n", "30", "--samples", "20000", "--seed", "7", "--exact"];
    let a = freedens(&args);
    let b = freedens(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let row = &csv_rows(&stdout(&a))[0];
    let z: f64 = row["z_score"].parse().unwrap();
    assert!(z.abs() < 5.0);
}

#[test]
fn plot_data_and_script() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("series.dat");
    let script = dir.path().join("series.gp");
    let out = freedens(&[
        "group-series", "--n-max", "20", "--format", "plot-data",
        "--output", data.to_str().unwrap(), "--plot-script", script.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let data_text = std::fs::read_to_string(&data).unwrap();
    let lines: Vec<&str> = data_text.lines().filter(|l| !l.starts_with('#')).collect();
    // n = 1 has no annular value
    assert_eq!(lines.len(), 19);
    assert_eq!(lines[0].split(' ').count(), 3);
    let gp = std::fs::read_to_string(&script).unwrap();
    assert!(gp.contains("series.dat"));
    assert!(gp.starts_with("set title"));
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        vec!["lattice-density", "--r", "10", "--bogus"],
        vec!["nonsense"],
        vec!["zeta", "--k", "1"],
        vec!["group-series", "--n-max", "5", "--set", "0"],
        vec!["group-series", "--n-max", "5", "--plot-script", "x.gp"],
        vec!["group-series", "--k", "3", "--n-max", "5", "--set", "test-elements"],
    ] {
        let out = freedens(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
        assert!(out.stdout.is_empty());
    }
}

#[test]
fn budget_errors_exit_three() {
    let out = freedens(&["group-series", "--n-max", "5000", "--memory-mb", "1"]);
    assert_eq!(out.status.code(), Some(3));
    let out = freedens(&["oracle-check", "--k", "3", "--n-max", "20"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn memory_budget_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_freedens"))
        .args(["zeta", "--threads", "1"])
        .env("FREEDENS_MEMORY_MB", "123")
        .output()
        .unwrap();
    let text = stdout(&out);
    assert!(text.contains("# memory_mb=123\n"));
    assert!(text.contains("# threads=1\n"));
}

#[test]
fn llt_check_reports_decreasing_error() {
    let rows = csv_rows(&stdout(&freedens(&["llt-check", "--n", "10,20,40", "--tail-c", "2"])));
    let errs: Vec<f64> = rows.iter().map(|r| r["sup_error"].parse().unwrap()).collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2]);
    assert!(rows[2]["tail_mass"].contains('/'));
    let dump = csv_rows(&stdout(&freedens(&["llt-check", "--dump-counts", "2"])));
    assert_eq!(dump.len(), 8);
    let total: u64 = dump.iter().map(|r| r["count"].parse::<u64>().unwrap()).sum();
    assert_eq!(total, 12);
}

#[test]
fn expected_gcd_rows() {
    let rows = csv_rows(&stdout(&freedens(&["expected-gcd", "--k", "2", "--n-max", "2"])));
    assert_eq!(rows[0]["sphere_mean"], "1/1");
    // sphere 2: eight words of gcd 1, four of gcd 2; annular averages spheres 1 and 2
    assert_eq!(rows[1]["sphere_mean"], "4/3");
    assert_eq!(rows[1]["annular"], "7/6");
}
