use std::process::{Command, Output};

fn carriergame(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_carriergame"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn bound_table_has_one_row_per_carrier_count() {
    let text = stdout(&carriergame(&["bound", "--K", "1..32"]));
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "K,gamma_star,p_nocoord_bound,p_nocoord_exact_iid,se_bound");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 32);
    assert_eq!(rows[0][2], 1.0);
    assert_eq!(rows[0][4], 0.0);
    assert!((rows[1][2] - 0.1180).abs() < 1e-4);
    assert!(rows.windows(2).all(|w| w[1][2] < w[0][2] && w[1][4] > w[0][4]));
}

#[test]
fn sweep_is_reproducible() {
    let args = ["sweep", "--var", "snr_db", "--values", "0,10", "--K", "4", "--trials", "500", "--seed", "9"];
    let a = stdout(&carriergame(&args));
    let b = stdout(&carriergame(&args));
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 3);
    let other = stdout(&carriergame(&[
        "sweep", "--var", "snr_db", "--values", "0,10", "--K", "4", "--trials", "500", "--seed", "10",
    ]));
    assert_ne!(a, other);
}

#[test]
fn sweep_json_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.json");
    let out = carriergame(&[
        "sweep", "--var", "theta", "--values", "0,0.5,1", "--trials", "200", "--format", "json", "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let rows = value["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[2]["p_same_best"].as_f64(), Some(1.0));
    assert_eq!(value["trials"].as_u64(), Some(200));
}

#[test]
fn solve_from_gains_file_matches_inline() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gains.txt");
    std::fs::write(&path, "1.0 0.95 0.2\n8.0 1.0 0.3\n").unwrap();
    let from_file = stdout(&carriergame(&["solve", "--gains-file", path.to_str().unwrap(), "--game", "both"]));
    let inline = stdout(&carriergame(&["solve", "--gains", "1.0,0.95,0.2;8.0,1.0,0.3", "--game", "both"]));
    assert_eq!(from_file, inline);
    let lines: Vec<&str> = inline.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("stackelberg,stackelberg_exact,threshold,1,2,"));
    assert!(lines[2].starts_with("nash,nash_exact,split,2,1,"));
}

#[test]
fn solve_json_reports_candidates_and_oracle() {
    let text = stdout(&carriergame(&["solve", "--gains", "1,0.95;8,1", "--oracle", "--format", "json"]));
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(value["candidates"]["w"].as_f64().unwrap() > value["candidates"]["u"].as_f64().unwrap());
    assert_eq!(value["stackelberg"]["branch"], "threshold");
    assert!(value.to_string().contains("grid_search"));
}

#[test]
fn oracle_compare_reports_gap() {
    let text = stdout(&carriergame(&["oracle-compare", "--K", "2", "--trials", "30", "--points-per-decade", "50"]));
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| row[header.iter().position(|h| *h == name).unwrap()];
    assert_eq!(col("instances"), "30");
    assert_eq!(col("within_tolerance"), "30");
}

#[test]
fn invalid_input_exits_with_usage_code() {
    for args in [
        &["solve", "--gains", "1;2"][..],
        &["solve", "--gains", "1,2;3"],
        &["sweep", "--var", "power", "--values", "1"],
        &["sweep", "--var", "K", "--values", "4,2"],
        &["sweep", "--var", "theta", "--values", "0,2"],
        &["bound", "--K", "5..2"],
        &["frobnicate"],
    ] {
        let out = carriergame(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn missing_gains_file_is_a_runtime_error() {
    let out = carriergame(&["solve", "--gains-file", "/nonexistent/gains.txt"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_succeeds() {
    let text = stdout(&carriergame(&["--help"]));
    for cmd in ["solve", "sweep", "bound", "oracle-compare"] {
        assert!(text.contains(cmd));
    }
}
