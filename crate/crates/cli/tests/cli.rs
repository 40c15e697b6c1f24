use std::fs;
use std::process::{Command, Output};

fn rescli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rescli"))
        .args(args)
        .env("RES_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn polygon_json_for_fixture() {
    let o = rescli(&["polygon", "--fixture", "ex2.11"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let slopes: Vec<&str> = v["slopes"].as_array().unwrap().iter().map(|s| s["gamma"].as_str().unwrap()).collect();
    assert_eq!(slopes, ["1/8", "3/8"]);
    assert_eq!(v["dominant"]["J"], 1);
    assert_eq!(v["dominant"]["K"], 2);
    assert_eq!(v["generic"], true);
}

#[test]
fn non_generic_exits_two_unless_allowed() {
    let o = rescli(&["predict", "--fixture", "ex9.2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("γ̃_12 = γ̃_34"), "{}", stderr(&o));

    let o = rescli(&["polygon", "--fixture", "ex9.2"]);
    assert_eq!(o.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["generic"], false);

    let o = rescli(&["predict", "--fixture", "ex9.2", "--allow-nongeneric"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"h": 0.1, "deltas": [{"x": 0, "beta": 2, "c": 1}], "extra": 1}"#).unwrap();
    let o = rescli(&["polygon", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));

    let o = rescli(&["solve", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));

    let o = rescli(&["solve", "--fixture", "no-such-fixture"]);
    assert_eq!(o.status.code(), Some(1));

    // usage errors must not collide with the non-generic status
    let o = rescli(&["solve", "--fixture", "n2", "--window", "1,2,3"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn solve_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = rescli(&["solve", "--fixture", "n2", "--nx", "400", "--ny", "200", "--out", out, "--svg"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("resonances.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "re,im,residual,string_id,deviation,m_estimate");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert!(rows.len() > 20);
    for r in &rows {
        assert_eq!(r.len(), 6);
        let im: f64 = r[1].parse().unwrap();
        let residual: f64 = r[2].parse().unwrap();
        assert!(im <= 0.0 && residual < 1e-8);
        assert_eq!(r[3], "0");
    }
    let svg = fs::read_to_string(dir.path().join("plot.svg")).unwrap();
    assert!(svg.contains(r#"id="contours""#) && svg.contains(r#"id="roots""#) && svg.contains(r#"id="theory""#));
}

#[test]
fn compare_reports_three_strings() {
    let o = rescli(&["compare", "--fixture", "ex2.12c", "--nx", "1200", "--ny", "600"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let strings = v["strings"].as_array().unwrap();
    assert_eq!(strings.len(), 3);
    for s in strings {
        assert!(s["count"].as_u64().unwrap() > 0, "{s}");
    }
}

#[test]
fn solve_json_is_deterministic() {
    let args = ["solve", "--fixture", "n2", "--nx", "256", "--ny", "128", "--format", "json"];
    let a = rescli(&args);
    let b = rescli(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["strings"].as_array().unwrap().len(), 1);
}

#[test]
fn predict_writes_predictions_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = rescli(&["predict", "--fixture", "ex2.11", "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let pred = fs::read_to_string(dir.path().join("predictions.csv")).unwrap();
    assert!(pred.starts_with("string_id,kind,gamma,m,re,im\n"));
    assert!(pred.lines().any(|l| l.starts_with("1,flat,3/8,")));
    let curves = fs::read_to_string(dir.path().join("curves.csv")).unwrap();
    assert_eq!(curves.lines().count(), 1 + 2 * 512);
}

#[test]
fn eval_methods_agree() {
    let o = rescli(&["eval", "--fixture", "ex2.12c", "--z", "1.0,-0.2", "--method", "direct"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let diff: f64 = text
        .lines()
        .find(|l| l.contains("vs closed"))
        .and_then(|l| l.rsplit(' ').next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(diff < 1e-9, "{text}");
}

#[test]
fn fixture_config_round_trips() {
    let o = rescli(&["fixtures", "ex2.12d"]);
    assert!(o.status.success());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    fs::write(&path, &o.stdout).unwrap();
    let o = rescli(&["polygon", "--config", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["slopes"].as_array().unwrap().len(), 2);
}

#[test]
fn bad_thread_setting_is_a_config_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_rescli"))
        .args(["fixtures"])
        .env("RES_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}
