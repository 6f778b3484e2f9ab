use std::path::Path;
use std::process::{Command, Output};

const FIG2: &str = r#"{"n1": 10, "n2": 8, "alpha1": 4.5, "alpha2": 4.7,
    "p1_over_p2_db": 15, "lambda1": 0.0005, "lambda2": 0.001}"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hetnet-in"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("net.json");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

fn csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_owned).collect();
    (header, lines.map(|l| l.split(',').map(str::to_owned).collect()).collect())
}

fn is_nine_digit_sci(field: &str) -> bool {
    let Some((mantissa, exp)) = field.split_once('e') else { return false };
    let digits = mantissa.trim_start_matches('-');
    exp.parse::<i32>().is_ok() && digits.len() == 10 && digits.as_bytes()[1] == b'.'
}

#[test]
fn coverage_json_fields() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), FIG2);
    let text = stdout(&["coverage", "--config", &cfg, "--beta-db", "10"]);
    let v: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
    for key in ["a1", "a2", "s1", "s2", "s"] {
        let x = v[key].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&x), "{key} = {x}");
    }
    assert_eq!(v["mode"], "non-IN");
    let text = stdout(&["coverage", "--config", &cfg, "--u-max", "9", "--t-joint", "10"]);
    let v: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
    assert_eq!(v["mode"], "IN");
    assert_eq!(stdout(&["coverage", "--beta-db", "0:20:2"]).lines().count(), 11);
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let args = ["simulate", "--beta-db", "0,10", "--trials", "200", "--seed", "9", "--out", path.to_str().unwrap()];
        stdout(&args);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let (header, rows) = csv(&std::fs::read_to_string(&a).unwrap());
    assert_eq!(header, ["beta_db", "s_mc", "ci95"]);
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().flatten().all(|f| is_nine_digit_sci(f)));
    let full = stdout(&["simulate", "--trials", "20", "--mode", "full", "--u-max", "2", "--t-joint", "5"]);
    assert_eq!(full.lines().count(), 2);
}

#[test]
fn compare_columns_and_gap() {
    let text = stdout(&["compare", "--u-max", "9", "--t-joint", "10", "--beta-db", "0,10", "--trials", "300"]);
    let (header, rows) = csv(&text);
    assert_eq!(header, ["beta_db", "s_analytical", "s1", "s2", "s_mc", "ci95", "rel_gap"]);
    for row in &rows {
        let v: Vec<f64> = row.iter().map(|f| f.parse().unwrap()).collect();
        assert!(((v[1] - v[4]).abs() / v[1] - v[6]).abs() < 1e-7);
    }
    let sweep = stdout(&["compare", "--u-max", "9", "--t-joint", "1,5,10", "--trials", "100"]);
    let (header, rows) = csv(&sweep);
    assert_eq!(header[0], "t_joint");
    assert_eq!(rows.len(), 3);
}

#[test]
fn asymptotic_table() {
    let text = stdout(&["asymptotic", "--t-joint", "10"]);
    let (header, rows) = csv(&text);
    assert_eq!(header, ["u", "d", "b1", "b2", "b", "u_star_d", "u_star"]);
    assert_eq!(rows.len(), 10);
    for row in &rows {
        let u: usize = row[0].parse().unwrap();
        assert_eq!(row[1].parse::<usize>().unwrap(), (10 - u).min(8));
        assert_eq!(row[5], "0 1 2");
        assert!(["1", "2"].contains(&row[6].as_str()));
    }
    let v: serde_json::Value = serde_json::from_str(stdout(&["optimal-u", "--t1", "5", "--t2", "20"]).trim()).unwrap();
    assert_eq!(v["u_star_d"], serde_json::json!([0, 1, 2]));
    assert!(matches!(v["u_star"].as_u64(), Some(1 | 2)));
}

fn python_with_matplotlib() -> bool {
    Command::new("python3")
        .args(["-c", "import matplotlib"])
        .output()
        .is_ok_and(|o| o.status.success())
}

#[test]
fn plotdata_scripts_render() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    stdout(&["plotdata", "fig2a", "--out", out, "--trials", "200", "--t-joint", "1,5,20"]);
    stdout(&["plotdata", "fig2b", "--out", out, "--beta-db", "-50:-30:5"]);
    let (header, rows) = csv(&std::fs::read_to_string(dir.path().join("fig2a.csv")).unwrap());
    assert_eq!(header, ["beta_db", "t_joint", "s_analytical", "s_non_in", "s_mc", "ci95"]);
    assert_eq!(rows.len(), 3);
    let (_, rows) = csv(&std::fs::read_to_string(dir.path().join("fig2b.csv")).unwrap());
    assert_eq!(rows.len(), 5 * 5);
    if !python_with_matplotlib() {
        eprintln!("python3 with matplotlib unavailable; scripts not rendered");
        return;
    }
    for name in ["fig2a", "fig2b"] {
        let status = Command::new("python3")
            .arg(dir.path().join(format!("{name}.py")))
            .env("MPLBACKEND", "Agg")
            .status()
            .unwrap();
        assert!(status.success(), "{name}.py failed");
        assert!(dir.path().join(format!("{name}.png")).metadata().unwrap().len() > 0);
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| run(args).status.code();
    assert_eq!(code(&["coverage", "--config", "/nonexistent/net.json"]), Some(2));
    let malformed = write_config(dir.path(), r#"{"n1": 3}"#);
    assert_eq!(code(&["coverage", "--config", &malformed]), Some(2));
    assert_eq!(code(&["coverage", "--u-max", "9"]), Some(2));
    assert_eq!(code(&["coverage", "--beta-db", "10,5"]), Some(2));
    assert_eq!(code(&["simulate", "--trials", "0"]), Some(2));
    assert_eq!(code(&["simulate", "--mode", "exact"]), Some(2));
    let starved = write_config(
        dir.path(),
        r#"{"n1": 10, "n2": 8, "alpha1": 4.5, "alpha2": 4.7, "p1_over_p2_db": 15,
            "lambda1": 0.0005, "lambda2": 0.001,
            "rel_tol": 1e-14, "abs_tol": 1e-300, "max_subdivisions": 1}"#,
    );
    assert_eq!(code(&["coverage", "--config", &starved]), Some(3));
}
