use std::path::Path;
use std::process::{Command, Output};

fn heatseries(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heatseries")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn data_rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').filter_map(|c| c.parse::<f64>().ok()).collect())
        .collect()
}

fn summary_value(csv: &str, key: &str) -> f64 {
    let prefix = format!("# summary {key}: ");
    let line = csv.lines().find(|l| l.starts_with(&prefix)).unwrap_or_else(|| panic!("no {key} in\n{csv}"));
    line[prefix.len()..].parse().unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn forward_oracle_values() {
    let out = heatseries(&["forward", "--geometry", "line", "--variant", "oracle", "--tau", "1", "--profile", "gaussian:a=1", "--eval-grid", "0:0:1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = data_rows(&stdout(&out));
    assert!((rows[0][1] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-8);

    let out = heatseries(&["forward", "--geometry", "polar", "--variant", "oracle", "--tau", "1", "--profile", "gaussian:a=1", "--eval-grid", "0:0:1", "--format", "json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((doc["rows"][0]["value"].as_f64().unwrap() - 0.5).abs() < 1e-8);
    assert_eq!(doc["metadata"]["constants_mode"], "oracle_validated");
}

#[test]
fn forward_series_matches_oracle() {
    let common = ["--tau", "0.5", "--profile", "gaussian:a=1", "--eval-grid", "-3:3:13"];
    let oracle = heatseries(&[&["forward", "--variant", "oracle"], &common[..]].concat());
    let series = heatseries(&[&["forward", "--variant", "CD-B"], &common[..]].concat());
    assert!(series.status.success(), "{}", stderr(&series));
    for (a, b) in data_rows(&stdout(&oracle)).iter().zip(data_rows(&stdout(&series))) {
        assert!((a[1] - b[1]).abs() <= 1e-10, "{a:?} vs {b:?}");
    }
}

#[test]
fn nonpositive_tau_is_a_config_error() {
    let out = heatseries(&["forward", "--variant", "CD-A", "--order", "0", "--tau", "0", "--profile", "gaussian:a=1", "--eval-grid", "0:0:1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("tau"), "{}", stderr(&out));
}

#[test]
fn unknown_variant_lists_valid_names() {
    let out = heatseries(&["inverse", "--variant", "CI-Z", "--tau", "0.3", "--profile", "gaussian:a=1", "--eval-grid", "0:0:1"]);
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    for name in ["CI-A", "CI-B", "CI-C", "CI-classical", "PI-A", "PI-B", "PI-C"] {
        assert!(msg.contains(name), "{msg}");
    }
}

#[test]
fn geometry_must_match_variant() {
    let out = heatseries(&["forward", "--geometry", "polar", "--variant", "CD-A", "--tau", "1", "--profile", "gaussian:a=1", "--eval-grid", "0:0:1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = heatseries(&["forward", "--variant", "CI-A", "--tau", "1", "--profile", "gaussian:a=1", "--eval-grid", "0:0:1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3_naming_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let u = dir.path().join("u.csv");
    let out = heatseries(&["forward", "--variant", "oracle", "--tau", "0.3", "--profile", "gaussian:a=1", "--eval-grid", "-2:2:5", "--output", path_str(&u)]);
    assert!(out.status.success());
    let out = heatseries(&["inverse", "--variant", "CI-classical", "--tau", "0.3", "--order", "40", "--input", path_str(&u), "--eval-grid", "0:0:1"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("row 1"), "{}", stderr(&out));
}

#[test]
fn forward_then_inverse_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let u = dir.path().join("u.csv");
    let out = heatseries(&["forward", "--variant", "oracle", "--tau", "0.3", "--profile", "gaussian:a=1", "--eval-grid", "-8:8:401", "--output", path_str(&u)]);
    assert!(out.status.success(), "{}", stderr(&out));
    // sampled data carry window truncation and interpolation error that high orders amplify
    let out = heatseries(&[
        "inverse", "--variant", "CI-A", "--tau", "0.3", "--order", "20", "--input", path_str(&u),
        "--truth", "gaussian:a=1", "--eval-grid", "-3:3:121",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let err = summary_value(&text, "error_l2_rel");
    assert!(err <= 1e-3, "rel L2 {err}");
}

#[test]
fn noisy_inverse_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let u = dir.path().join("u.csv");
    heatseries(&["forward", "--variant", "oracle", "--tau", "0.3", "--profile", "gaussian:a=1", "--eval-grid", "-8:8:401", "--output", path_str(&u)]);
    for noise in ["0", "1e-3"] {
        let args = ["inverse", "--variant", "CI-A", "--tau", "0.3", "--order", "12", "--input", path_str(&u), "--noise", noise, "--seed", "11", "--eval-grid", "-2:2:9"];
        let a = heatseries(&args);
        let b = heatseries(&args);
        assert!(a.status.success(), "{}", stderr(&a));
        assert_eq!(a.stdout, b.stdout);
    }
    let with_seed = |s: &str| heatseries(&["inverse", "--variant", "CI-A", "--tau", "0.3", "--order", "12", "--input", path_str(&u), "--noise", "1e-3", "--seed", s, "--eval-grid", "-2:2:9"]).stdout;
    assert_ne!(data_rows(&String::from_utf8(with_seed("1")).unwrap()), data_rows(&String::from_utf8(with_seed("2")).unwrap()));
}

#[test]
fn rerun_line_reproduces_the_data() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("f.csv");
    let out = heatseries(&["forward", "--variant", "PD-A", "--tau", "0.4", "--profile", "gaussian:a=1.5", "--eval-grid", "0:3:7", "--output", path_str(&out_path)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let first = std::fs::read_to_string(&out_path).unwrap();
    let rerun = first.lines().find_map(|l| l.strip_prefix("# rerun: heatseries ")).expect("rerun line");
    let status = Command::new("sh")
        .arg("-c")
        .arg(format!("\"$0\" {rerun} --output \"$1\""))
        .arg(env!("CARGO_BIN_EXE_heatseries"))
        .arg(dir.path().join("g.csv"))
        .status()
        .unwrap();
    assert!(status.success());
    let second = std::fs::read_to_string(dir.path().join("g.csv")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn validate_passes_in_both_modes() {
    let out = heatseries(&["validate"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    for name in ["CD-A", "CD-B", "CD-C", "CI-A", "CI-B", "CI-C", "PD-A", "PD-B", "PD-C", "PI-A", "PI-B", "PI-C"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing");
    }
    let out = heatseries(&["validate", "--constants-mode", "paper_literal"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    for name in ["CD-C", "CI-C"] {
        assert!(text.lines().any(|l| l.starts_with(name) && l.contains("false")), "{name} should show expected failures");
    }
}

#[test]
fn study_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.cfg");
    std::fs::write(&cfg, "[study]\nkind = convergence\nprofile = gaussian:a=1\nvariants = CI-A\ntau = 0.3\n[sweep]\nn = 2:6:2\n").unwrap();
    let report = dir.path().join("r.json");
    let out = heatseries(&["study", "--config", path_str(&cfg), "--output", path_str(&report), "--format", "json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(doc["rows"].as_array().unwrap().len(), 3);

    std::fs::write(&cfg, "[study]\nkind = noise\n\n[grid]\nn_nodes = many\n").unwrap();
    let out = heatseries(&["study", "--config", path_str(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 5"), "{}", stderr(&out));
}
