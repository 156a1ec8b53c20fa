use std::path::Path;
use std::process::{Command, Output};

fn qdiffract(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdiffract")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn default_subcommands_succeed() {
    for cmd in ["pattern", "eta-scan", "gamma-scan", "verify"] {
        let out = qdiffract(&[cmd]);
        assert_eq!(out.status.code(), Some(0), "{cmd}: {}", stderr(&out));
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(text.starts_with(&format!("# command: {cmd}\n")), "{cmd}");
    }
}

#[test]
fn output_is_byte_identical_across_runs() {
    for args in [["pattern", "--format", "csv"], ["gamma-scan", "--format", "json"], ["verify", "--format", "json"]] {
        let a = qdiffract(&args);
        let b = qdiffract(&args);
        assert_eq!(a.status.code(), Some(0));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn out_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("eta.csv");
    let out = qdiffract(&["eta-scan", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(out.stdout.is_empty());
    // the echoed configuration records the output path; all else matches
    let strip = |t: &str| t.lines().filter(|l| !l.starts_with("# config:")).collect::<Vec<_>>().join("\n");
    let file = std::fs::read_to_string(&path).unwrap();
    let piped = String::from_utf8(qdiffract(&["eta-scan"]).stdout).unwrap();
    assert_eq!(strip(&file), strip(&piped));
    assert!(file.contains("eta.csv"));
}

#[test]
fn json_output_parses_with_fixed_float_text() {
    let out = qdiffract(&["eta-scan", "--format", "json"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("-5.0000000000000000e-1"));
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["command"], "eta-scan");
    assert_eq!(doc["columns"], serde_json::json!(["fano", "eta"]));
    assert_eq!(doc["rows"][0][1], -0.5);
    assert_eq!(doc["rows"].as_array().unwrap().len(), 101);
}

#[test]
fn csv_table_follows_header_comments() {
    let out = qdiffract(&["pattern", "--grid-nmax", "8"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let table: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut reader = csv::Reader::from_reader(table.as_bytes());
    assert_eq!(reader.headers().unwrap(), vec!["n_x", "n_y", "k_x", "k_y", "mean_n"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 17);
    assert!(rows.iter().all(|r| r[4].parse::<f64>().unwrap() >= 0.0));
}

#[test]
fn decorrelated_pattern_loses_fringes() {
    let visibility = |args: &[&str]| {
        let text = String::from_utf8(qdiffract(args).stdout).unwrap();
        let line = text.lines().find(|l| l.starts_with("# visibility: ")).unwrap().to_string();
        line["# visibility: ".len()..].parse::<f64>().unwrap()
    };
    assert!((visibility(&["pattern"]) - 1.0).abs() < 1e-10);
    assert!(visibility(&["pattern", "--decorrelate"]) < 1e-10);
}

#[test]
fn tiny_cutoff_fails_verification() {
    let out = qdiffract(&["verify", "--cutoff", "1"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(String::from_utf8(out.stdout).unwrap().contains("# passed: false"));
}

#[test]
fn semantic_config_error_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[grid]\nn_max = 16\n\n[eta_scan]\npoints = 11\nh1 = 0.5\n");
    let out = qdiffract(&["eta-scan", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 6"), "{}", stderr(&out));
}

#[test]
fn syntax_and_unknown_key_errors_report_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[grid]\nn_max = 16\nspacing = 2.0\n");
    let out = qdiffract(&["pattern", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));

    let cfg = write_config(dir.path(), "[grid]\n\nn_max = = 16\n");
    let out = qdiffract(&["pattern", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn ghost_requires_pair_state() {
    let out = qdiffract(&["ghost"]);
    assert_eq!(out.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[state]\nkind = \"spdc-pair\"\namplitude = [0.1, 0.0]\nmodes = [[0, 0], [2, 0], [-2, 0]]\n",
    );
    let out = qdiffract(&["ghost", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l == "idler_nx,idler_ny,g2_leading,g2_exact"));
}

#[test]
fn missing_config_file_is_a_config_error() {
    let out = qdiffract(&["pattern", "--config", "/nonexistent/scenario.toml"]);
    assert_eq!(out.status.code(), Some(2));
}
