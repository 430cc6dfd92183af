//! Black-box tests of the `hurst` binary: subcommands, exit codes, outputs.

use std::fs;
use std::process::Command;

fn hurst() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hurst"))
}

#[test]
fn generate_then_check_then_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("fgn.csv");

    let out = hurst()
        .args([
            "generate",
            "--kind",
            "fgn",
            "--hurst",
            "0.7",
            "--length",
            "16384",
            "--seed",
            "9",
            "--out",
        ])
        .arg(&csv)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let head: String = fs::read_to_string(&csv)
        .unwrap()
        .lines()
        .take(2)
        .collect::<Vec<_>>()
        .join("\n");
    assert!(head.starts_with("timestamp_utc,price"));
    assert!(head.contains("2020-01-01T00:00:00Z"));

    let config_path = dir.path().join("analysis.toml");
    fs::write(
        &config_path,
        format!(
            r#"
            [[series]]
            name = "fgn-file"
            form = "increments"
            [series.source]
            kind = "csv"
            path = "{}"
            timestamp_column = "timestamp_utc"
            price_column = "price"
            sample_interval_minutes = 60
            "#,
            csv.display()
        ),
    )
    .unwrap();

    let out = hurst()
        .args(["ingest-check", "--config"])
        .arg(&config_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("16384 samples"), "{stdout}");

    let report_dir = dir.path().join("out");
    let out = hurst()
        .args(["analyze", "--config"])
        .arg(&config_path)
        .arg("--out")
        .arg(&report_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("fgn-file / hourly: H ="), "{stdout}");
    assert!(report_dir.join("report.json").exists());
    assert!(report_dir.join("fgn-file_autocovariance.tsv").exists());
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("empty.toml");
    fs::write(&config_path, "autocov_max_lag = 10\n").unwrap();
    let out = hurst()
        .args(["analyze", "--config"])
        .arg(&config_path)
        .args(["--out", "/tmp/never"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = hurst()
        .args(["ingest-check", "--config"])
        .arg(&config_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failing_series_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("broken.toml");
    fs::write(
        &config_path,
        r#"
        [[series]]
        name = "missing"
        [series.source]
        kind = "csv"
        path = "/nonexistent/prices.csv"
        timestamp_column = "timestamp"
        price_column = "price"
        sample_interval_minutes = 60
        "#,
    )
    .unwrap();
    let out = hurst()
        .args(["analyze", "--config"])
        .arg(&config_path)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("failed: missing"));
}

#[test]
fn generate_covers_kind_specific_flags() {
    let dir = tempfile::tempdir().unwrap();
    let jig = dir.path().join("jig.csv");
    let out = hurst()
        .args([
            "generate",
            "--kind",
            "jigsaw",
            "--period",
            "4",
            "--contamination",
            "0.2",
            "--length",
            "1024",
            "--seed",
            "2",
            "--interval-minutes",
            "15",
            "--out",
        ])
        .arg(&jig)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let content = fs::read_to_string(&jig).unwrap();
    assert_eq!(content.lines().count(), 1025);
    // 15-minute grid.
    assert!(content.contains("2020-01-01T00:15:00Z"));

    let ou = dir.path().join("ou.csv");
    let out = hurst()
        .args([
            "generate",
            "--kind",
            "ou",
            "--rate",
            "0.3",
            "--level",
            "50",
            "--sigma",
            "4",
            "--length",
            "4096",
            "--seed",
            "8",
            "--start",
            "2021-06-01T00:00:00Z",
            "--out",
        ])
        .arg(&ou)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::read_to_string(&ou)
        .unwrap()
        .starts_with("timestamp_utc,price\n2021-06-01T00:00:00Z,"));
}

#[test]
fn generate_rejects_bad_parameters() {
    let out = hurst()
        .args([
            "generate",
            "--kind",
            "fgn",
            "--hurst",
            "1.5",
            "--length",
            "1024",
            "--seed",
            "1",
            "--out",
            "/tmp/never.csv",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
