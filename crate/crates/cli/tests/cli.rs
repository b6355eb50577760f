use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn homog(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_homog")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SINUSOID: &str = "# 1D sinusoid, one period per window\nfield.kind = sinusoid\nfield.mean = 2\nfield.amplitude = 1\nextension.kind = continuous\n";

#[test]
fn missing_config_is_a_usage_error() {
    let o = homog(&["pipeline"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
}

#[test]
fn nonexistent_config_file_exits_2() {
    let o = homog(&["pipeline", "/nonexistent/run.cfg"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr(&o).lines().count(), 1);
}

#[test]
fn cell_prints_harmonic_mean() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SINUSOID);
    let o = homog(&["cell", &cfg, "--at", "0.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("A = 1.7320508"), "{}", stdout(&o));
}

#[test]
fn invalid_override_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SINUSOID);
    let o = homog(&["cell", &cfg, "--at", "0.5", "--set", "eps_bar=-1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("eps_bar must be positive"), "{}", stderr(&o));
}

#[test]
fn pipeline_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SINUSOID);
    let out = dir.path().join("out");
    let o = Command::new(env!("CARGO_BIN_EXE_homog"))
        .args(["pipeline", &cfg, "--out", out.to_str().unwrap()])
        .env("HOMOG_JOBS", "2")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["field.csv", "averaged.csv", "u_fine.csv", "u0.csv", "u0_corrected.csv", "report.csv", "plot.gp", "pipeline.log"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    assert!(!out.join("FAILED").exists());
    assert!(stdout(&o).contains("u0_l2"));
}

#[test]
fn failed_pipeline_leaves_only_marker_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let good = write_config(dir.path(), SINUSOID);
    assert!(homog(&["pipeline", &good, "--out", out.to_str().unwrap()]).status.success());
    let cfg = write_config(dir.path(), "field.kind = file\nfield.path = /nonexistent/field.txt\n");
    let o = homog(&["pipeline", &cfg, "--out", out.to_str().unwrap()]);
    assert_ne!(o.status.code(), Some(0));
    assert!(stderr(&o).starts_with("error: field:"), "{}", stderr(&o));
    let mut names: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names, ["FAILED", "pipeline.log"]);
}

#[test]
fn extend_check_reports_exact_identity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "field.kind = random\nextension.kind = discrete\n");
    let o = homog(&["extend-check", &cfg, "--points", "2000"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("= 0e0"), "{}", stdout(&o));
}

#[test]
fn studies_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SINUSOID}seq.count = 3\n"));
    let out = dir.path().join("out");
    for (cmd, file) in [("atf-study", "atf.csv"), ("ueps-study", "ueps.csv")] {
        let o = homog(&[cmd, &cfg, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{cmd}: {}", stderr(&o));
        let text = fs::read_to_string(out.join(file)).unwrap();
        assert_eq!(text.lines().count(), 4, "{text}");
    }
}
