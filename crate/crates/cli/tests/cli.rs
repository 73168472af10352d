use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ecoacc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecoacc"))
        .args(args)
        .env("ECOACC_LOG", "error")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

/// Bundled catch-up scenario cut down to `seconds`.
fn short_catchup(dir: &Path, seconds: u32) -> PathBuf {
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/scenarios/catchup.scn");
    let text = fs::read_to_string(src).unwrap();
    assert!(text.contains("duration = 120"));
    let path = dir.join("short.scn");
    fs::write(&path, text.replace("duration = 120", &format!("duration = {seconds}"))).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_verify_plot_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let scn = short_catchup(dir.path(), 10);
    let out = dir.path().join("out");

    let run = ecoacc(&["run", "--scenario", s(&scn), "--out", s(&out)]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let stdout = String::from_utf8(run.stdout).unwrap();
    assert!(stdout.contains("100 records"), "{stdout}");
    assert!(out.join("trace.csv").exists() && out.join("timing.csv").exists());

    let trace = out.join("trace.csv");
    let verify = ecoacc(&["verify", "--scenario", s(&scn), "--trace", s(&trace), "--rerun"]);
    assert_eq!(code(&verify), 0, "{}", String::from_utf8_lossy(&verify.stdout));

    let plots = dir.path().join("plots");
    let plot = ecoacc(&["plot", "--trace", s(&trace), "--out", s(&plots)]);
    assert_eq!(code(&plot), 0);
    assert!(plots.join("timeseries.svg").exists() && plots.join("trajectory.svg").exists());
}

#[test]
fn seeded_reruns_write_identical_traces() {
    let dir = tempfile::tempdir().unwrap();
    let scn = short_catchup(dir.path(), 5);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert_eq!(code(&ecoacc(&["run", "--scenario", s(&scn), "--seed", "7", "--out", s(out)])), 0);
    }
    assert_eq!(fs::read(a.join("trace.csv")).unwrap(), fs::read(b.join("trace.csv")).unwrap());
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&ecoacc(&[])), 2);
    assert_eq!(code(&ecoacc(&["run", "--scenario", "catchup"])), 2);
    assert_eq!(code(&ecoacc(&["run", "--scenario", "catchup", "--mode", "fast", "--out", "x"])), 2);
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let bad_speed = ecoacc(&["run", "--scenario", "catchup", "--mode", "realtime", "--speed", "0", "--out", s(&out)]);
    assert_eq!(code(&bad_speed), 2);
    assert!(!out.exists());
}

#[test]
fn malformed_inputs_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let scn = dir.path().join("broken.scn");
    fs::write(&scn, "[scenario\nduration = 3\n").unwrap();
    let out = ecoacc(&["run", "--scenario", s(&scn), "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));

    let trace = dir.path().join("trace.csv");
    fs::write(&trace, "not,a,trace\n1,2,3\n").unwrap();
    assert_eq!(code(&ecoacc(&["verify", "--scenario", "catchup", "--trace", s(&trace)])), 3);
}

#[test]
fn tampered_trace_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let scn = short_catchup(dir.path(), 5);
    let out = dir.path().join("out");
    assert_eq!(code(&ecoacc(&["run", "--scenario", s(&scn), "--out", s(&out)])), 0);
    let trace = out.join("trace.csv");
    let text = fs::read_to_string(&trace).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.remove(10);
    fs::write(&trace, lines.join("\n") + "\n").unwrap();
    let verify = ecoacc(&["verify", "--scenario", s(&scn), "--trace", s(&trace)]);
    assert_eq!(code(&verify), 4);
    assert!(String::from_utf8_lossy(&verify.stdout).contains("FAIL"));
}

#[test]
fn missing_files_exit_6() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.scn");
    assert_eq!(code(&ecoacc(&["run", "--scenario", s(&missing), "--out", s(dir.path())])), 6);
    let trace = dir.path().join("nope.csv");
    assert_eq!(code(&ecoacc(&["plot", "--trace", s(&trace), "--out", s(dir.path())])), 6);
}
