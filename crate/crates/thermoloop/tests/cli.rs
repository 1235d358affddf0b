use std::path::Path;
use std::process::Command;

use thermoloop::cli::{run, EXIT_CONFIG, EXIT_IO};
use thermoloop::telemetry::{parse_line, Frame, CSV_HEADER};

struct Outcome {
    code: i32,
    stdout: String,
    stderr: String,
}

fn cli(args: &[&str]) -> Outcome {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(
        std::iter::once("thermoloop").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    Outcome {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn step_response_writes_log_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("a.csv");
    let o = cli(&["run", "--scenario", "step_response", "--out", path(&log)]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.stdout.contains("response_latency_cycles  1"), "{}", o.stdout);

    let text = std::fs::read_to_string(&log).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let records: Vec<_> = lines.map(|l| parse_line(l).unwrap()).collect();
    assert_eq!(records.len(), 600);
    assert_eq!(records.last().unwrap().t_ms, 59_900);

    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["response_latency_cycles"], 1);
    assert_eq!(metrics["undershoot_deci"], 0);
    assert_eq!(metrics["idle_duty_violations"], 0);
}

#[test]
fn jsonl_and_explicit_metrics_path() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("b.jsonl");
    let metrics = dir.path().join("m.json");
    let o = cli(&[
        "run",
        "--scenario",
        "disturbance",
        "--out",
        path(&log),
        "--format",
        "jsonl",
        "--metrics",
        path(&metrics),
    ]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let frames: Vec<Frame> = std::fs::read_to_string(&log)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(frames.len(), 1200);
    assert!(frames.iter().any(|f| f.state == 'A'));
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&metrics).unwrap()).unwrap();
    assert_eq!(m["saturation_held"], true);
    assert_eq!(m["alarm_first_ms"], 6000);
}

#[test]
fn zero_duration_gives_empty_log() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("z.csv");
    let o = cli(&["run", "--scenario", "recovery", "--out", path(&log), "--duration", "0"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert_eq!(std::fs::read_to_string(&log).unwrap(), format!("{CSV_HEADER}\n"));
}

#[test]
fn repeated_runs_are_byte_identical_and_seed_only_moves_light() {
    let dir = tempfile::tempdir().unwrap();
    let go = |name: &str, extra: &[&str]| {
        let log = dir.path().join(name);
        let mut args = vec!["run", "--scenario", "recovery", "--out", path(&log)];
        args.extend_from_slice(extra);
        assert_eq!(cli(&args).code, 0);
        std::fs::read_to_string(log).unwrap()
    };
    let a = go("1.csv", &[]);
    let b = go("2.csv", &[]);
    let c = go("3.csv", &["--seed", "99"]);
    assert_eq!(a, b);
    assert_ne!(a, c);
    for (x, y) in a.lines().skip(1).zip(c.lines().skip(1)) {
        let (x, y) = (parse_line(x).unwrap(), parse_line(y).unwrap());
        assert_eq!((x.t_ms, x.t_curr, x.duty, x.state), (y.t_ms, y.t_curr, y.duty, y.state));
    }
}

#[test]
fn overrides_change_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("o.csv");
    // kp 500, kd 0 at error 49: duty 24500 + 490k on the k-th cycle, first over
    // 40000 at k = 32, so full duty arrives 3100 ms after the step plus one period
    let o = cli(&[
        "run",
        "--scenario",
        "step_response",
        "--out",
        path(&log),
        "--kp",
        "500",
        "--kd",
        "0",
    ]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.stdout.contains("time_to_full_duty_ms     3200"), "{}", o.stdout);

    // a colder room with a negative ambient override parses
    let o = cli(&[
        "run",
        "--scenario",
        "step_response",
        "--out",
        path(&log),
        "--t-amb",
        "-50",
        "--duration",
        "500",
    ]);
    assert_eq!(o.code, 0, "{}", o.stderr);
}

#[test]
fn scenario_file_matches_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["scenario", "step_response"]);
    assert_eq!(o.code, 0);
    let file = dir.path().join("a.scn");
    std::fs::write(&file, &o.stdout).unwrap();

    let (from_file, builtin) = (dir.path().join("f.csv"), dir.path().join("b.csv"));
    assert_eq!(
        cli(&["run", "--scenario", path(&file), "--out", path(&from_file)]).code,
        0
    );
    assert_eq!(
        cli(&["run", "--scenario", "step_response", "--out", path(&builtin)]).code,
        0
    );
    assert_eq!(std::fs::read(from_file).unwrap(), std::fs::read(builtin).unwrap());
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("x.csv");
    let bad_file = dir.path().join("bad.scn");
    std::fs::write(
        &bad_file,
        "name x\nduration_ms 100\ninitial_temp_deci 250\nat 50 boil\n",
    )
    .unwrap();
    for extra in [
        &["--scenario", "nosuch"][..],
        &["--scenario", path(&bad_file)],
        &["--scenario", "step_response", "--threshold", "0"],
        &["--scenario", "step_response", "--k-passive", "100"],
        &["--scenario", "step_response", "--k-fan", "nan"],
    ] {
        let mut args = vec!["run", "--out", path(&log)];
        args.extend_from_slice(extra);
        let o = cli(&args);
        assert_eq!(o.code, EXIT_CONFIG, "{extra:?}: {}", o.stderr);
        assert!(o.stderr.starts_with("thermoloop: "), "{}", o.stderr);
    }
    assert!(!log.exists());
    assert_eq!(cli(&["scenario", "nosuch"]).code, EXIT_CONFIG);
}

#[test]
fn unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("missing").join("x.csv");
    let o = cli(&["run", "--scenario", "step_response", "--out", path(&log)]);
    assert_eq!(o.code, EXIT_IO, "{}", o.stderr);
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(cli(&["run", "--out", "x.csv"]).code, 2);
    assert_eq!(cli(&["run", "--scenario", "step_response", "--format", "xml"]).code, 2);
    assert_eq!(cli(&["launch"]).code, 2);
    let help = cli(&["run", "--help"]);
    assert_eq!(help.code, 0);
    assert!(help.stdout.contains("--scenario"));
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_thermoloop");
    let log = dir.path().join("a.csv");
    let ok = Command::new(bin)
        .args(["run", "--scenario", "step_response", "--out", path(&log)])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let bad = Command::new(bin)
        .args(["run", "--scenario", "nosuch", "--out", path(&log)])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("unknown scenario"));
}

#[test]
fn default_output_path_is_named_after_the_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_thermoloop");
    let o = Command::new(bin)
        .args(["run", "--scenario", "step_response", "--duration", "0"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        std::fs::read_to_string(dir.path().join("step_response.csv")).unwrap(),
        format!("{CSV_HEADER}\n")
    );
    assert!(dir.path().join("step_response.metrics.json").exists());

    let o = Command::new(bin)
        .args(["run", "--scenario", "nosuch"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
