use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn trajbench(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trajbench"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn adapter(mode: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/adapter.py");
    format!("python3 {} {mode}", path.display())
}

const CONFIG: &str = "version: 1
seed: 3
datasets:
  - synthetic: {kind: linear_crowd, agents: 4, frames: 50, seed: 1}
  - synthetic: {kind: crossing, episodes: 3, noise_sigma: 0.05}
predictor: {kind: social_force}
experiment: {kind: noise_sweep, sigmas: [0.0, 0.1]}
";

#[test]
fn run_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("exp.yaml"), CONFIG).unwrap();
    for out in ["a", "b"] {
        let o = trajbench(&["run", "exp.yaml", "--out", out], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("report.csv"));
    }
    for f in ["report.csv", "report.meta"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{f} differs");
    }
}

#[test]
fn errors_are_stage_tagged() {
    let dir = tempfile::tempdir().unwrap();
    let o = trajbench(&["run", "missing.yaml"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("[config]"), "{}", stderr(&o));

    std::fs::write(dir.path().join("bad.yaml"), "version: 1\ndatasets:\n  - path: nope.csv\n").unwrap();
    let o = trajbench(&["run", "bad.yaml"], dir.path());
    assert!(!o.status.success());
    let e = stderr(&o);
    assert!(e.contains("[config]") || e.contains("[load]"), "{e}");

    let o = trajbench(&["synthetic", "zigzag"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("[config]"));
}

#[test]
fn failed_external_run_keeps_previous_report() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("exp.yaml"), CONFIG).unwrap();
    let o = trajbench(&["run", "exp.yaml", "--out", "out"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let before = std::fs::read(dir.path().join("out/report.csv")).unwrap();

    let selection = format!("external:{}", adapter("crash_second"));
    let o = trajbench(&["run", "exp.yaml", "--out", "out", "--predictor", &selection], dir.path());
    assert!(!o.status.success());
    let e = stderr(&o);
    assert!(e.contains("[predict]") && e.contains("request 2"), "{e}");
    assert_eq!(std::fs::read(dir.path().join("out/report.csv")).unwrap(), before);
}

#[test]
fn external_predictor_via_flag() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("exp.yaml"),
        "version: 1\ndatasets:\n  - synthetic: {kind: linear_crowd, agents: 3, frames: 40}\npreprocess: {smoothing_window: 1}\n",
    )
    .unwrap();
    let selection = format!("external:{}", adapter("linear"));
    let o = trajbench(&["run", "exp.yaml", "--out", "out", "--predictor", &selection], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("out/report.csv")).unwrap();
    assert!(csv.contains("external:linear"), "{csv}");
}

#[test]
fn calibrate_writes_trace_and_params() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cal.yaml"),
        "version: 1\ndatasets:\n  - synthetic: {kind: crossing, episodes: 6, noise_sigma: 0.1}\npredictor: {kind: social_force}\ncalibration: {fraction: 0.5, horizon_s: 2.4}\n",
    )
    .unwrap();
    let o = trajbench(&["calibrate", "cal.yaml", "--out", "cal", "--budget", "12"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let trace = std::fs::read_to_string(dir.path().join("cal/calibration.trace")).unwrap();
    assert_eq!(trace.lines().count(), 13);
    assert!(trace.starts_with("trial,phase,objective,incumbent,elapsed_s,"));
    let params = std::fs::read_to_string(dir.path().join("cal/calibrated_params.yaml")).unwrap();
    assert!(params.contains("tau"));

    std::fs::write(
        dir.path().join("use.yaml"),
        "version: 1\ndatasets:\n  - synthetic: {kind: crossing, episodes: 6, noise_sigma: 0.1}\npredictor: {kind: social_force, params_file: cal/calibrated_params.yaml}\n",
    )
    .unwrap();
    let o = trajbench(&["run", "use.yaml", "--out", "run"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn synthetic_then_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let o = trajbench(&["synthetic", "opposing", "--out", "opp.csv", "--episodes", "2"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("opposing"));
    let o = trajbench(&["inspect", "opp.csv", "--raw"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("frequency: 2.5 Hz"), "{s}");
    assert!(s.contains("agents: 4"), "{s}");
    assert!(s.contains("scenarios (obs 8 / pred 12 frames"), "{s}");

    let o = trajbench(&["synthetic", "crossing", "--out", "cross.ndjson"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let o = trajbench(&["inspect", "cross.ndjson", "--preset", "eth"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("obs 6 / pred 10"));
}

#[test]
fn protocol_check_command() {
    let dir = tempfile::tempdir().unwrap();
    let o = trajbench(&["protocol-check", &adapter("samples3")], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("protocol check passed"));

    let o = trajbench(&["protocol-check", &adapter("bad_weights"), "--timeout", "5"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("[protocol]"), "{}", stderr(&o));
}
