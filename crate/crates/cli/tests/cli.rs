use std::fs;
use std::path::Path;

use blindeq_cli::execute;
use serde_json::Value;

fn run(args: &[&str]) -> i32 {
    execute(std::iter::once("blindeq").chain(args.iter().copied()))
}

fn meta(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("meta.json")).unwrap()).unwrap()
}

const SMALL: [&str; 6] = ["--runs", "2", "--frames", "2", "--symbols-per-frame", "600"];

#[test]
fn sweep_writes_result_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut args = vec!["sweep", "--param", "hv", "--values", "0.2pi", "--scheme", "cma", "--seed", "1", "--out", out, "--plot"];
    args.extend(SMALL);
    assert_eq!(run(&args), 0);
    for f in ["trajectories.csv", "summary.csv", "meta.json", "bmi_vs_hv.svg", "failed_vs_hv.svg", "kbar_vs_hv.svg"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let traj = fs::read_to_string(dir.path().join("trajectories.csv")).unwrap();
    assert_eq!(traj.lines().count(), 1 + 2 * 2);
}

#[test]
fn pcs_run_uses_lower_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let mut args = vec!["run", "--scheme", "vaebatch", "--constellation", "pcs", "--out", out];
    args.extend(SMALL);
    assert_eq!(run(&args), 0);
    let cfg = &meta(dir.path())["points"][0]["config"];
    assert_eq!(cfg["bmi_thr"], 4.8);
    assert_eq!(cfg["constellation"], "pcs");
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("exp.conf");
    fs::write(&conf, "scheme = cmabatch\nruns = 7\nframes = 2\nlearning_rate = 3e-4\n").unwrap();
    let out = dir.path().join("out");
    let args = [
        "run",
        "--config",
        conf.to_str().unwrap(),
        "--runs",
        "1",
        "--symbols-per-frame",
        "600",
        "--out",
        out.to_str().unwrap(),
    ];
    assert_eq!(run(&args), 0);
    let m = meta(&out);
    let p = &m["points"][0];
    assert_eq!(p["runs"], 1);
    assert_eq!(p["config"]["scheme"]["scheme"], "cmabatch");
    assert_eq!(p["config"]["scheme"]["learning_rate"], 3e-4);
}

#[test]
fn repeated_sweeps_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let csv = |name: &str| {
        let out = dir.path().join(name);
        let mut args = vec!["sweep", "--param", "cd", "--values", "0,0.5", "--scheme", "cmaflex,vaeflex", "--seed", "9"];
        let o = out.to_str().unwrap().to_string();
        args.extend(["--out", &o]);
        args.extend(SMALL);
        assert_eq!(run(&args), 0);
        fs::read(out.join("trajectories.csv")).unwrap()
    };
    assert_eq!(csv("a"), csv("b"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["run", "--scheme", "foo"]), 2);
    assert_eq!(run(&["sweep", "--param", "snr", "--values", "1"]), 2);
    assert_eq!(run(&["sweep", "--param", "cd"]), 2);
    assert_eq!(run(&["run", "--constellation", "qpsk"]), 2);
    assert_eq!(run(&["run", "--set", "m_eq=4"]), 2);
    assert_eq!(run(&["bogus"]), 2);
}

#[test]
fn bad_config_line_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    fs::write(&conf, "runs = 2\nthis line is wrong\n").unwrap();
    assert_eq!(run(&["run", "--config", conf.to_str().unwrap()]), 2);
}

#[test]
fn io_failure_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let mut args = vec!["run", "--scheme", "cma", "--out", blocker.to_str().unwrap()];
    args.extend(SMALL);
    assert_eq!(run(&args), 1);
    assert_eq!(run(&["run", "--config", dir.path().join("missing.conf").to_str().unwrap()]), 1);
}

#[test]
fn selftest_passes() {
    assert_eq!(run(&["selftest"]), 0);
}
