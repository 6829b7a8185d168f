use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = "\
[grid]
r_max = 40
n_cells = 400
[scheme]
t_end = 30
monitor_stride = 20
[extraction]
rays = -5, 0, 5
lbar_ray = -5
q_min = -8
q_max = 8
[interior]
t = 10, 20, 30
[output]
dir = run
";

fn mkg(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mkg"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn config_errors_exit_two_with_line_numbers() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.ini"), "[grid]\nr_max = 100\nr_max = 200\n").unwrap();
    let o = mkg(&["run", "bad.ini"], tmp.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    fs::write(tmp.path().join("bad2.ini"), "[weights]\ns = 1.2\n[scheme]\ncfl = 2\n").unwrap();
    let o = mkg(&["run", "bad2.ini"], tmp.path());
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("s = 1.2") || err.contains("1/2 < s < 1"), "{err}");
    assert!(err.contains("cfl"), "{err}");

    assert_eq!(code(&mkg(&["run", "missing.ini"], tmp.path())), 2);
    assert_eq!(code(&mkg(&["frobnicate"], tmp.path())), 2);
}

#[test]
fn oracle_subcommand() {
    let tmp = tempfile::tempdir().unwrap();
    let o = mkg(&["oracle", "all"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let out = String::from_utf8_lossy(&o.stdout);
    assert_eq!(out.lines().filter(|l| l.starts_with("PASS")).count(), 7);
    assert_eq!(code(&mkg(&["oracle", "no_such_case"], tmp.path())), 2);
}

#[test]
fn run_then_report_agree() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("tiny.ini"), TINY).unwrap();
    let o = mkg(&["run", "tiny.ini"], tmp.path());
    // the tiny domain is too short for every criterion; only the exit
    // convention is checked here
    let run_code = code(&o);
    assert!(run_code == 0 || run_code == 1);
    let dir = tmp.path().join("run");
    for f in [
        "monitors.csv",
        "radiation.csv",
        "interior.csv",
        "envelopes.csv",
        "report.json",
        "checkpoint.bin",
    ] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let r = mkg(&["report", "run"], tmp.path());
    assert_eq!(code(&r), run_code, "{}", String::from_utf8_lossy(&r.stderr));

    let p = dir.join("radiation.csv");
    let text = fs::read_to_string(&p)
        .unwrap()
        .replacen("# config_hash=", "# config_hash=x", 1);
    fs::write(&p, text).unwrap();
    let r = mkg(&["report", "run"], tmp.path());
    assert_eq!(code(&r), 1);
    assert_eq!(code(&mkg(&["report", "nowhere"], tmp.path())), 2);
}

#[test]
fn unstable_converge_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("tiny.ini"), TINY).unwrap();
    let o = mkg(&["converge", "tiny.ini", "--levels", "3", "--cfl", "1.5"], tmp.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("UNSTABLE"));
    assert!(tmp.path().join("run/convergence.csv").exists());
}

#[test]
fn asys_passes() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("tiny.ini"), TINY).unwrap();
    let o = mkg(&["asys", "tiny.ini"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(tmp.path().join("run/asymptotic.csv").exists());
}
