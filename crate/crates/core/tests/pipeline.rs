use std::fs;
use std::path::Path;

use mkg_core::config::{parse_config_with_base, parse_unvalidated, RunConfig};
use mkg_core::pipeline::{convergence_study, rerender, run_pipeline, Status, OUTPUT_FILES};
use mkg_core::MkgError;

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
";

fn tiny(dir: &Path, extra: &str) -> RunConfig {
    let text = format!("{TINY}{extra}\n[output]\ndir = run\n");
    parse_config_with_base(&text, Some(dir)).unwrap()
}

#[test]
fn tiny_run_writes_every_file_with_the_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny(tmp.path(), "");
    let rep = run_pipeline(&cfg).unwrap();
    let out = tmp.path().join("run");
    for f in OUTPUT_FILES {
        let text = fs::read_to_string(out.join(f)).unwrap();
        assert!(text.contains(&cfg.hash()), "{f}");
    }
    assert!(out.join("checkpoint.bin").exists());
    assert!(out.join("checkpoint.bin.json").exists());
    assert_eq!(rep.criteria.len(), 12);
    assert_eq!(rep.status, "COMPLETE");
    let rr = rerender(&out).unwrap();
    assert!(rr.problems.is_empty(), "{:?}", rr.problems);
    assert_eq!(rr.all_pass, rep.all_pass());
    for id in [8, 9, 10] {
        assert_eq!(rep.criterion(id).unwrap().status, Status::Pass, "{}", rep.render_text());
    }
}

#[test]
fn identical_configs_give_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_pipeline(&tiny(a.path(), "")).unwrap();
    run_pipeline(&tiny(b.path(), "")).unwrap();
    for f in OUTPUT_FILES.iter().chain(&["checkpoint.bin"]) {
        let x = fs::read(a.path().join("run").join(f)).unwrap();
        let y = fs::read(b.path().join("run").join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
}

#[test]
fn zero_amplitude_is_trivial() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny(tmp.path(), "[data]\namplitude = 0\n");
    let rep = run_pipeline(&cfg).unwrap();
    let m = rep.monitors.unwrap();
    assert_eq!(m.charge_q, 0.0);
    assert_eq!(m.lorenz_max, 0.0);
    assert_eq!(m.energy_final, 0.0);
}

#[test]
fn failed_run_leaves_marker_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    // data still large at the outer boundary
    let cfg = tiny(
        tmp.path(),
        "[data]\nphi0_re = gaussian width=15 scale=1\nphi0_dot_im = gaussian width=15 scale=1\ntail_tol = 1e-12\n",
    );
    let err = run_pipeline(&cfg).unwrap_err();
    assert!(!matches!(err, MkgError::Config(_)));
    let out = tmp.path().join("run");
    assert!(out.join("FAILED").exists());
    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(rep["status"], "FAILED");
    assert!(!rerender(&out).unwrap().all_pass);
}

#[test]
fn tampered_csv_is_detected() {
    let tmp = tempfile::tempdir().unwrap();
    run_pipeline(&tiny(tmp.path(), "")).unwrap();
    let out = tmp.path().join("run");
    let p = out.join("monitors.csv");
    let text = fs::read_to_string(&p).unwrap();
    let first = text.lines().next().unwrap().to_string();
    fs::write(&p, text.replacen(&first, "# config_hash=0000", 1)).unwrap();
    let rr = rerender(&out).unwrap();
    assert!(rr.problems.iter().any(|s| s.contains("monitors.csv")), "{:?}", rr.problems);
}

#[test]
fn unstable_cfl_is_reported_per_level() {
    let tmp = tempfile::tempdir().unwrap();
    let text = TINY.replace("monitor_stride = 20", "monitor_stride = 20\ncfl = 1.5");
    let cfg = parse_unvalidated(&text, Some(tmp.path())).unwrap();
    let table = convergence_study(&cfg, 3).unwrap();
    assert!(table.any_unstable());
    let csv = table.csv(&cfg.hash()).render();
    assert!(csv.contains(&cfg.hash()));
}

#[test]
fn convergence_orders_near_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = parse_unvalidated(TINY, Some(tmp.path())).unwrap();
    let table = convergence_study(&cfg, 3).unwrap();
    assert!(!table.any_unstable());
    let free = table.orders.iter().find(|o| o.quantity.contains("free")).unwrap();
    for p in &free.orders {
        assert!((p - 2.0).abs() < 0.2, "{free:?}");
    }
}

#[test]
fn phase_correction_helps_when_charge_is_large() {
    use mkg_core::extraction::{cauchy_increments, corrected_sequence};
    use mkg_core::pipeline::evolve_config;
    let tmp = tempfile::tempdir().unwrap();
    let text = TINY.replace("n_cells = 400", "n_cells = 1600");
    let cfg = parse_config_with_base(&format!("{text}[data]\namplitude = 0.51\n"), Some(tmp.path())).unwrap();
    let art = evolve_config(&cfg).map_err(|e| e.0).unwrap();
    let q = art.init.charge;
    assert!(q.q.abs() >= 0.5, "Q = {}", q.q);
    for ray in art.rays.iter().filter(|r| r.q == 0.0) {
        let ray = ray.at_times(&cfg.check_times());
        let raw: Vec<_> = ray.points.iter().map(|p| p.rphi).collect();
        let inc_raw = cauchy_increments(&raw, |z| z.norm());
        let inc_cor = cauchy_increments(&corrected_sequence(&ray, q), |z| z.norm());
        assert!(inc_cor.last() < inc_raw.last(), "raw {inc_raw:?} corrected {inc_cor:?}");
    }
}
