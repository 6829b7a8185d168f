//! Acceptance suite on the reference configuration with both studies on.
//! Each test prints one line per criterion and one per check, then asserts.

use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use mkg_core::config::RunConfig;
use mkg_core::pipeline::{run_pipeline, Check, RunReport, Status};
use mkg_core::report::fmt_f64;

struct Reference {
    report: RunReport,
    elapsed: Duration,
}

fn reference() -> &'static Reference {
    static REF: OnceLock<Reference> = OnceLock::new();
    REF.get_or_init(|| {
        let mut cfg = RunConfig::default();
        cfg.studies.refinement = true;
        cfg.studies.doubled = true;
        cfg.output.dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
        let start = Instant::now();
        let report = run_pipeline(&cfg).expect("reference run completes");
        Reference {
            report,
            elapsed: start.elapsed(),
        }
    })
}

fn describe(c: &Check) -> String {
    let target = if c.relation == "within" {
        format!(" of {}", fmt_f64(c.target))
    } else {
        String::new()
    };
    let detail = if c.detail.is_empty() {
        String::new()
    } else {
        format!(" ({})", c.detail)
    };
    format!(
        "measured {} {} tolerance {}{}{}",
        fmt_f64(c.measured),
        c.relation,
        fmt_f64(c.tolerance),
        target,
        detail
    )
}

fn criterion(id: u32) {
    let c = reference().report.criterion(id).expect("criterion present");
    println!("{} {} {}", c.status, c.id, c.name);
    for k in &c.checks {
        println!("    {} {}: {}", k.status, k.name, describe(k));
    }
    assert_eq!(c.status, Status::Pass, "criterion {id} {}", c.name);
}

#[test]
fn c01_free_wave_exactness() {
    criterion(1);
}

#[test]
fn c02_lorenz_propagation() {
    criterion(2);
}

#[test]
fn c03_charge_conservation() {
    criterion(3);
}

#[test]
fn c04_coulomb_limit_of_r_al() {
    criterion(4);
}

#[test]
fn c05_radiation_field_and_charge_phase() {
    criterion(5);
}

#[test]
fn c06_log_growth_of_r_albar() {
    criterion(6);
}

#[test]
fn c07_interior_limit() {
    criterion(7);
}

#[test]
fn c08_angular_kernel_and_chain() {
    criterion(8);
}

#[test]
fn c09_asymptotic_system() {
    criterion(9);
}

#[test]
fn c10_reference_solvers() {
    criterion(10);
}

#[test]
fn c11_envelopes_under_doubling() {
    criterion(11);
}

#[test]
fn c12_model_slope_against_evolution() {
    criterion(12);
}

#[test]
fn c13_wall_clock() {
    let r = reference();
    let secs = r.elapsed.as_secs_f64();
    let ok = secs < 600.0;
    println!(
        "{} 13 reference pipeline wall clock: measured {} < tolerance {}",
        if ok { "PASS" } else { "FAIL" },
        fmt_f64(secs),
        fmt_f64(600.0)
    );
    assert!(ok);
}
