//! End-to-end runs: data, evolution, extraction, interior comparison, the
//! asymptotic model and the reference solvers, with all file output.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::asymptotic::{self, AsymState, Certificate, PhaseRhs};
use crate::config::RunConfig;
use crate::data::{build_initial, ChargeValue, ComplexProfile, CutoffChi, FreeData, InitialData, Profile};
use crate::error::{MkgError, Result};
use crate::evolution::{
    checkpoint, evolve_with, EnvelopeRecorder, MonitorLog, Observer, RayRecorder, RaySample, SchemeParams, SnapshotRecorder,
};
use crate::extraction::{
    build_radiation_table, cauchy_increments, corrected_sequence, frame_identity_residual, linear_fit, mod_albar,
    phase_slope_fit, EnvelopeQuantity, RadiationTable, WeightSpec,
};
use crate::field::{FieldState, RadialGrid};
use crate::interior::{
    angular_kernel_integral, chain_difference_report, interior_limit_check, sphere_integral, AsymSource, ChainReport, CutoffChi0,
    InteriorReport,
};
use crate::oracle::{self, Radial};
use crate::report::{to_json, CsvTable};

/// Relative errors below this are treated as converged when checking for
/// strict decrease; they are rounding noise around an exact value.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

/// Ratio `r_last / r_first` of the window for the cross-module slope fit.
const CROSS_WINDOW: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIPPED",
        })
    }
}

/// One measured quantity against its tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    /// `<`, `<=`, `>=`, `within` (of `target`) or `flag` (1 means true).
    pub relation: String,
    pub tolerance: f64,
    pub target: f64,
    pub status: Status,
    pub detail: String,
}

impl Check {
    fn make(name: &str, measured: f64, relation: &str, tolerance: f64, target: f64, ok: bool) -> Self {
        Check {
            name: name.to_string(),
            measured,
            relation: relation.to_string(),
            tolerance,
            target,
            status: if ok && !measured.is_nan() {
                Status::Pass
            } else {
                Status::Fail
            },
            detail: String::new(),
        }
    }

    pub fn lt(name: &str, measured: f64, tol: f64) -> Self {
        Self::make(name, measured, "<", tol, 0.0, measured < tol)
    }

    pub fn le(name: &str, measured: f64, tol: f64) -> Self {
        Self::make(name, measured, "<=", tol, 0.0, measured <= tol)
    }

    pub fn ge(name: &str, measured: f64, tol: f64) -> Self {
        Self::make(name, measured, ">=", tol, 0.0, measured >= tol)
    }

    pub fn within(name: &str, measured: f64, target: f64, tol: f64) -> Self {
        Self::make(name, measured, "within", tol, target, (measured - target).abs() <= tol)
    }

    pub fn flag(name: &str, ok: bool) -> Self {
        Self::make(name, if ok { 1.0 } else { 0.0 }, "flag", 1.0, 1.0, ok)
    }

    pub fn skipped(name: &str, tol: f64, why: &str) -> Self {
        Check {
            name: name.to_string(),
            measured: f64::NAN,
            relation: "skipped".into(),
            tolerance: tol,
            target: 0.0,
            status: Status::Skipped,
            detail: why.to_string(),
        }
    }

    pub fn failed(name: &str, tol: f64, err: &MkgError) -> Self {
        Check {
            name: name.to_string(),
            measured: f64::NAN,
            relation: "error".into(),
            tolerance: tol,
            target: 0.0,
            status: Status::Fail,
            detail: err.to_string(),
        }
    }

    fn with_detail(mut self, d: impl Into<String>) -> Self {
        self.detail = d.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub id: u32,
    pub name: String,
    pub status: Status,
    pub checks: Vec<Check>,
}

impl Criterion {
    pub fn new(id: u32, name: &str, checks: Vec<Check>) -> Self {
        let status = if checks.iter().any(|c| c.status == Status::Fail) {
            Status::Fail
        } else if checks.is_empty() || checks.iter().any(|c| c.status == Status::Skipped) {
            Status::Skipped
        } else {
            Status::Pass
        };
        Criterion {
            id,
            name: name.to_string(),
            status,
            checks,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorSummary {
    pub steps: usize,
    pub dt: f64,
    pub t_final: f64,
    pub charge_q: f64,
    pub coulomb: f64,
    pub compat_residual: f64,
    pub lorenz_initial: f64,
    pub lorenz_max: f64,
    pub gauss_max: f64,
    pub charge_drift_rel: f64,
    pub energy_initial: f64,
    pub energy_final: f64,
    pub frame_identity_sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSummary {
    pub phi_sup: f64,
    pub phi_at: (f64, f64),
    pub j0_sup: f64,
    pub j0_at: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_hash: String,
    /// `COMPLETE` or `FAILED`.
    pub status: String,
    pub error: Option<String>,
    pub monitors: Option<MonitorSummary>,
    pub envelopes: Option<EnvelopeSummary>,
    pub envelopes_doubled: Option<EnvelopeSummary>,
    pub interior: Option<InteriorReport>,
    pub chain: Option<ChainReport>,
    pub refinement: Option<ConvergenceTable>,
    pub criteria: Vec<Criterion>,
}

impl RunReport {
    fn empty(hash: &str) -> Self {
        RunReport {
            config_hash: hash.to_string(),
            status: "COMPLETE".into(),
            error: None,
            monitors: None,
            envelopes: None,
            envelopes_doubled: None,
            interior: None,
            chain: None,
            refinement: None,
            criteria: Vec::new(),
        }
    }

    pub fn all_pass(&self) -> bool {
        self.status == "COMPLETE" && self.criteria.iter().all(|c| c.status != Status::Fail)
    }

    pub fn criterion(&self, id: u32) -> Option<&Criterion> {
        self.criteria.iter().find(|c| c.id == id)
    }

    /// Plain-text table, one line per check.
    pub fn render_text(&self) -> String {
        render_value(&serde_json::to_value(self).unwrap_or_default())
    }
}

fn num_or_nan(v: &serde_json::Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

/// Renders a report given as JSON (non-finite numbers are `null`).
pub fn render_value(v: &serde_json::Value) -> String {
    let text = |x: &serde_json::Value| x.as_str().unwrap_or("").to_string();
    let mut s = format!("config_hash {}\nstatus {}\n", text(&v["config_hash"]), text(&v["status"]));
    if let Some(e) = v["error"].as_str() {
        s += &format!("error {e}\n");
    }
    for c in v["criteria"].as_array().into_iter().flatten() {
        s += &format!(
            "[{}] {:>2} {}\n",
            text(&c["status"]),
            c["id"].as_u64().unwrap_or(0),
            text(&c["name"])
        );
        for k in c["checks"].as_array().into_iter().flatten() {
            let rel = text(&k["relation"]);
            let of = if rel == "within" {
                format!(" of {:.3e}", num_or_nan(&k["target"]))
            } else {
                String::new()
            };
            s += &format!(
                "       {:<7} {} = {:.6e} ({} {:.3e}{}) {}\n",
                text(&k["status"]),
                text(&k["name"]),
                num_or_nan(&k["measured"]),
                rel,
                num_or_nan(&k["tolerance"]),
                of,
                text(&k["detail"])
            );
        }
    }
    s
}

/// Everything a single evolution produced.
pub struct RunArtifacts {
    pub grid: RadialGrid,
    pub init: InitialData,
    pub final_state: FieldState,
    pub log: MonitorLog,
    pub rays: Vec<RaySample>,
    pub snapshots: SnapshotRecorder,
    pub envelopes: EnvelopeRecorder,
    pub dt: f64,
    pub steps: usize,
    pub seconds: f64,
}

fn envelope_specs(cfg: &RunConfig) -> Result<Vec<(EnvelopeQuantity, WeightSpec)>> {
    let w = cfg.weights()?;
    Ok(vec![
        (EnvelopeQuantity::PhiModulus, WeightSpec::phi_decay(&w)),
        (EnvelopeQuantity::J0, WeightSpec::current_decay(&w)),
    ])
}

fn all_rays(cfg: &RunConfig) -> Vec<f64> {
    let mut q: Vec<f64> = cfg.extraction.rays.clone();
    q.extend(&cfg.extraction.phi_rays);
    q.push(cfg.extraction.lbar_ray);
    q.sort_by(f64::total_cmp);
    q.dedup();
    q
}

/// Builds the data and evolves it with the recorders the criteria need. On
/// failure the partial monitor log is returned with the error.
pub fn evolve_config(cfg: &RunConfig) -> std::result::Result<RunArtifacts, (MkgError, Option<MonitorLog>)> {
    let grid = cfg.grid().map_err(|e| (e, None))?;
    let init = build_initial(&cfg.data.free_data(), &grid, cfg.data.decay, cfg.data.tail_tol).map_err(|e| (e, None))?;
    let scheme = SchemeParams::new(
        cfg.scheme.cfl,
        cfg.scheme.t_end,
        cfg.scheme.boundary,
        cfg.scheme.monitor_stride,
        &grid,
    )
    .map_err(|e| (e, None))?;
    let dt = scheme.dt(&grid);
    let mut log = MonitorLog::new(cfg.scheme.monitor_stride);
    let mut rays = RayRecorder::new(&all_rays(cfg), cfg.extraction.ray_stride, cfg.extraction.r_min, &grid);
    let mut targets = cfg.check_times();
    targets.extend(&cfg.interior.t);
    let mut snaps = SnapshotRecorder::new(&targets, dt);
    let mut env = EnvelopeRecorder::new(cfg.scheme.monitor_stride, envelope_specs(cfg).map_err(|e| (e, None))?);
    let start = Instant::now();
    let res = evolve_with(
        &init.state,
        &grid,
        &scheme,
        None,
        &mut [&mut log, &mut rays, &mut snaps, &mut env],
    );
    let seconds = start.elapsed().as_secs_f64();
    match res {
        Ok(final_state) => Ok(RunArtifacts {
            grid,
            init,
            final_state,
            log,
            rays: rays.rays,
            snapshots: snaps,
            envelopes: env,
            dt,
            steps: scheme.steps(&grid),
            seconds,
        }),
        Err(e) => Err((e, Some(log))),
    }
}

fn monitors_table(hash: &str, log: &MonitorLog) -> CsvTable {
    let mut t = CsvTable::new(
        hash,
        &[
            "t",
            "lorenz_residual_sup",
            "gauss_residual_sup",
            "charge_q",
            "energy_e",
            "frame_identity_residual_sup",
        ],
    );
    for r in &log.rows {
        t.push(vec![
            r.t,
            r.lorenz_residual_sup,
            r.gauss_residual_sup,
            r.charge_q,
            r.energy_e,
            r.frame_identity_residual_sup,
        ]);
    }
    t
}

fn radiation_csv(hash: &str, tab: &RadiationTable) -> CsvTable {
    let mut t = CsvTable::new(
        hash,
        &[
            "q",
            "re_phi0",
            "im_phi0",
            "re_dphi0_dq",
            "im_dphi0_dq",
            "j_lbar_asym",
            "a_l_limit_err",
            "r_a_lbar_mod",
            "phi0_err",
        ],
    );
    for i in 0..tab.q_grid.len() {
        t.push(vec![
            tab.q_grid[i],
            tab.phi0[i].re,
            tab.phi0[i].im,
            tab.dphi0_dq[i].re,
            tab.dphi0_dq[i].im,
            tab.j_lbar_asym[i],
            tab.a_l_limit_err[i],
            tab.a_lbar_mod_limit[i],
            tab.phi0_err[i],
        ]);
    }
    t
}

fn interior_csv(hash: &str, rep: &InteriorReport) -> CsvTable {
    let mut t = CsvTable::new(
        hash,
        &[
            "t",
            "y_norm",
            "t_a0_sim",
            "k0_pred",
            "abs_err",
            "t_ar_sim",
            "kr_pred",
            "abs_err_r",
        ],
    );
    for r in &rep.rows {
        t.push(vec![
            r.t,
            r.y_norm,
            r.ta0_sim,
            r.k0_pred,
            r.abs_err,
            r.tar_sim,
            r.kr_pred,
            r.abs_err_r,
        ]);
    }
    t
}

fn envelopes_csv(hash: &str, env: &EnvelopeRecorder) -> CsvTable {
    let mut t = CsvTable::new(hash, &["t", "phi_ratio", "phi_r", "j0_ratio", "j0_r"]);
    for pair in env.rows.chunks(2) {
        if let [a, b] = pair {
            t.push(vec![a.0, a.2, a.3, b.2, b.3]);
        }
    }
    t
}

fn envelope_summary(env: &EnvelopeRecorder) -> EnvelopeSummary {
    EnvelopeSummary {
        phi_sup: env.sup[0].0,
        phi_at: (env.sup[0].1, env.sup[0].2),
        j0_sup: env.sup[1].0,
        j0_at: (env.sup[1].1, env.sup[1].2),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if b != 0.0 {
        (a - b).abs() / b.abs()
    } else {
        (a - b).abs()
    }
}

/// Terminal increment over the previous one; 0 when both vanish.
fn terminal_ratio(inc: &[f64]) -> f64 {
    match inc {
        [.., a, b] if *a > 0.0 => b / a,
        [.., _, b] if *b == 0.0 => 0.0,
        [.., _, _] => f64::INFINITY,
        _ => f64::NAN,
    }
}

fn strictly_decreasing_to_floor(e: &[f64]) -> bool {
    e.windows(2).all(|w| w[1] < w[0] || w[1] <= ROUNDOFF_FLOOR)
}

fn fmt_list(v: &[f64]) -> String {
    let s: Vec<String> = v.iter().map(|x| format!("{x:.4e}")).collect();
    format!("[{}]", s.join(", "))
}

fn criterion_al(cfg: &RunConfig, art: &RunArtifacts) -> Criterion {
    let charge = art.init.charge;
    let target = charge.coulomb();
    let times = cfg.check_times();
    let mut checks = Vec::new();
    for &q in &cfg.extraction.rays {
        let Some(ray) = art.rays.iter().find(|r| r.q == q) else {
            continue;
        };
        let sub = ray.at_times(&times);
        let raw: Vec<f64> = sub.points.iter().map(|p| p.r * p.frame.a_l).collect();
        let errs: Vec<f64> = raw.iter().map(|v| rel(*v, target)).collect();
        let last = errs.last().copied().unwrap_or(f64::NAN);
        let tail = &errs[errs.len().saturating_sub(3)..];
        let radii: Vec<f64> = sub.points.iter().map(|p| p.r).collect();
        checks.push(
            Check::lt(
                &format!("q={q} relative error of r A_L at r={:.1}", sub.last_r()),
                last,
                cfg.tolerances.al_rel,
            )
            .with_detail(format!("radii {} errors {}", fmt_list(&radii), fmt_list(&errs))),
        );
        checks.push(Check::flag(
            &format!("q={q} errors strictly decreasing over the last three radii"),
            tail.len() == 3 && strictly_decreasing_to_floor(tail),
        ));
    }
    Criterion::new(4, "r A_L tends to Q/4pi along rays", checks)
}

fn criterion_phi0(cfg: &RunConfig, art: &RunArtifacts) -> Criterion {
    let charge = art.init.charge;
    let times = cfg.check_times();
    let mut checks = Vec::new();
    for &q in &cfg.extraction.phi_rays {
        let Some(ray) = art.rays.iter().find(|r| r.q == q) else {
            continue;
        };
        let sub = ray.at_times(&times);
        let seq = corrected_sequence(&sub, charge);
        if seq.iter().all(|z| *z == Complex64::default()) {
            checks.push(Check::skipped(
                &format!("q={q} Cauchy ratio"),
                cfg.tolerances.cauchy_ratio,
                "no radiation",
            ));
            continue;
        }
        let inc = cauchy_increments(&seq, |z| z.norm());
        checks.push(
            Check::lt(
                &format!("q={q} Cauchy ratio of the phase-corrected r phi"),
                terminal_ratio(&inc),
                cfg.tolerances.cauchy_ratio,
            )
            .with_detail(format!("increments {}", fmt_list(&inc))),
        );
        let rl = ray.last_r();
        let target = -charge.coulomb();
        match phase_slope_fit(&ray.window(rl / cfg.extraction.fit_window, rl)) {
            Ok(fit) => checks.push(
                Check::lt(
                    &format!("q={q} relative error of the phase slope"),
                    rel(fit.slope, target),
                    cfg.tolerances.phase_rel,
                )
                .with_detail(format!("slope {:.6e} target {:.6e} r2 {:.4}", fit.slope, target, fit.r2)),
            ),
            Err(e) => checks.push(Check::failed(&format!("q={q} phase slope"), cfg.tolerances.phase_rel, &e)),
        }
    }
    Criterion::new(5, "radiation field and charge phase", checks)
}

fn lbar_fit(ray: &RaySample, lo: f64, hi: f64, log1p: bool) -> Result<crate::extraction::LinearFit> {
    let w = ray.window(lo, hi);
    let x: Vec<f64> = w.points.iter().map(|p| if log1p { p.r.ln_1p() } else { p.r.ln() }).collect();
    let y: Vec<f64> = w.points.iter().map(|p| p.r * p.frame.a_lbar).collect();
    linear_fit(&x, &y)
}

fn criterion_albar(cfg: &RunConfig, art: &RunArtifacts, tab: &RadiationTable) -> Criterion {
    let q = cfg.extraction.lbar_ray;
    let mut checks = Vec::new();
    let Some(ray) = art.rays.iter().find(|r| r.q == q) else {
        return Criterion::new(6, "log growth of r A_Lbar", vec![Check::skipped("ray", 0.0, "not sampled")]);
    };
    let rl = ray.last_r();
    let trivial = ray.points.iter().all(|p| p.frame.a_lbar == 0.0);
    if trivial {
        checks.push(Check::skipped("correlation", cfg.tolerances.lbar_corr, "A_Lbar vanishes"));
    } else {
        match lbar_fit(ray, rl / cfg.extraction.fit_window, rl, true) {
            Ok(f) => checks.push(
                Check::ge(
                    &format!("q={q} |correlation| of r A_Lbar with ln(1+r)"),
                    f.correlation.abs(),
                    cfg.tolerances.lbar_corr,
                )
                .with_detail(format!("slope {:.6e}", f.slope)),
            ),
            Err(e) => checks.push(Check::failed("correlation", cfg.tolerances.lbar_corr, &e)),
        }
    }
    let jt = tab.j_table();
    let sub = ray.at_times(&cfg.check_times());
    let vals: Result<Vec<f64>> = sub
        .points
        .iter()
        .map(|p| mod_albar(p.frame.a_lbar, &jt, p.t, p.r).map(|v| p.r * v))
        .collect();
    match vals {
        Ok(v) => {
            let inc = cauchy_increments(&v, f64::abs);
            checks.push(
                Check::lt(
                    &format!("q={q} Cauchy ratio of r A_Lbar^mod"),
                    terminal_ratio(&inc),
                    cfg.tolerances.cauchy_ratio,
                )
                .with_detail(format!("values {} increments {}", fmt_list(&v), fmt_list(&inc))),
            );
        }
        Err(e) => checks.push(Check::failed("modified A_Lbar", cfg.tolerances.cauchy_ratio, &e)),
    }
    Criterion::new(6, "log growth of r A_Lbar and convergence of the modified field", checks)
}

/// Slope of `𝒜_L̄` in `s` from the asymptotic model against the simulated
/// `d(r A_L̄)/d ln r`.
fn criterion_cross(cfg: &RunConfig, art: &RunArtifacts, tab: &RadiationTable) -> Criterion {
    let q = cfg.extraction.lbar_ray;
    let tol = cfg.tolerances.cross_module_rel;
    let name = "asymptotic-model A_Lbar slope against the evolution";
    let Some(ray) = art.rays.iter().find(|r| r.q == q) else {
        return Criterion::new(12, name, vec![Check::skipped("ray", tol, "not sampled")]);
    };
    let st = match AsymState::new(
        tab.q_grid[0],
        tab.dq(),
        tab.dphi0_dq.clone(),
        art.init.charge.coulomb(),
        [0.0, 0.0, 1.0],
        0.0,
    ) {
        Ok(s) => s,
        Err(e) => return Criterion::new(12, name, vec![Check::failed("model", tol, &e)]),
    };
    let pred = st.albar_slope_prediction();
    let k = ((q - tab.q_grid[0]) / tab.dq()).round() as usize;
    let p = pred.get(k).copied().unwrap_or(f64::NAN);
    if p == 0.0 {
        return Criterion::new(12, name, vec![Check::skipped("slope", tol, "no source")]);
    }
    let rl = ray.last_r();
    let check = match lbar_fit(ray, rl / CROSS_WINDOW, rl, false) {
        // the evolution gives rA_Lbar ≈ -(∫ j) ln r, the model +(∫ j) s
        Ok(f) => Check::lt(
            &format!("q={q} relative difference of -slope and model slope"),
            rel(-f.slope, p),
            tol,
        )
        .with_detail(format!("evolution slope {:.6e} model {:.6e}", f.slope, p)),
        Err(e) => Check::failed("slope", tol, &e),
    };
    Criterion::new(12, name, vec![check])
}

fn criterion_interior(cfg: &RunConfig, art: &RunArtifacts, src: &AsymSource) -> (Criterion, Option<InteriorReport>) {
    let snaps: Option<Vec<&FieldState>> = cfg.interior.t.iter().map(|&t| art.snapshots.get(t)).collect();
    let name = "interior limit t A_0 -> K_0(y)";
    let Some(snaps) = snaps else {
        return (
            Criterion::new(7, name, vec![Check::skipped("snapshots", 0.0, "missing")]),
            None,
        );
    };
    match interior_limit_check(&snaps, &art.grid, src, &cfg.interior.y, cfg.tolerances.interior_rel) {
        Ok(rep) => {
            let mut checks = Vec::new();
            for v in &rep.verdicts {
                let errs: Vec<f64> = rep.rows.iter().filter(|r| r.y_norm == v.y_norm).map(|r| r.abs_err).collect();
                checks.push(
                    Check::lt(
                        &format!("|y|={} final relative error", v.y_norm),
                        v.final_rel_err,
                        cfg.tolerances.interior_rel,
                    )
                    .with_detail(format!("abs errors {}", fmt_list(&errs))),
                );
                checks.push(Check::flag(&format!("|y|={} error decreasing in t", v.y_norm), v.decreasing));
                checks.push(Check::flag(&format!("|y|={} sign of K_0", v.y_norm), v.sign_match));
            }
            (Criterion::new(7, name, checks), Some(rep))
        }
        Err(e) => (
            Criterion::new(7, name, vec![Check::failed("interior", cfg.tolerances.interior_rel, &e)]),
            None,
        ),
    }
}

/// Closed-form angular kernel against quadrature on random admissible
/// inputs, and the decay of `A^ex - A^{ex,∞}`.
pub fn criterion_chain(cfg: &RunConfig) -> (Criterion, Option<ChainReport>) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst = 0.0f64;
    let mut err = None;
    for _ in 0..100 {
        let xn: f64 = rng.gen_range(0.0..0.9);
        let a: f64 = xn + rng.gen_range(0.1..2.0);
        let (ct, ph): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..std::f64::consts::TAU));
        let st = (1.0 - ct * ct).sqrt();
        let x = [xn * st * ph.cos(), xn * st * ph.sin(), xn * ct];
        let res = angular_kernel_integral(a, xn).and_then(|closed| {
            sphere_integral(|w| 1.0 / (a - (x[0] * w[0] + x[1] * w[1] + x[2] * w[2])), 1e-12).map(|q| (closed - q.value).abs())
        });
        match res {
            Ok(d) => worst = worst.max(d),
            Err(e) => {
                err = Some(e);
                break;
            }
        }
    }
    let mut checks = vec![match err {
        None => Check::lt("max |closed form - sphere quadrature| over 100 inputs", worst, 1e-8),
        Some(e) => Check::failed("angular kernel", 1e-8, &e),
    }];
    let s = cfg.weights.s;
    let src = AsymSource::from_fn(-1.0, 1.0, 0.01, |q| 0.75 * (1.0 - q * q));
    let bound = -(2.0 * s - 1.0) + 0.2;
    let chain = match chain_difference_report(&[20.0, 40.0, 80.0], 0.5, s, &src, &CutoffChi0::default()) {
        Ok(rep) => {
            checks.push(Check::le(
                "fitted exponent of |A^ex - A^ex,inf| at r = t/2",
                rep.fitted_exponent,
                bound,
            ));
            Some(rep)
        }
        Err(e) => {
            checks.push(Check::failed("chain", bound, &e));
            None
        }
    };
    (
        Criterion::new(8, "angular kernel and exact-to-limit potential chain", checks),
        chain,
    )
}

fn gaussian_asym(a_l: f64) -> Result<AsymState> {
    // Φ₀ = e^{iq} e^{-q²}
    let d = |q: f64| Complex64::new(-2.0 * q, 1.0) * Complex64::new(0.0, q).exp() * (-q * q).exp();
    AsymState::from_profile(-6.0, 6.0, 600, d, a_l, [0.0, 0.0, 1.0])
}

/// Max `|P(s) - P(0) e^{-i A_L s}|` relative to `sup |P(0)|`.
fn phase_error(st: &AsymState, span: f64, ds: f64) -> Result<f64> {
    let out = asymptotic::integrate(st, st.s + span, ds)?;
    let rot = Complex64::new(0.0, -st.a_l_param * span).exp();
    let sup = st.p.iter().map(|v| v.norm()).fold(0.0, f64::max);
    Ok(out.p.iter().zip(&st.p).map(|(a, b)| (a - b * rot).norm()).fold(0.0, f64::max) / sup)
}

/// Results of the asymptotic-system battery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymBattery {
    pub certificate: Certificate,
    pub phase_errors: Vec<(f64, f64)>,
    pub phase_order: f64,
    pub modulus_control: Certificate,
    pub riccati_control: Certificate,
    pub extracted: Option<Certificate>,
}

pub const ASYM_SPAN: f64 = 50.0;
pub const ASYM_DS: f64 = 1e-2;

pub fn asymptotic_battery(extracted: Option<&RadiationTable>, charge: ChargeValue) -> Result<AsymBattery> {
    let st = gaussian_asym(1.0)?;
    let certificate = asymptotic::weak_null_certificate(&st, ASYM_SPAN, ASYM_DS, 50, PhaseRhs::Null)?;
    let e1 = phase_error(&st, ASYM_SPAN, 2.0 * ASYM_DS)?;
    let e2 = phase_error(&st, ASYM_SPAN, ASYM_DS)?;
    let modulus_control = asymptotic::weak_null_certificate(&st, ASYM_SPAN, ASYM_DS, 50, PhaseRhs::ModulusPhase)?;
    let riccati_control = asymptotic::weak_null_certificate(&gaussian_asym(0.0)?, ASYM_SPAN, ASYM_DS, 50, PhaseRhs::Riccati)?;
    let extracted = match extracted {
        Some(tab) => {
            let s = AsymState::new(
                tab.q_grid[0],
                tab.dq(),
                tab.dphi0_dq.clone(),
                charge.coulomb(),
                [0.0, 0.0, 1.0],
                0.0,
            )?;
            Some(asymptotic::weak_null_certificate(&s, ASYM_SPAN, ASYM_DS, 50, PhaseRhs::Null)?)
        }
        None => None,
    };
    Ok(AsymBattery {
        certificate,
        phase_errors: vec![(2.0 * ASYM_DS, e1), (ASYM_DS, e2)],
        phase_order: (e1 / e2).log2(),
        modulus_control,
        riccati_control,
        extracted,
    })
}

pub fn criterion_asymptotic(b: &AsymBattery) -> Criterion {
    let mut checks = vec![
        Check::lt(
            "relative modulus drift of dPhi/dq over s in [0, 50]",
            b.certificate.modulus_drift,
            asymptotic::MODULUS_TOL,
        ),
        Check::lt(
            "affine-in-s residual of A_Lbar",
            b.certificate.albar_affine_residual,
            asymptotic::AFFINE_TOL,
        ),
        Check::within("observed order of the phase factorization error", b.phase_order, 4.0, 0.1)
            .with_detail(format!("errors {:?}", b.phase_errors)),
        Check::flag("non-null control -i|P|P is rejected", !b.modulus_control.pass),
        Check::flag("blow-up control |P|P is detected", b.riccati_control.blow_up),
    ];
    if let Some(c) = &b.extracted {
        checks.push(Check::lt(
            "modulus drift for the extracted radiation field",
            c.modulus_drift,
            asymptotic::MODULUS_TOL,
        ));
        checks.push(Check::lt(
            "affine residual for the extracted radiation field",
            c.albar_affine_residual,
            asymptotic::AFFINE_TOL,
        ));
    }
    Criterion::new(9, "asymptotic system and the weak null structure", checks)
}

pub fn criterion_oracles() -> Criterion {
    let checks = oracle::ORACLE_CASES
        .iter()
        .map(|name| match oracle::run_case(name) {
            Ok(c) => {
                let rel = if *name == "positivity" { ">=" } else { "<=" };
                Check::make(&c.name, c.measured, rel, c.tolerance, 0.0, c.pass)
            }
            Err(e) => Check::failed(name, 0.0, &e),
        })
        .collect();
    Criterion::new(10, "reference solver self-checks", checks)
}

/// Domain lengths (`r_max`, `t_end`, ray and interior positions) times
/// `domain`, cell count times `cells`.
pub fn scaled_config(cfg: &RunConfig, domain: f64, cells: f64) -> RunConfig {
    let mut c = cfg.clone();
    c.grid.r_max *= domain;
    c.grid.n_cells = (c.grid.n_cells as f64 * cells).round() as usize;
    c.scheme.t_end *= domain;
    c.interior.t = c.interior.t.iter().map(|t| t * domain).collect();
    let e = &mut c.extraction;
    for q in e.rays.iter_mut().chain(e.phi_rays.iter_mut()) {
        *q *= domain;
    }
    e.lbar_ray *= domain;
    e.q_min *= domain;
    e.q_max *= domain;
    c
}

/// Envelope suprema only.
pub fn envelope_run(cfg: &RunConfig) -> Result<EnvelopeSummary> {
    let grid = cfg.grid()?;
    let init = build_initial(&cfg.data.free_data(), &grid, cfg.data.decay, cfg.data.tail_tol)?;
    let scheme = SchemeParams::new(
        cfg.scheme.cfl,
        cfg.scheme.t_end,
        cfg.scheme.boundary,
        cfg.scheme.monitor_stride,
        &grid,
    )?;
    let mut env = EnvelopeRecorder::new(cfg.scheme.monitor_stride, envelope_specs(cfg)?);
    evolve_with(&init.state, &grid, &scheme, None, &mut [&mut env])?;
    Ok(envelope_summary(&env))
}

fn criterion_envelopes(cfg: &RunConfig, base: &EnvelopeSummary, doubled: Option<&Result<EnvelopeSummary>>) -> Criterion {
    let tol = cfg.tolerances.envelope_change;
    let name = "decay envelopes stable under doubling of the domain";
    let checks = match doubled {
        None => vec![Check::skipped("envelope change", tol, "studies.doubled = false")],
        Some(Err(e)) => vec![Check::failed("doubled run", tol, e)],
        Some(Ok(d)) => {
            let ch = |a: f64, b: f64| if a == 0.0 && b == 0.0 { 0.0 } else { rel(b, a) };
            vec![
                Check::lt("relative change of sup |phi| / envelope", ch(base.phi_sup, d.phi_sup), tol)
                    .with_detail(format!("{:.6e} -> {:.6e}", base.phi_sup, d.phi_sup)),
                Check::lt("relative change of sup |J_0| / envelope", ch(base.j0_sup, d.j0_sup), tol)
                    .with_detail(format!("{:.6e} -> {:.6e}", base.j0_sup, d.j0_sup)),
            ]
        }
    };
    Criterion::new(11, name, checks)
}

fn refinement_criteria(cfg: &RunConfig, art: &RunArtifacts, table: Option<&Result<ConvergenceTable>>) -> Vec<Criterion> {
    let tol = &cfg.tolerances;
    let s = art.log.rows.first();
    // data satisfy the discrete constraint exactly, so t = 0 gives 0; the
    // first nonzero sample is the truncation-level baseline
    let base = art.log.rows.iter().find(|r| r.lorenz_residual_sup > 0.0);
    let lor0 = base.map(|r| r.lorenz_residual_sup).unwrap_or(0.0);
    let lor_t = base.map(|r| r.t).unwrap_or(0.0);
    let lor_max = art.log.rows.iter().map(|r| r.lorenz_residual_sup).fold(0.0, f64::max);
    let q0 = s.map(|r| r.charge_q).unwrap_or(0.0);
    let drift = if q0 != 0.0 {
        art.log.max_charge_drift() / q0.abs()
    } else {
        art.log.max_charge_drift()
    };
    let lor_check = Check::le(
        "max Lorenz residual over its t=0 value",
        if lor0 > 0.0 {
            lor_max / lor0
        } else if lor_max == 0.0 {
            1.0
        } else {
            f64::INFINITY
        },
        tol.lorenz_factor,
    )
    .with_detail(format!("baseline {lor0:.6e} at t={lor_t} max {lor_max:.6e}"));
    let drift_check = Check::lt("relative charge drift", drift, tol.charge_drift);
    let orders = |kind: &str, t: &ConvergenceTable| -> Vec<f64> {
        t.orders
            .iter()
            .find(|o| o.quantity == kind)
            .map(|o| o.orders.clone())
            .unwrap_or_default()
    };
    let order_checks = |kind: &str, label: &str, band: Option<(f64, f64)>, min: f64| -> Vec<Check> {
        match table {
            None => vec![Check::skipped(label, min, "studies.refinement = false")],
            Some(Err(e)) => vec![Check::failed(label, min, e)],
            Some(Ok(t)) => {
                let o = orders(kind, t);
                if o.is_empty() {
                    return vec![Check::skipped(label, min, "no levels")];
                }
                let mut v: Vec<Check> = o
                    .iter()
                    .enumerate()
                    .map(|(k, p)| match band {
                        Some((c, w)) => Check::within(&format!("{label} between levels {k} and {}", k + 1), *p, c, w),
                        None => Check::ge(&format!("{label} between levels {k} and {}", k + 1), *p, min),
                    })
                    .collect();
                if let Some(row) = t.orders.iter().find(|o| o.quantity == kind) {
                    v.push(Check::flag(&format!("{label}: errors monotone"), row.monotone).with_detail(row.note.clone()));
                }
                v
            }
        }
    };
    let mut c1 = order_checks(
        "free_wave",
        "free-wave order",
        Some((tol.free_wave_order, tol.free_wave_order_tol)),
        0.0,
    );
    if let Some(Ok(t)) = table {
        if let Some(l) = t.levels.first() {
            c1.push(Check::lt(
                &format!("free-wave runtime at n={} [s]", l.n_cells),
                l.free_wave_seconds,
                60.0,
            ));
        }
    }
    let mut c2 = vec![lor_check];
    c2.extend(order_checks("lorenz", "Lorenz residual order", None, tol.order_min));
    let mut c3 = vec![drift_check];
    c3.extend(order_checks("charge_drift", "charge drift order", None, tol.order_min));
    vec![
        Criterion::new(1, "free-wave exactness", c1),
        Criterion::new(2, "Lorenz constraint propagation", c2),
        Criterion::new(3, "charge conservation", c3),
    ]
}

fn q_grid(cfg: &RunConfig, grid: &RadialGrid) -> Vec<f64> {
    let dq = if cfg.extraction.q_spacing > 0.0 {
        cfg.extraction.q_spacing
    } else {
        2.0 * grid.h
    };
    let n = ((cfg.extraction.q_max - cfg.extraction.q_min) / dq).round() as usize;
    (0..=n).map(|k| cfg.extraction.q_min + k as f64 * dq).collect()
}

fn write_failed(dir: &Path, hash: &str, err: &MkgError, log: Option<&MonitorLog>) -> Result<()> {
    fs::create_dir_all(dir)?;
    if let Some(l) = log {
        monitors_table(hash, l).write(&dir.join("monitors.csv"))?;
    }
    let mut rep = RunReport::empty(hash);
    rep.status = "FAILED".into();
    rep.error = Some(err.to_string());
    fs::write(dir.join("report.json"), to_json(&rep)?)?;
    fs::write(dir.join("FAILED"), format!("{err}\n"))?;
    Ok(())
}

/// The full pipeline; writes every output under `cfg.output.dir`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    let hash = cfg.hash();
    let dir = cfg.output.dir.clone();
    fs::create_dir_all(&dir)?;
    let _ = fs::remove_file(dir.join("FAILED"));
    let fail = |e: MkgError, log: Option<&MonitorLog>| -> MkgError {
        if let Err(w) = write_failed(&dir, &hash, &e, log) {
            return MkgError::Io(format!("{e}; writing the failure marker also failed: {w}"));
        }
        e
    };
    let mut art = match evolve_config(cfg) {
        Ok(a) => a,
        Err((e, log)) => return Err(fail(e, log.as_ref())),
    };
    let charge = art.init.charge;
    let chi = CutoffChi::default();
    let mut fi_points = Vec::new();
    let mut fi_sup = 0.0f64;
    for ray in &art.rays {
        if let Ok(f) = frame_identity_residual(ray, charge, &chi) {
            fi_sup = fi_sup.max(f.sup);
            fi_points.extend(f.points);
        }
    }
    art.log.fill_frame_identity(&fi_points, art.dt);
    monitors_table(&hash, &art.log).write(&dir.join("monitors.csv"))?;
    envelopes_csv(&hash, &art.envelopes).write(&dir.join("envelopes.csv"))?;
    if cfg.output.checkpoint {
        checkpoint::write(&dir.join("checkpoint.bin"), &art.final_state, &art.grid, &hash)?;
    }

    let times = cfg.check_times();
    let last = art.snapshots.get(times[times.len() - 1]);
    let prev = art.snapshots.get(times[times.len() - 2]);
    let (Some(last), Some(prev)) = (last, prev) else {
        return Err(fail(
            MkgError::InvalidState("check-time snapshots missing".into()),
            Some(&art.log),
        ));
    };
    let tab = match build_radiation_table(last, prev, &art.grid, &q_grid(cfg, &art.grid), charge) {
        Ok(t) => t,
        Err(e) => return Err(fail(e, Some(&art.log))),
    };
    radiation_csv(&hash, &tab).write(&dir.join("radiation.csv"))?;
    let src = AsymSource::from_table(&tab);

    let l0 = art.log.rows.first().copied();
    let ll = art.log.rows.last().copied();
    let mut rep = RunReport::empty(&hash);
    rep.monitors = Some(MonitorSummary {
        steps: art.steps,
        dt: art.dt,
        t_final: art.final_state.t,
        charge_q: charge.q,
        coulomb: charge.coulomb(),
        compat_residual: art.init.compat_residual,
        lorenz_initial: l0.map(|r| r.lorenz_residual_sup).unwrap_or(f64::NAN),
        lorenz_max: art.log.rows.iter().map(|r| r.lorenz_residual_sup).fold(0.0, f64::max),
        gauss_max: art.log.rows.iter().map(|r| r.gauss_residual_sup).fold(0.0, f64::max),
        charge_drift_rel: if charge.q != 0.0 {
            art.log.max_charge_drift() / l0.map(|r| r.charge_q.abs()).unwrap_or(1.0)
        } else {
            art.log.max_charge_drift()
        },
        energy_initial: l0.map(|r| r.energy_e).unwrap_or(f64::NAN),
        energy_final: ll.map(|r| r.energy_e).unwrap_or(f64::NAN),
        frame_identity_sup: fi_sup,
    });
    let env = envelope_summary(&art.envelopes);
    rep.envelopes = Some(env.clone());

    let refinement = cfg.studies.refinement.then(|| {
        let base = scaled_config(cfg, cfg.studies.refinement_scale, cfg.studies.refinement_scale);
        convergence_study(&base, cfg.studies.refinement_levels)
    });
    rep.criteria.extend(refinement_criteria(cfg, &art, refinement.as_ref()));
    rep.refinement = refinement.and_then(|r| r.ok());
    rep.criteria.push(criterion_al(cfg, &art));
    rep.criteria.push(criterion_phi0(cfg, &art));
    rep.criteria.push(criterion_albar(cfg, &art, &tab));
    let (c7, interior) = criterion_interior(cfg, &art, &src);
    if let Some(i) = &interior {
        interior_csv(&hash, i).write(&dir.join("interior.csv"))?;
    }
    rep.interior = interior;
    rep.criteria.push(c7);
    let (c8, chain) = criterion_chain(cfg);
    rep.chain = chain;
    rep.criteria.push(c8);
    rep.criteria.push(match asymptotic_battery(Some(&tab), charge) {
        Ok(b) => criterion_asymptotic(&b),
        Err(e) => Criterion::new(
            9,
            "asymptotic system and the weak null structure",
            vec![Check::failed("battery", 0.0, &e)],
        ),
    });
    rep.criteria.push(criterion_oracles());
    let doubled = cfg.studies.doubled.then(|| envelope_run(&scaled_config(cfg, 2.0, 2.0)));
    if let Some(Ok(d)) = &doubled {
        rep.envelopes_doubled = Some(d.clone());
    }
    rep.criteria.push(criterion_envelopes(cfg, &env, doubled.as_ref()));
    rep.criteria.push(criterion_cross(cfg, &art, &tab));
    rep.criteria.sort_by_key(|c| c.id);
    fs::write(dir.join("report.json"), to_json(&rep)?)?;
    Ok(rep)
}

/// One refinement level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRow {
    pub n_cells: usize,
    pub h: f64,
    pub free_wave_err: f64,
    pub lorenz_sup: f64,
    pub charge_drift: f64,
    pub frame_identity_sup: f64,
    pub free_wave_seconds: f64,
    /// Diagnostic when the level could not be completed (e.g. unstable).
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderRow {
    pub quantity: String,
    pub errors: Vec<f64>,
    /// `log₂(e_k / e_{k+1})`.
    pub orders: Vec<f64>,
    pub monotone: bool,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub levels: Vec<LevelRow>,
    pub orders: Vec<OrderRow>,
}

impl ConvergenceTable {
    pub fn csv(&self, hash: &str) -> CsvTable {
        let mut t = CsvTable::new(
            hash,
            &[
                "n_cells",
                "h",
                "free_wave_err",
                "lorenz_sup",
                "charge_drift",
                "frame_identity_sup",
                "free_wave_seconds",
            ],
        );
        for l in &self.levels {
            t.push(vec![
                l.n_cells as f64,
                l.h,
                l.free_wave_err,
                l.lorenz_sup,
                l.charge_drift,
                l.frame_identity_sup,
                l.free_wave_seconds,
            ]);
        }
        t
    }

    pub fn any_unstable(&self) -> bool {
        self.levels.iter().any(|l| l.failure.is_some())
    }
}

fn order_row(quantity: &str, errors: Vec<f64>) -> OrderRow {
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let monotone = errors.windows(2).all(|w| w[1] < w[0]) && errors.iter().all(|e| e.is_finite());
    let note = if monotone {
        String::new()
    } else {
        "not in asymptotic regime".to_string()
    };
    OrderRow {
        quantity: quantity.to_string(),
        errors,
        orders,
        monotone,
        note,
    }
}

fn profile_radial(p: &Profile) -> Radial {
    let (a, b) = (p.clone(), p.clone());
    Radial::from_fn(
        move |r| a.eval(r),
        move |r| {
            let e = 1e-6 * (1.0 + r);
            (b.eval(r + e) - b.eval((r - e).abs())) / (2.0 * e)
        },
        vec![],
    )
}

fn scheme_for(cfg: &RunConfig, grid: &RadialGrid) -> Result<SchemeParams> {
    match SchemeParams::new(
        cfg.scheme.cfl,
        cfg.scheme.t_end,
        cfg.scheme.boundary,
        cfg.scheme.monitor_stride,
        grid,
    ) {
        Ok(s) => Ok(s),
        // an unstable step is allowed here on purpose and reported per level
        Err(_) if cfg.scheme.cfl > 0.9 => Ok(SchemeParams::unchecked(
            cfg.scheme.cfl,
            cfg.scheme.t_end,
            cfg.scheme.boundary,
            cfg.scheme.monitor_stride,
        )),
        Err(e) => Err(e),
    }
}

struct LevelFailure(String);

fn run_level(cfg: &RunConfig, level: usize) -> Result<std::result::Result<LevelRow, LevelFailure>> {
    let n_cells = cfg.grid.n_cells << level;
    let grid = RadialGrid::new(cfg.grid.r_max, n_cells)?;
    // monitors at the same times on every level; rays keep their step
    // stride so the time differences refine with h
    let mut scheme = scheme_for(cfg, &grid)?;
    scheme.monitor_stride = cfg.scheme.monitor_stride << level;
    let unstable = |e: MkgError| match e {
        MkgError::Instability { .. } | MkgError::NonFinite { .. } => Ok(Err(LevelFailure(e.to_string()))),
        other => Err(other),
    };
    // free wave: real data keep the current and hence the potential zero
    let re = |p: &Profile| p.scaled(cfg.data.amplitude);
    let free = FreeData {
        phi0: ComplexProfile::real(re(&cfg.data.phi0_re)),
        phi0_dot: ComplexProfile::real(re(&cfg.data.phi0_dot_re)),
        ar0: Profile::Zero,
        ar0_dot: Profile::Zero,
    };
    let init = build_initial(&free, &grid, cfg.data.decay, cfg.data.tail_tol)?;
    let start = Instant::now();
    let fin = match evolve_with(&init.state, &grid, &scheme, None, &mut []) {
        Ok(s) => s,
        Err(e) => return unstable(e),
    };
    let free_wave_seconds = start.elapsed().as_secs_f64();
    let (g, h) = (profile_radial(&free.phi0.re), profile_radial(&free.phi0_dot.re));
    let mut free_wave_err = 0.0f64;
    for i in 1..grid.len() {
        let exact = oracle::dalembert_free(&g, &h, fin.t, grid.r(i))?;
        free_wave_err = free_wave_err.max((fin.phi[i].re - exact).abs());
    }

    let init = build_initial(&cfg.data.free_data(), &grid, cfg.data.decay, cfg.data.tail_tol)?;
    let mut log = MonitorLog::new(scheme.monitor_stride);
    let mut rays = RayRecorder::new(&[0.0], cfg.extraction.ray_stride, cfg.extraction.r_min, &grid);
    if let Err(e) = evolve_with(
        &init.state,
        &grid,
        &scheme,
        None,
        &mut [&mut log as &mut dyn Observer, &mut rays],
    ) {
        return unstable(e);
    }
    let q0 = log.rows.first().map(|r| r.charge_q).unwrap_or(0.0);
    let charge_drift = if q0 != 0.0 {
        log.max_charge_drift() / q0.abs()
    } else {
        log.max_charge_drift()
    };
    let frame_identity_sup = frame_identity_residual(&rays.rays[0], init.charge, &CutoffChi::default())
        .map(|f| f.sup)
        .unwrap_or(f64::NAN);
    Ok(Ok(LevelRow {
        n_cells,
        h: grid.h,
        free_wave_err,
        lorenz_sup: log.rows.iter().map(|r| r.lorenz_residual_sup).fold(0.0, f64::max),
        charge_drift,
        frame_identity_sup,
        free_wave_seconds,
        failure: None,
    }))
}

/// Runs at `h, h/2, …` (`levels` of them, starting from the configured
/// grid) and reports observed orders of the free-wave error, the Lorenz
/// residual, the charge drift and the frame-identity residual.
pub fn convergence_study(cfg: &RunConfig, levels: usize) -> Result<ConvergenceTable> {
    if levels < 3 {
        return Err(MkgError::Config(format!(
            "convergence study needs at least 3 levels, got {levels}"
        )));
    }
    let v: Vec<String> = cfg
        .violations()
        .into_iter()
        .filter(|m| !m.starts_with("scheme.cfl"))
        .collect();
    if !v.is_empty() {
        return Err(MkgError::Config(format!("invalid configuration:\n  {}", v.join("\n  "))));
    }
    let mut rows = Vec::new();
    for k in 0..levels {
        let n = cfg.grid.n_cells << k;
        let row = match run_level(cfg, k)? {
            Ok(r) => r,
            Err(LevelFailure(msg)) => LevelRow {
                n_cells: n,
                h: cfg.grid.r_max / n as f64,
                free_wave_err: f64::NAN,
                lorenz_sup: f64::NAN,
                charge_drift: f64::NAN,
                frame_identity_sup: f64::NAN,
                free_wave_seconds: f64::NAN,
                failure: Some(msg),
            },
        };
        rows.push(row);
    }
    let col = |f: fn(&LevelRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let orders = vec![
        order_row("free_wave", col(|r| r.free_wave_err)),
        order_row("lorenz", col(|r| r.lorenz_sup)),
        order_row("charge_drift", col(|r| r.charge_drift)),
        order_row("frame_identity", col(|r| r.frame_identity_sup)),
    ];
    Ok(ConvergenceTable { levels: rows, orders })
}

/// Files `run_pipeline` writes.
pub const OUTPUT_FILES: &[&str] = &[
    "monitors.csv",
    "radiation.csv",
    "interior.csv",
    "envelopes.csv",
    "report.json",
];

/// What `rerender` recovered from a run directory.
#[derive(Debug, Clone)]
pub struct Rerendered {
    pub report: serde_json::Value,
    pub text: String,
    /// Inconsistencies between the stored files.
    pub problems: Vec<String>,
    pub all_pass: bool,
}

/// Re-reads a run directory, checks that every file carries the hash of
/// `report.json`, recomputes what the CSVs determine and renders the report.
pub fn rerender(dir: &Path) -> Result<Rerendered> {
    let text = fs::read_to_string(dir.join("report.json"))?;
    let rep: serde_json::Value = serde_json::from_str(&text).map_err(|e| MkgError::Io(format!("report.json: {e}")))?;
    let hash = rep["config_hash"].as_str().unwrap_or("").to_string();
    let complete = rep["status"].as_str() == Some("COMPLETE");
    let mut problems = Vec::new();
    for f in OUTPUT_FILES.iter().filter(|f| f.ends_with(".csv")) {
        let p: PathBuf = dir.join(f);
        if !p.exists() {
            if complete && *f != "interior.csv" {
                problems.push(format!("{f} missing"));
            }
            continue;
        }
        let t = CsvTable::read(&p)?;
        if t.config_hash != hash {
            problems.push(format!("{f} has config hash {} but report.json has {hash}", t.config_hash));
        }
        let m = &rep["monitors"];
        if *f == "monitors.csv" && m.is_object() {
            if let (Some(l), Some(q)) = (t.column("lorenz_residual_sup"), t.column("charge_q")) {
                let lmax = l.iter().cloned().fold(0.0, f64::max);
                if lmax.to_bits() != num_or_nan(&m["lorenz_max"]).to_bits() {
                    problems.push(format!("monitors.csv Lorenz max {lmax:e} differs from the report"));
                }
                let q0 = q.first().copied().unwrap_or(0.0);
                let d = q.iter().map(|v| (v - q0).abs()).fold(0.0, f64::max);
                let d = if q0 != 0.0 { d / q0.abs() } else { d };
                if d.to_bits() != num_or_nan(&m["charge_drift_rel"]).to_bits() {
                    problems.push(format!("monitors.csv charge drift {d:e} differs from the report"));
                }
            }
        }
        if *f == "interior.csv" {
            if let (Some(e), Some(rows)) = (t.column("abs_err"), rep["interior"]["rows"].as_array()) {
                let stored: Vec<f64> = rows.iter().map(|r| num_or_nan(&r["abs_err"])).collect();
                if e.len() != stored.len() || e.iter().zip(&stored).any(|(a, b)| a.to_bits() != b.to_bits()) {
                    problems.push("interior.csv errors differ from the report".into());
                }
            }
        }
    }
    let ckpt = dir.join("checkpoint.bin");
    if ckpt.exists() {
        let (_, side) = checkpoint::read(&ckpt)?;
        if side.config_hash != hash {
            problems.push(format!("checkpoint has config hash {}", side.config_hash));
        }
    }
    let all_pass = complete
        && rep["criteria"]
            .as_array()
            .map(|c| c.iter().all(|x| x["status"].as_str() != Some("FAIL")))
            .unwrap_or(false);
    Ok(Rerendered {
        text: render_value(&rep),
        report: rep,
        problems,
        all_pass,
    })
}

/// The asymptotic-system battery on its own; writes `asymptotic.csv`
/// (the Gaussian model at `s = 0, 10, …, 50`) and `asymptotic.json`.
pub fn run_asymptotic(cfg: &RunConfig) -> Result<(Criterion, AsymBattery)> {
    let hash = cfg.hash();
    fs::create_dir_all(&cfg.output.dir)?;
    let b = asymptotic_battery(None, ChargeValue::new(0.0))?;
    let st = gaussian_asym(1.0)?;
    let s_list: Vec<f64> = (1..=5).map(|k| 10.0 * k as f64).collect();
    let mut states = vec![st.clone()];
    states.extend(asymptotic::trajectory(&st, &s_list, ASYM_DS, PhaseRhs::Null)?);
    let mut f = fs::File::create(cfg.output.dir.join("asymptotic.csv"))?;
    asymptotic::write_csv(&mut f, &hash, &states)?;
    let c = criterion_asymptotic(&b);
    let body = serde_json::json!({ "config_hash": hash, "battery": &b, "criteria": [&c] });
    fs::write(cfg.output.dir.join("asymptotic.json"), to_json(&body)?)?;
    Ok((c, b))
}
