//! Method-of-lines evolution of the reduced system with classical RK4.

pub mod checkpoint;
pub mod monitors;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{MkgError, Result};
use crate::field::{current_at, d_r, laplacian_even, vector_laplacian_odd, FieldState, Parity, RadialGrid};

pub use monitors::{
    charge_monitor, energy_monitor, gauss_residual, lorenz_residual, EnvelopeRecorder, MonitorLog, MonitorRow, RayPoint,
    RayRecorder, RaySample, SnapshotRecorder,
};

/// Outer boundary closure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// `∂_t(r u) + ∂_r(r u) = 0` at `r_max`.
    Sommerfeld,
    /// The outer node is frozen; valid under the causality shield.
    None,
}

impl std::str::FromStr for Boundary {
    type Err = MkgError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sommerfeld" => Ok(Boundary::Sommerfeld),
            "none" => Ok(Boundary::None),
            other => Err(MkgError::InvalidScheme(format!("unknown boundary '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeParams {
    pub cfl: f64,
    pub t_end: f64,
    pub boundary: Boundary,
    pub monitor_stride: usize,
}

impl SchemeParams {
    /// Validated parameters: `0 < cfl <= 0.9`, and `t_end <= 0.9 r_max`
    /// without a boundary condition.
    pub fn new(cfl: f64, t_end: f64, boundary: Boundary, monitor_stride: usize, grid: &RadialGrid) -> Result<Self> {
        let mut problems = Vec::new();
        if !(cfl > 0.0 && cfl <= 0.9) {
            problems.push(format!("cfl = {cfl} must satisfy 0 < cfl <= 0.9"));
        }
        if !(t_end.is_finite() && t_end >= 0.0) {
            problems.push(format!("t_end = {t_end} must be non-negative"));
        }
        if boundary == Boundary::None && t_end > 0.9 * grid.r_max {
            problems.push(format!(
                "t_end = {t_end} exceeds the causality shield 0.9 r_max = {}",
                0.9 * grid.r_max
            ));
        }
        if monitor_stride == 0 {
            problems.push("monitor_stride must be positive".into());
        }
        if !problems.is_empty() {
            return Err(MkgError::InvalidScheme(problems.join("; ")));
        }
        Ok(SchemeParams {
            cfl,
            t_end,
            boundary,
            monitor_stride,
        })
    }

    /// Skips validation; used to exercise the instability detector.
    pub fn unchecked(cfl: f64, t_end: f64, boundary: Boundary, monitor_stride: usize) -> Self {
        SchemeParams {
            cfl,
            t_end,
            boundary,
            monitor_stride: monitor_stride.max(1),
        }
    }

    pub fn dt(&self, grid: &RadialGrid) -> f64 {
        self.cfl * grid.h
    }

    /// Number of steps; the run ends at `steps · dt`, the multiple of `dt`
    /// closest to `t_end`.
    pub fn steps(&self, grid: &RadialGrid) -> usize {
        (self.t_end / self.dt(grid)).round() as usize
    }
}

/// External forcing added to the second time derivatives (manufactured
/// solutions).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SourceTerms {
    pub phi: Complex64,
    pub a0: f64,
    pub ar: f64,
}

pub type Source = dyn Fn(f64, f64) -> SourceTerms + Send + Sync;

/// Time derivative of the first-order system, written into `out`.
pub fn rhs_into(state: &FieldState, grid: &RadialGrid, boundary: Boundary, source: Option<&Source>, out: &mut FieldState) {
    let h = grid.h;
    let n = grid.n_cells;
    let two_i = Complex64::new(0.0, 2.0);
    for i in 0..n {
        let phi = state.phi[i];
        let pt = state.phi_t[i];
        let a0 = state.a0[i];
        let ar = state.ar[i];
        let phi_r = d_r(&state.phi, h, i, Parity::Even);
        let (j0, jr) = current_at(state, h, i);
        let mut phi_tt = laplacian_even(&state.phi, h, i) + two_i * (pt * (-a0) + phi_r * ar) - phi * (ar * ar - a0 * a0);
        let mut a0_tt = laplacian_even(&state.a0, h, i) + j0;
        let mut ar_tt = if i == 0 {
            0.0
        } else {
            vector_laplacian_odd(&state.ar, h, i) + jr
        };
        if let Some(src) = source {
            let s = src(state.t, grid.r(i));
            phi_tt += s.phi;
            a0_tt += s.a0;
            if i > 0 {
                ar_tt += s.ar;
            }
        }
        out.phi[i] = pt;
        out.phi_t[i] = phi_tt;
        out.a0[i] = state.a0_t[i];
        out.a0_t[i] = a0_tt;
        out.ar[i] = if i == 0 { 0.0 } else { state.ar_t[i] };
        out.ar_t[i] = ar_tt;
    }
    match boundary {
        Boundary::None => {
            out.phi[n] = Complex64::default();
            out.phi_t[n] = Complex64::default();
            out.a0[n] = 0.0;
            out.a0_t[n] = 0.0;
            out.ar[n] = 0.0;
            out.ar_t[n] = 0.0;
        }
        Boundary::Sommerfeld => {
            let r = grid.r(n);
            out.phi[n] = -(d_r(&state.phi, h, n, Parity::Even) + state.phi[n] * (1.0 / r));
            out.phi_t[n] = -(d_r(&state.phi_t, h, n, Parity::Even) + state.phi_t[n] * (1.0 / r));
            out.a0[n] = -(d_r(&state.a0, h, n, Parity::Even) + state.a0[n] / r);
            out.a0_t[n] = -(d_r(&state.a0_t, h, n, Parity::Even) + state.a0_t[n] / r);
            out.ar[n] = -(d_r(&state.ar, h, n, Parity::Odd) + state.ar[n] / r);
            out.ar_t[n] = -(d_r(&state.ar_t, h, n, Parity::Odd) + state.ar_t[n] / r);
        }
    }
}

/// Checked right-hand side: the derivative of every evolved array.
pub fn rhs(state: &FieldState, grid: &RadialGrid, boundary: Boundary) -> Result<FieldState> {
    state.validate(grid)?;
    let mut out = FieldState::zeros(grid, state.t);
    rhs_into(state, grid, boundary, None, &mut out);
    if let Some(node) = out.first_non_finite() {
        return Err(MkgError::NonFinite { node, t: state.t });
    }
    Ok(out)
}

fn combine(out: &mut FieldState, base: &FieldState, k: &FieldState, c: f64) {
    for i in 0..base.len() {
        out.phi[i] = base.phi[i] + k.phi[i] * c;
        out.phi_t[i] = base.phi_t[i] + k.phi_t[i] * c;
        out.a0[i] = base.a0[i] + k.a0[i] * c;
        out.a0_t[i] = base.a0_t[i] + k.a0_t[i] * c;
        out.ar[i] = base.ar[i] + k.ar[i] * c;
        out.ar_t[i] = base.ar_t[i] + k.ar_t[i] * c;
    }
}

/// RK4 stepper with preallocated stage buffers and the instability guard.
pub struct Evolver {
    pub grid: RadialGrid,
    pub scheme: SchemeParams,
    source: Option<Box<Source>>,
    k: [FieldState; 4],
    tmp: FieldState,
    limit: f64,
}

impl Evolver {
    pub fn new(grid: RadialGrid, scheme: SchemeParams) -> Self {
        let z = FieldState::zeros(&grid, 0.0);
        Evolver {
            grid,
            scheme,
            source: None,
            k: [z.clone(), z.clone(), z.clone(), z.clone()],
            tmp: z,
            limit: f64::INFINITY,
        }
    }

    pub fn with_source(mut self, source: Box<Source>) -> Self {
        self.source = Some(source);
        self
    }

    /// Arms the detector at `10⁶ ×` the sup-norm of `initial`.
    pub fn arm(&mut self, initial: &FieldState) {
        let s = initial.sup_norm();
        self.limit = if s > 0.0 { 1e6 * s } else { f64::INFINITY };
    }

    /// One RK4 step of size `dt` (negative allowed); `t` is set to `t_new`.
    pub fn step_to(&mut self, state: &mut FieldState, dt: f64, t_new: f64) -> Result<()> {
        let t0 = state.t;
        let b = self.scheme.boundary;
        let src = self.source.as_deref();
        let [k1, k2, k3, k4] = &mut self.k;
        rhs_into(state, &self.grid, b, src, k1);
        combine(&mut self.tmp, state, k1, 0.5 * dt);
        self.tmp.t = t0 + 0.5 * dt;
        rhs_into(&self.tmp, &self.grid, b, src, k2);
        combine(&mut self.tmp, state, k2, 0.5 * dt);
        rhs_into(&self.tmp, &self.grid, b, src, k3);
        combine(&mut self.tmp, state, k3, dt);
        self.tmp.t = t0 + dt;
        rhs_into(&self.tmp, &self.grid, b, src, k4);
        let c = dt / 6.0;
        for i in 0..state.len() {
            state.phi[i] += (k1.phi[i] + (k2.phi[i] + k3.phi[i]) * 2.0 + k4.phi[i]) * c;
            state.phi_t[i] += (k1.phi_t[i] + (k2.phi_t[i] + k3.phi_t[i]) * 2.0 + k4.phi_t[i]) * c;
            state.a0[i] += (k1.a0[i] + 2.0 * (k2.a0[i] + k3.a0[i]) + k4.a0[i]) * c;
            state.a0_t[i] += (k1.a0_t[i] + 2.0 * (k2.a0_t[i] + k3.a0_t[i]) + k4.a0_t[i]) * c;
            state.ar[i] += (k1.ar[i] + 2.0 * (k2.ar[i] + k3.ar[i]) + k4.ar[i]) * c;
            state.ar_t[i] += (k1.ar_t[i] + 2.0 * (k2.ar_t[i] + k3.ar_t[i]) + k4.ar_t[i]) * c;
        }
        state.t = t_new;
        let sup = state.sup_norm();
        if sup.is_nan() || sup.is_infinite() {
            let node = state.first_non_finite().unwrap_or(0);
            return Err(MkgError::NonFinite { node, t: t_new });
        }
        if sup > self.limit {
            return Err(MkgError::Instability {
                t: t_new,
                sup,
                limit: self.limit,
            });
        }
        Ok(())
    }

    pub fn step(&mut self, state: &mut FieldState) -> Result<()> {
        let dt = self.scheme.dt(&self.grid);
        let t = state.t + dt;
        self.step_to(state, dt, t)
    }
}

/// One step of size `cfl · h`.
pub fn step(state: &FieldState, grid: &RadialGrid, scheme: &SchemeParams) -> Result<FieldState> {
    let mut ev = Evolver::new(*grid, *scheme);
    let mut s = state.clone();
    ev.step(&mut s)?;
    Ok(s)
}

/// Receives the state after selected steps of [`evolve`].
pub trait Observer {
    /// Called after step `step` (0 is the initial slice) with `total` steps.
    fn observe(&mut self, state: &FieldState, grid: &RadialGrid, step: usize, total: usize) -> Result<()>;
}

/// Runs from `initial` to `t_end`. Times are `t0 + k·dt` exactly.
pub fn evolve_with(
    initial: &FieldState,
    grid: &RadialGrid,
    scheme: &SchemeParams,
    source: Option<Box<Source>>,
    observers: &mut [&mut dyn Observer],
) -> Result<FieldState> {
    initial.validate(grid)?;
    let mut ev = Evolver::new(*grid, *scheme);
    if let Some(s) = source {
        ev = ev.with_source(s);
    }
    ev.arm(initial);
    let total = scheme.steps(grid);
    let dt = scheme.dt(grid);
    let t0 = initial.t;
    let mut state = initial.clone();
    for o in observers.iter_mut() {
        o.observe(&state, grid, 0, total)?;
    }
    for k in 1..=total {
        ev.step_to(&mut state, dt, t0 + k as f64 * dt)?;
        for o in observers.iter_mut() {
            o.observe(&state, grid, k, total)?;
        }
    }
    Ok(state)
}

/// Result of a monitored run.
#[derive(Debug, Clone)]
pub struct EvolutionOutput {
    pub final_state: FieldState,
    pub log: MonitorLog,
    pub rays: Vec<RaySample>,
}

/// Evolution with the monitor log and ray samples on `q_list`.
pub fn evolve(
    initial: &FieldState,
    grid: &RadialGrid,
    scheme: &SchemeParams,
    q_list: &[f64],
    ray_stride: usize,
) -> Result<EvolutionOutput> {
    let mut log = MonitorLog::new(scheme.monitor_stride);
    let mut rays = RayRecorder::new(q_list, ray_stride, 1.0, grid);
    let final_state = evolve_with(initial, grid, scheme, None, &mut [&mut log, &mut rays])?;
    Ok(EvolutionOutput {
        final_state,
        log,
        rays: rays.rays,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> RadialGrid {
        RadialGrid::new(20.0, 400).unwrap()
    }

    #[test]
    fn zero_state_has_zero_rhs_and_stays_zero() {
        let g = grid();
        let z = FieldState::zeros(&g, 0.0);
        let r = rhs(&z, &g, Boundary::Sommerfeld).unwrap();
        assert_eq!(r.sup_norm(), 0.0);
        let sch = SchemeParams::new(0.5, 1.0, Boundary::None, 1, &g).unwrap();
        let out = step(&z, &g, &sch).unwrap();
        assert_eq!(out.sup_norm(), 0.0);
    }

    #[test]
    fn scheme_validation() {
        let g = grid();
        assert!(SchemeParams::new(1.5, 1.0, Boundary::None, 1, &g).is_err());
        assert!(SchemeParams::new(0.5, 19.0, Boundary::None, 1, &g).is_err());
        assert!(SchemeParams::new(0.5, 19.0, Boundary::Sommerfeld, 1, &g).is_ok());
    }

    #[test]
    fn linear_limit_matches_radial_form() {
        // A = 0, φ real: rhs of φ_t is (1/r)(rφ)'' to O(h²)
        let mut errs = Vec::new();
        for n in [200, 400, 800] {
            let g = RadialGrid::new(10.0, n).unwrap();
            let mut s = FieldState::zeros(&g, 0.0);
            s.phi = g.sample(|r| Complex64::new((-r * r).exp(), 0.0));
            let out = rhs(&s, &g, Boundary::None).unwrap();
            let mut e = 0.0f64;
            for i in 1..g.n_cells {
                let r = g.r(i);
                let exact = (4.0 * r * r - 6.0) * (-r * r).exp();
                e = e.max((out.phi_t[i].re - exact).abs());
            }
            errs.push(e);
        }
        assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5, "{errs:?}");
    }

    #[test]
    fn nan_is_reported() {
        let g = grid();
        let mut s = FieldState::zeros(&g, 0.0);
        s.a0[7] = f64::NAN;
        assert!(matches!(
            rhs(&s, &g, Boundary::None),
            Err(MkgError::NonFinite { node: 7, .. })
        ));
    }

    #[test]
    fn unstable_cfl_is_detected() {
        let g = RadialGrid::new(20.0, 200).unwrap();
        let mut s = FieldState::zeros(&g, 0.0);
        s.phi = g.sample(|r| Complex64::new((-r * r).exp(), 0.0));
        let sch = SchemeParams::unchecked(1.5, 18.0, Boundary::None, 10);
        let res = evolve_with(&s, &g, &sch, None, &mut []);
        assert!(matches!(
            res,
            Err(MkgError::Instability { .. }) | Err(MkgError::NonFinite { .. })
        ));
    }
}
