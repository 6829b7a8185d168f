//! Constraint, charge and energy monitors and the recorders that sample a
//! running evolution.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::Observer;
use crate::error::Result;
use crate::extraction::{EnvelopeQuantity, WeightSpec};
use crate::field::{
    current, current_at, d_r, divergence_odd, field_strength, interp_cubic, FieldState, NullFrameSample, Parity, RadialGrid,
};
use crate::quad::simpson;

/// `sup |−∂_t a0 + (1/r²)∂_r(r² ar)|`.
pub fn lorenz_residual(state: &FieldState, grid: &RadialGrid) -> f64 {
    (0..state.len())
        .map(|i| (-state.a0_t[i] + divergence_odd(&state.ar, grid.h, i)).abs())
        .fold(0.0, f64::max)
}

/// `sup |(1/r²)∂_r(r² E) − J₀|`.
pub fn gauss_residual(state: &FieldState, grid: &RadialGrid) -> f64 {
    let e = field_strength(state, grid);
    let mut e = e;
    e[0] = 0.0;
    let (j0, _) = current(state, grid);
    (0..state.len())
        .map(|i| (divergence_odd(&e, grid.h, i) - j0[i]).abs())
        .fold(0.0, f64::max)
}

/// `Q(t) = 4π ∫ J₀ r² dr`.
pub fn charge_monitor(state: &FieldState, grid: &RadialGrid) -> f64 {
    let (j0, _) = current(state, grid);
    let f: Vec<f64> = j0.iter().enumerate().map(|(i, v)| v * grid.r(i).powi(2)).collect();
    4.0 * PI * simpson(&f, grid.h)
}

/// `4π ∫ [½|D_tφ|² + ½|D_rφ|² + ½E²] r² dr`.
pub fn energy_monitor(state: &FieldState, grid: &RadialGrid) -> f64 {
    let e = field_strength(state, grid);
    let f: Vec<f64> = (0..state.len())
        .map(|i| {
            let r = grid.r(i);
            let p = state.phi[i];
            let dt = state.phi_t[i] + Complex64::new(0.0, state.a0[i]) * p;
            let dr = d_r(&state.phi, grid.h, i, Parity::Even) + Complex64::new(0.0, state.ar[i]) * p;
            0.5 * (dt.norm_sqr() + dr.norm_sqr() + e[i] * e[i]) * r * r
        })
        .collect();
    4.0 * PI * simpson(&f, grid.h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorRow {
    pub t: f64,
    pub lorenz_residual_sup: f64,
    pub gauss_residual_sup: f64,
    pub charge_q: f64,
    pub energy_e: f64,
    /// Filled after the run from ray samples; NaN where no ray point exists.
    pub frame_identity_residual_sup: f64,
}

/// Time series of monitors every `stride` steps (and at the final step).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorLog {
    pub stride: usize,
    pub rows: Vec<MonitorRow>,
}

impl MonitorLog {
    pub fn new(stride: usize) -> Self {
        MonitorLog {
            stride: stride.max(1),
            rows: Vec::new(),
        }
    }

    pub fn record(&mut self, state: &FieldState, grid: &RadialGrid) {
        self.rows.push(MonitorRow {
            t: state.t,
            lorenz_residual_sup: lorenz_residual(state, grid),
            gauss_residual_sup: gauss_residual(state, grid),
            charge_q: charge_monitor(state, grid),
            energy_e: energy_monitor(state, grid),
            frame_identity_residual_sup: f64::NAN,
        });
    }

    pub fn times_strictly_increasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].t > w[0].t)
    }

    /// Fills the frame-identity column with the largest residual among
    /// `(t, value)` points within half a stride of each row.
    pub fn fill_frame_identity(&mut self, points: &[(f64, f64)], dt: f64) {
        let half = 0.5 * self.stride as f64 * dt;
        for row in &mut self.rows {
            let mut m = f64::NAN;
            for &(t, v) in points {
                if (t - row.t).abs() <= half + 1e-12 {
                    m = if m.is_nan() { v } else { m.max(v) };
                }
            }
            row.frame_identity_residual_sup = m;
        }
    }

    pub fn max_charge_drift(&self) -> f64 {
        let q0 = self.rows.first().map(|r| r.charge_q).unwrap_or(0.0);
        self.rows.iter().map(|r| (r.charge_q - q0).abs()).fold(0.0, f64::max)
    }
}

impl Observer for MonitorLog {
    fn observe(&mut self, state: &FieldState, grid: &RadialGrid, step: usize, total: usize) -> Result<()> {
        if step.is_multiple_of(self.stride) || step == total {
            self.record(state, grid);
        }
        Ok(())
    }
}

/// One sample on an outgoing ray `r = t + q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayPoint {
    pub t: f64,
    pub r: f64,
    pub frame: NullFrameSample,
    pub phi: Complex64,
    pub rphi: Complex64,
    /// `r · L̄(r A_L)`
    pub r_lbar_ral: f64,
    /// `r² J_L`
    pub r2_jl: f64,
}

/// Samples along the ray with retarded label `u = t - r = -q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaySample {
    pub q: f64,
    pub points: Vec<RayPoint>,
    /// Set when the ray left `[r_min, 0.95 r_max]` before the run ended.
    pub truncated: bool,
}

impl RaySample {
    pub fn u(&self) -> f64 {
        -self.q
    }

    /// The points nearest to each requested time (duplicates removed).
    pub fn at_times(&self, times: &[f64]) -> RaySample {
        let mut points: Vec<RayPoint> = Vec::new();
        for &t in times {
            if let Some(p) = self.points.iter().min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs())) {
                if points.last().map(|l| l.t < p.t).unwrap_or(true) {
                    points.push(*p);
                }
            }
        }
        RaySample {
            q: self.q,
            points,
            truncated: self.truncated,
        }
    }

    /// Points with `r` in `[lo, hi]`.
    pub fn window(&self, lo: f64, hi: f64) -> RaySample {
        RaySample {
            q: self.q,
            points: self.points.iter().filter(|p| p.r >= lo && p.r <= hi).copied().collect(),
            truncated: self.truncated,
        }
    }

    pub fn last_r(&self) -> f64 {
        self.points.last().map(|p| p.r).unwrap_or(0.0)
    }
}

/// Cubic interpolation of a nodal quantity that needs centered neighbours.
fn interp_local<F: Fn(usize) -> f64>(grid: &RadialGrid, r: f64, f: F) -> f64 {
    let x = r / grid.h;
    let n = grid.n_cells as isize;
    let i0 = (x.floor() as isize - 1).clamp(1, n - 4);
    let s = x - i0 as f64;
    let w = [
        -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0,
        s * (s - 2.0) * (s - 3.0) / 2.0,
        -s * (s - 1.0) * (s - 3.0) / 2.0,
        s * (s - 1.0) * (s - 2.0) / 6.0,
    ];
    (0..4).map(|k| w[k] * f((i0 + k as isize) as usize)).sum()
}

/// Ray quantities at `r = t + q` from the current slice.
pub fn sample_ray_point(state: &FieldState, grid: &RadialGrid, q: f64) -> Result<RayPoint> {
    let r = state.t + q;
    let frame = crate::field::null_decompose(state, grid, r)?;
    let phi = interp_cubic(&state.phi, grid.h, r, Parity::Even);
    let h = grid.h;
    let u = |i: usize| grid.r(i) * (state.a0[i] + state.ar[i]);
    let x = interp_local(grid, r, |i| {
        let ri = grid.r(i);
        let u_t = ri * (state.a0_t[i] + state.ar_t[i]);
        let u_r = (u(i + 1) - u(i - 1)) / (2.0 * h);
        ri * (u_t - u_r)
    });
    let z = interp_local(grid, r, |i| {
        let (j0, jr) = current_at(state, h, i);
        grid.r(i).powi(2) * (j0 + jr)
    });
    Ok(RayPoint {
        t: state.t,
        r,
        frame,
        phi,
        rphi: phi * r,
        r_lbar_ral: x,
        r2_jl: z,
    })
}

/// Records ray points every `stride` steps for each `q`.
#[derive(Debug, Clone)]
pub struct RayRecorder {
    pub stride: usize,
    pub r_min: f64,
    pub r_limit: f64,
    pub rays: Vec<RaySample>,
}

impl RayRecorder {
    pub fn new(q_list: &[f64], stride: usize, r_min: f64, grid: &RadialGrid) -> Self {
        RayRecorder {
            stride: stride.max(1),
            r_min: r_min.max(4.0 * grid.h),
            r_limit: 0.95 * grid.r_max,
            rays: q_list
                .iter()
                .map(|&q| RaySample {
                    q,
                    points: Vec::new(),
                    truncated: false,
                })
                .collect(),
        }
    }
}

impl Observer for RayRecorder {
    fn observe(&mut self, state: &FieldState, grid: &RadialGrid, step: usize, _total: usize) -> Result<()> {
        if !step.is_multiple_of(self.stride) {
            return Ok(());
        }
        for ray in &mut self.rays {
            let r = state.t + ray.q;
            if r < self.r_min {
                continue;
            }
            if r > self.r_limit {
                ray.truncated = true;
                continue;
            }
            ray.points.push(sample_ray_point(state, grid, ray.q)?);
        }
        Ok(())
    }
}

/// Keeps full copies of the slices nearest to the requested times.
#[derive(Debug, Clone)]
pub struct SnapshotRecorder {
    pub targets: Vec<f64>,
    pub dt: f64,
    pub snapshots: Vec<FieldState>,
}

impl SnapshotRecorder {
    pub fn new(targets: &[f64], dt: f64) -> Self {
        SnapshotRecorder {
            targets: targets.to_vec(),
            dt,
            snapshots: Vec::new(),
        }
    }

    /// Snapshot nearest to `t`, if one was recorded within `dt`.
    pub fn get(&self, t: f64) -> Option<&FieldState> {
        self.snapshots.iter().find(|s| (s.t - t).abs() <= 0.5 * self.dt + 1e-9)
    }
}

impl Observer for SnapshotRecorder {
    fn observe(&mut self, state: &FieldState, _grid: &RadialGrid, _step: usize, _total: usize) -> Result<()> {
        let hit = self
            .targets
            .iter()
            .any(|&t| (state.t - t).abs() <= 0.5 * self.dt + 1e-9 && self.get(t).is_none());
        if hit {
            self.snapshots.push(state.clone());
        }
        Ok(())
    }
}

/// Running weighted suprema of |φ| and |J₀| over the evolved domain.
#[derive(Debug, Clone)]
pub struct EnvelopeRecorder {
    pub stride: usize,
    pub specs: Vec<(EnvelopeQuantity, WeightSpec)>,
    /// Per spec: (sup ratio, t, r) over everything observed so far.
    pub sup: Vec<(f64, f64, f64)>,
    /// Per observation and spec: (t, spec index, sup ratio at that time, r).
    pub rows: Vec<(f64, usize, f64, f64)>,
}

impl EnvelopeRecorder {
    pub fn new(stride: usize, specs: Vec<(EnvelopeQuantity, WeightSpec)>) -> Self {
        let n = specs.len();
        EnvelopeRecorder {
            stride: stride.max(1),
            specs,
            sup: vec![(0.0, 0.0, 0.0); n],
            rows: Vec::new(),
        }
    }
}

impl Observer for EnvelopeRecorder {
    fn observe(&mut self, state: &FieldState, grid: &RadialGrid, step: usize, total: usize) -> Result<()> {
        if !step.is_multiple_of(self.stride) && step != total {
            return Ok(());
        }
        let (j0, _) = current(state, grid);
        for (k, (quantity, spec)) in self.specs.iter().enumerate() {
            let mut best = (0.0, state.t, 0.0);
            for i in 0..grid.len() {
                let r = grid.r(i);
                let v = match quantity {
                    EnvelopeQuantity::PhiModulus => state.phi[i].norm(),
                    EnvelopeQuantity::J0 => j0[i].abs(),
                };
                if v == 0.0 {
                    continue;
                }
                let ratio = v / spec.envelope(state.t, r)?;
                if ratio > best.0 {
                    best = (ratio, state.t, r);
                }
            }
            self.rows.push((state.t, k, best.0, best.2));
            if best.0 > self.sup[k].0 {
                self.sup[k] = best;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lorenz_examples() {
        let g = RadialGrid::new(10.0, 100).unwrap();
        let mut s = FieldState::zeros(&g, 0.0);
        s.a0_t = vec![1.0; g.len()];
        s.ar = g.sample(|r| r / 3.0);
        assert!(lorenz_residual(&s, &g) < 1e-12);
        s.ar = vec![0.0; g.len()];
        assert!((lorenz_residual(&s, &g) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_state_monitors() {
        let g = RadialGrid::new(10.0, 100).unwrap();
        let s = FieldState::zeros(&g, 0.0);
        assert_eq!(charge_monitor(&s, &g), 0.0);
        assert_eq!(energy_monitor(&s, &g), 0.0);
        assert_eq!(gauss_residual(&s, &g), 0.0);
    }

    #[test]
    fn coulomb_ray_samples() {
        let g = RadialGrid::new(100.0, 2000).unwrap();
        let mut s = FieldState::zeros(&g, 30.0);
        let qc = 0.2;
        s.a0 = g.sample(|r| if r >= 1.0 { qc / r } else { qc * (1.5 - 0.5 * r * r) });
        for q in [-20.0, 0.0, 20.0] {
            let p = sample_ray_point(&s, &g, q).unwrap();
            let r = 30.0 + q;
            assert!((p.frame.a_l - qc / r).abs() < 1e-7 / r);
            assert!(((p.r - p.t) - q).abs() < 1e-12);
        }
    }
}
