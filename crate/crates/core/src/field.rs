//! Grids, field containers, the null frame, weights and the current.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{MkgError, Result};

/// Uniform radial grid on `[0, r_max]` with nodes `r_i = i h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub r_max: f64,
    pub n_cells: usize,
    pub h: f64,
    /// Number of reflected nodes the stencils may read below `r = 0`.
    pub ghost_count: usize,
}

impl RadialGrid {
    pub fn new(r_max: f64, n_cells: usize) -> Result<Self> {
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(MkgError::InvalidGrid(format!("r_max must be positive, got {r_max}")));
        }
        if n_cells < 16 {
            return Err(MkgError::InvalidGrid(format!("n_cells must be at least 16, got {n_cells}")));
        }
        Ok(RadialGrid {
            r_max,
            n_cells,
            h: r_max / n_cells as f64,
            ghost_count: 2,
        })
    }

    /// Number of nodes (`n_cells + 1`).
    pub fn len(&self) -> usize {
        self.n_cells + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn r(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.r(i)).collect()
    }

    pub fn sample<T, F: Fn(f64) -> T>(&self, f: F) -> Vec<T> {
        (0..self.len()).map(|i| f(self.r(i))).collect()
    }
}

/// Values that the finite-difference stencils act on.
pub trait Sample:
    Copy + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + Neg<Output = Self> + Send + Sync
{
    fn magnitude(self) -> f64;
}

impl Sample for f64 {
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl Sample for Complex64 {
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

/// Behaviour of a radial profile under `r -> -r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// `f[i]` with parity reflection for negative indices (ghost nodes).
#[inline]
pub fn ghost<T: Sample>(f: &[T], i: isize, parity: Parity) -> T {
    if i >= 0 {
        f[i as usize]
    } else {
        let v = f[(-i) as usize];
        match parity {
            Parity::Even => v,
            Parity::Odd => -v,
        }
    }
}

/// First radial derivative at node `i`: centered inside, parity ghosts at
/// the origin and one-sided second order at `r_max`.
#[inline]
pub fn d_r<T: Sample>(f: &[T], h: f64, i: usize, parity: Parity) -> T {
    let n = f.len() - 1;
    if i == n {
        (f[n] * 3.0 - f[n - 1] * 4.0 + f[n - 2]) * (0.5 / h)
    } else {
        let ii = i as isize;
        (f[i + 1] - ghost(f, ii - 1, parity)) * (0.5 / h)
    }
}

pub fn d_r_all<T: Sample>(f: &[T], h: f64, parity: Parity) -> Vec<T> {
    (0..f.len()).map(|i| d_r(f, h, i, parity)).collect()
}

/// `f'' + (2/r) f'` for an even profile at an interior node `i < n`.
///
/// For `i >= 1` this equals the centered `(1/r) D²(r f)`; at the origin the
/// limit `3 f''(0)` is used.
#[inline]
pub fn laplacian_even<T: Sample>(f: &[T], h: f64, i: usize) -> T {
    if i == 0 {
        (f[1] - f[0]) * (6.0 / (h * h))
    } else {
        let r = i as f64 * h;
        (f[i + 1] - f[i] * 2.0 + f[i - 1]) * (1.0 / (h * h)) + (f[i + 1] - f[i - 1]) * (1.0 / (r * h))
    }
}

/// Even quotient `w = f / r` of an odd profile, with `w_0` extrapolated.
#[inline]
fn odd_quotient(f: &[f64], h: f64, i: usize) -> f64 {
    if i == 0 {
        let w1 = f[1] / h;
        let w2 = f[2] / (2.0 * h);
        (4.0 * w1 - w2) / 3.0
    } else {
        f[i] / (i as f64 * h)
    }
}

/// `f'' + (2/r) f' - 2 f / r²` for an odd profile at `1 <= i < n`, written as
/// `r (w'' + 4 w' / r)` with `w = f / r`. Zero at the origin.
#[inline]
pub fn vector_laplacian_odd(f: &[f64], h: f64, i: usize) -> f64 {
    if i == 0 {
        return 0.0;
    }
    let r = i as f64 * h;
    let wm = odd_quotient(f, h, i - 1);
    let w0 = f[i] / r;
    let wp = f[i + 1] / (r + h);
    r * ((wp - 2.0 * w0 + wm) / (h * h) + 2.0 * (wp - wm) / (r * h))
}

/// `(1/r²) ∂_r (r² f)` for an odd profile.
#[inline]
pub fn divergence_odd(f: &[f64], h: f64, i: usize) -> f64 {
    if i == 0 {
        3.0 * odd_quotient(f, h, 0)
    } else {
        d_r(f, h, i, Parity::Odd) + 2.0 * f[i] / (i as f64 * h)
    }
}

/// Cubic Lagrange interpolation of nodal values at radius `r`.
pub fn interp_cubic<T: Sample>(f: &[T], h: f64, r: f64, parity: Parity) -> T {
    let n = f.len() - 1;
    let x = r / h;
    let mut i0 = x.floor() as isize - 1;
    let top = n as isize - 3;
    if i0 > top {
        i0 = top;
    }
    let s = x - i0 as f64;
    let w = [
        -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0,
        s * (s - 2.0) * (s - 3.0) / 2.0,
        -s * (s - 1.0) * (s - 3.0) / 2.0,
        s * (s - 1.0) * (s - 2.0) / 6.0,
    ];
    let mut acc = T::default();
    for (k, wk) in w.iter().enumerate() {
        acc = acc + ghost(f, i0 + k as isize, parity) * *wk;
    }
    acc
}

/// Cubic Lagrange interpolation at fractional index `x` of a table without
/// parity (stencil clamped at both ends).
pub fn interp_cubic_clamped(f: &[f64], x: f64) -> f64 {
    let n = f.len();
    if n < 4 {
        let i = (x.floor().max(0.0) as usize).min(n.saturating_sub(2));
        let s = x - i as f64;
        return f[i] * (1.0 - s) + f[(i + 1).min(n - 1)] * s;
    }
    let i0 = (x.floor() as isize - 1).clamp(0, n as isize - 4);
    let s = x - i0 as f64;
    let i0 = i0 as usize;
    -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0 * f[i0] + s * (s - 2.0) * (s - 3.0) / 2.0 * f[i0 + 1]
        - s * (s - 1.0) * (s - 3.0) / 2.0 * f[i0 + 2]
        + s * (s - 1.0) * (s - 2.0) / 6.0 * f[i0 + 3]
}

/// One time slice of the spherically reduced system.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub t: f64,
    pub phi: Vec<Complex64>,
    pub phi_t: Vec<Complex64>,
    pub a0: Vec<f64>,
    pub a0_t: Vec<f64>,
    pub ar: Vec<f64>,
    pub ar_t: Vec<f64>,
}

impl FieldState {
    pub fn zeros(grid: &RadialGrid, t: f64) -> Self {
        let n = grid.len();
        FieldState {
            t,
            phi: vec![Complex64::default(); n],
            phi_t: vec![Complex64::default(); n],
            a0: vec![0.0; n],
            a0_t: vec![0.0; n],
            ar: vec![0.0; n],
            ar_t: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.a0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a0.is_empty()
    }

    /// Checks lengths, finiteness and the odd parity of `ar` at the origin.
    pub fn validate(&self, grid: &RadialGrid) -> Result<()> {
        let n = grid.len();
        let lens = [
            self.phi.len(),
            self.phi_t.len(),
            self.a0.len(),
            self.a0_t.len(),
            self.ar.len(),
            self.ar_t.len(),
        ];
        if lens.iter().any(|&l| l != n) {
            return Err(MkgError::InvalidState(format!(
                "array lengths {lens:?} do not match {n} grid nodes"
            )));
        }
        if !self.t.is_finite() {
            return Err(MkgError::InvalidState(format!("time {} is not finite", self.t)));
        }
        if let Some(i) = self.first_non_finite() {
            return Err(MkgError::NonFinite { node: i, t: self.t });
        }
        if self.ar[0] != 0.0 || self.ar_t[0] != 0.0 {
            return Err(MkgError::InvalidState("ar must vanish at r = 0".into()));
        }
        Ok(())
    }

    pub fn first_non_finite(&self) -> Option<usize> {
        (0..self.len()).find(|&i| {
            !(self.phi[i].re.is_finite()
                && self.phi[i].im.is_finite()
                && self.phi_t[i].re.is_finite()
                && self.phi_t[i].im.is_finite()
                && self.a0[i].is_finite()
                && self.a0_t[i].is_finite()
                && self.ar[i].is_finite()
                && self.ar_t[i].is_finite())
        })
    }

    /// Largest absolute value over all six arrays (NaN propagates).
    pub fn sup_norm(&self) -> f64 {
        let mut m = 0.0f64;
        let mut bad = false;
        let mut upd = |v: f64| {
            if v.is_nan() {
                bad = true;
            } else if v > m {
                m = v;
            }
        };
        for i in 0..self.len() {
            upd(self.phi[i].norm());
            upd(self.phi_t[i].norm());
            upd(self.a0[i].abs());
            upd(self.a0_t[i].abs());
            upd(self.ar[i].abs());
            upd(self.ar_t[i].abs());
        }
        if bad {
            f64::NAN
        } else {
            m
        }
    }
}

/// Null-frame components of the potential at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullFrameSample {
    pub t: f64,
    pub r: f64,
    pub a_l: f64,
    pub a_lbar: f64,
    pub a_s1: f64,
    pub a_s2: f64,
}

impl NullFrameSample {
    pub fn from_potential(t: f64, r: f64, a0: f64, ar: f64) -> Self {
        NullFrameSample {
            t,
            r,
            a_l: a0 + ar,
            a_lbar: a0 - ar,
            a_s1: 0.0,
            a_s2: 0.0,
        }
    }

    /// `(a0, ar)` recovered from the frame components.
    pub fn potential(&self) -> (f64, f64) {
        (0.5 * (self.a_l + self.a_lbar), 0.5 * (self.a_l - self.a_lbar))
    }
}

/// Frame components of `state` at radius `r` (cubic interpolation off-grid).
pub fn null_decompose(state: &FieldState, grid: &RadialGrid, r: f64) -> Result<NullFrameSample> {
    if !(0.0..=grid.r_max).contains(&r) {
        return Err(MkgError::OutOfDomain { r, r_max: grid.r_max });
    }
    let a0 = interp_cubic(&state.a0, grid.h, r, Parity::Even);
    let ar = interp_cubic(&state.ar, grid.h, r, Parity::Odd);
    Ok(NullFrameSample::from_potential(state.t, r, a0, ar))
}

/// Decay exponents `(s, γ)` with `1/2 < s < 1` and `0 < γ < 3/2 - s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub s: f64,
    pub gamma: f64,
    pub s0p: f64,
}

impl Weights {
    pub fn new(s: f64, gamma: f64) -> Result<Self> {
        let mut problems = Vec::new();
        if !(s > 0.5 && s < 1.0) {
            problems.push(format!("s = {s} must satisfy 1/2 < s < 1"));
        }
        if !(gamma > 0.0 && gamma < 1.5 - s) {
            problems.push(format!("gamma = {gamma} must satisfy 0 < gamma < 3/2 - s"));
        }
        if !problems.is_empty() {
            return Err(MkgError::InvalidWeights(problems.join("; ")));
        }
        Ok(Weights {
            s,
            gamma,
            s0p: s + gamma,
        })
    }
}

/// `⟨x⟩ = √(1 + x²)`.
#[inline]
pub fn jbracket(x: f64) -> f64 {
    x.hypot(1.0)
}

/// `S⁰(t, r) = ((t + r)/r) ln(⟨t+r⟩/⟨t-r⟩)`, with the `r -> 0` limit
/// `2t²/(1 + t²)`.
pub fn s0_weight(t: f64, r: f64) -> Result<f64> {
    if r < 0.0 || r.is_nan() {
        return Err(MkgError::NegativeRadius(r));
    }
    let tt = 1.0 + t * t;
    if r <= 1e-8 * (1.0 + t.abs()) {
        // first-order expansion of both logarithms
        return Ok((t + r) / tt * 2.0 * t);
    }
    let ratio = ((1.0 + (t + r) * (t + r)) / (1.0 + (t - r) * (t - r))).ln() * 0.5;
    Ok((t + r) / r * ratio)
}

/// Current `(J0, Jr)` with `J_α = Im(φ conj(D_α φ))`, `D = ∂ + iA`.
pub fn current(state: &FieldState, grid: &RadialGrid) -> (Vec<f64>, Vec<f64>) {
    let n = state.len();
    let mut j0 = vec![0.0; n];
    let mut jr = vec![0.0; n];
    for i in 0..n {
        let (a, b) = current_at(state, grid.h, i);
        j0[i] = a;
        jr[i] = b;
    }
    (j0, jr)
}

#[inline]
pub fn current_at(state: &FieldState, h: f64, i: usize) -> (f64, f64) {
    let p = state.phi[i];
    let m2 = p.norm_sqr();
    let pr = d_r(&state.phi, h, i, Parity::Even);
    let j0 = -(p.conj() * state.phi_t[i]).im - state.a0[i] * m2;
    let jr = -(p.conj() * pr).im - state.ar[i] * m2;
    (j0, jr)
}

/// Radial electric field `E = ∂_t ar - ∂_r a0`.
pub fn field_strength(state: &FieldState, grid: &RadialGrid) -> Vec<f64> {
    (0..state.len())
        .map(|i| state.ar_t[i] - d_r(&state.a0, grid.h, i, Parity::Even))
        .collect()
}

/// Gauge function `ψ` and the derivatives the transform needs at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GaugeJet {
    pub psi: f64,
    pub psi_t: f64,
    pub psi_r: f64,
    pub psi_tt: f64,
    pub psi_tr: f64,
}

/// `A -> A + dψ`, `φ -> e^{-iψ} φ`.
///
/// The phase sign is the one that leaves `D = ∂ + iA` covariant, so |φ|,
/// the current and `E` are unchanged.
pub fn gauge_transform<F>(state: &FieldState, grid: &RadialGrid, psi: F) -> FieldState
where
    F: Fn(f64, f64) -> GaugeJet,
{
    let mut out = state.clone();
    for i in 0..state.len() {
        let r = grid.r(i);
        let g = psi(state.t, r);
        let u = Complex64::from_polar(1.0, -g.psi);
        out.phi[i] = u * state.phi[i];
        out.phi_t[i] = u * (state.phi_t[i] - Complex64::new(0.0, g.psi_t) * state.phi[i]);
        out.a0[i] = state.a0[i] + g.psi_t;
        out.a0_t[i] = state.a0_t[i] + g.psi_tt;
        if i > 0 {
            out.ar[i] = state.ar[i] + g.psi_r;
            out.ar_t[i] = state.ar_t[i] + g.psi_tr;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> RadialGrid {
        RadialGrid::new(10.0, 200).unwrap()
    }

    #[test]
    fn grid_rejects_small() {
        assert!(RadialGrid::new(1.0, 8).is_err());
        assert!(RadialGrid::new(-1.0, 100).is_err());
        let g = grid();
        assert_eq!(g.r(37), 37.0 * g.h);
        assert_eq!(g.ghost_count, 2);
    }

    #[test]
    fn jbracket_values() {
        assert_eq!(jbracket(0.0), 1.0);
        assert!((jbracket(2.0) - 5f64.sqrt()).abs() < 1e-15);
        assert_eq!(jbracket(-2.0), jbracket(2.0));
    }

    #[test]
    fn s0_values() {
        assert!((s0_weight(1.0, 1.0).unwrap() - 5f64.ln()).abs() < 1e-14);
        let t = 3.0;
        let lim = 2.0 * t * t / (1.0 + t * t);
        assert!((s0_weight(t, 1e-6).unwrap() - lim).abs() < 1e-5);
        assert!((s0_weight(t, 0.0).unwrap() - lim).abs() < 1e-14);
        assert!(s0_weight(1.0, -1.0).is_err());
        let lhs = s0_weight(1e3, 1e3).unwrap();
        let rhs = 10.0 * jbracket(2e3).powf(0.1);
        assert!(lhs <= rhs);
    }

    #[test]
    fn frame_examples() {
        let g = grid();
        let mut s = FieldState::zeros(&g, 0.0);
        s.a0.iter_mut().for_each(|v| *v = 0.3);
        for i in 1..g.len() {
            s.ar[i] = -0.1;
        }
        let f = null_decompose(&s, &g, 2.0).unwrap();
        assert!((f.a_l - 0.2).abs() < 1e-14 && (f.a_lbar - 0.4).abs() < 1e-14);
        let (a0, ar) = f.potential();
        assert!((a0 - 0.3).abs() < 1e-15 && (ar + 0.1).abs() < 1e-15);
        assert!(null_decompose(&s, &g, 11.0).is_err());
    }

    #[test]
    fn stencils_polynomial_exactness() {
        let g = grid();
        // even: f = r², Δf = 6
        let f = g.sample(|r| r * r);
        for i in 0..g.n_cells {
            assert!((laplacian_even(&f, g.h, i) - 6.0).abs() < 1e-9);
        }
        // odd: ar = r/3 has divergence 1
        let a = g.sample(|r| r / 3.0);
        for i in 0..g.len() {
            assert!((divergence_odd(&a, g.h, i) - 1.0).abs() < 1e-12);
        }
        // ar = r³: vector laplacian 6r + 6r - 2r = 10 r
        let a = g.sample(|r| r.powi(3));
        for i in 1..g.n_cells {
            let r = g.r(i);
            assert!((vector_laplacian_odd(&a, g.h, i) - 10.0 * r).abs() < 1e-8 * (1.0 + r));
        }
    }

    #[test]
    fn interpolation_is_exact_for_cubics() {
        let g = grid();
        let f = g.sample(|r| 1.0 + r * r - 0.1 * r.powi(3));
        for &r in &[0.01, 0.3, 4.567, 9.99, 10.0] {
            let v = interp_cubic(&f, g.h, r, Parity::Even);
            // the even reflection of r³ is |r|³, exact away from the origin
            if r > 3.0 * g.h {
                assert!((v - (1.0 + r * r - 0.1 * r.powi(3))).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn current_of_rotating_field() {
        let g = grid();
        let omega = 1.7;
        let mut s = FieldState::zeros(&g, 0.0);
        for i in 0..g.len() {
            let f = (-g.r(i).powi(2)).exp();
            s.phi[i] = Complex64::new(f, 0.0);
            s.phi_t[i] = Complex64::new(0.0, -omega * f);
        }
        let (j0, jr) = current(&s, &g);
        for i in 0..g.len() {
            let f = (-g.r(i).powi(2)).exp();
            assert!((j0[i] - omega * f * f).abs() < 1e-14);
            assert!(jr[i].abs() < 1e-14);
        }
    }

    #[test]
    fn field_strength_quadratic() {
        let g = grid();
        let mut s = FieldState::zeros(&g, 0.0);
        s.a0 = g.sample(|r| -0.5 * r * r);
        let e = field_strength(&s, &g);
        for (i, v) in e.iter().enumerate() {
            assert!((v - g.r(i)).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_gauge_keeps_modulus() {
        let g = grid();
        let mut s = FieldState::zeros(&g, 0.0);
        s.phi = g.sample(|r| Complex64::new((-r * r).exp(), 0.2));
        let out = gauge_transform(&s, &g, |_, _| GaugeJet {
            psi: 0.7,
            ..Default::default()
        });
        for i in 0..g.len() {
            assert!((out.phi[i].norm() - s.phi[i].norm()).abs() < 1e-15);
        }
        assert_eq!(out.a0, s.a0);
        assert_eq!(out.ar, s.ar);
    }
}
