//! Admissible Lorenz-gauge initial data: constraint solve, charge, the
//! charge-tail subtraction and weighted norms.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{MkgError, Result};
use crate::field::{d_r, divergence_odd, jbracket, FieldState, Parity, RadialGrid};
use crate::quad::simpson;

/// Radial profile families available to the configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Profile {
    Zero,
    /// `scale · exp(-(r/width)²)`
    Gaussian {
        width: f64,
        scale: f64,
    },
    /// `scale · exp(1 - 1/(1 - (r/radius)²))` inside `r < radius`
    Bump {
        radius: f64,
        scale: f64,
    },
    /// `scale · r^power · exp(-(r/width)²)`
    PolyGaussian {
        power: u32,
        width: f64,
        scale: f64,
    },
    /// Piecewise linear through `(r, value)` pairs, zero beyond the last.
    Table {
        r: Vec<f64>,
        value: Vec<f64>,
        scale: f64,
    },
}

impl Profile {
    pub fn gaussian(width: f64) -> Self {
        Profile::Gaussian { width, scale: 1.0 }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Gaussian { width, scale } => scale * (-(r / width).powi(2)).exp(),
            Profile::Bump { radius, scale } => {
                let x = r / radius;
                if x.abs() < 1.0 {
                    scale * (1.0 - 1.0 / (1.0 - x * x)).exp()
                } else {
                    0.0
                }
            }
            Profile::PolyGaussian { power, width, scale } => scale * r.powi(*power as i32) * (-(r / width).powi(2)).exp(),
            Profile::Table { r: rs, value, scale } => {
                let x = r.abs();
                if rs.is_empty() || x > *rs.last().unwrap() {
                    return 0.0;
                }
                if x <= rs[0] {
                    return scale * value[0];
                }
                let k = rs.partition_point(|&v| v <= x).min(rs.len() - 1);
                let (r0, r1) = (rs[k - 1], rs[k]);
                let w = (x - r0) / (r1 - r0);
                scale * (value[k - 1] * (1.0 - w) + value[k] * w)
            }
        }
    }

    /// Reads a two-column `(r, value)` text file; `#` starts a comment.
    pub fn from_file(path: &Path, scale: f64) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| MkgError::Config(format!("cannot read profile {}: {e}", path.display())))?;
        let mut r = Vec::new();
        let mut value = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .collect();
            if cols.len() != 2 {
                return Err(MkgError::Config(format!(
                    "{}:{}: expected two columns",
                    path.display(),
                    ln + 1
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| MkgError::Config(format!("{}:{}: bad number '{s}'", path.display(), ln + 1)))
            };
            let (a, b) = (parse(cols[0])?, parse(cols[1])?);
            if let Some(&last) = r.last() {
                if a <= last {
                    return Err(MkgError::Config(format!(
                        "{}:{}: radii must increase",
                        path.display(),
                        ln + 1
                    )));
                }
            }
            r.push(a);
            value.push(b);
        }
        if r.len() < 2 {
            return Err(MkgError::Config(format!("{}: need at least two rows", path.display())));
        }
        Ok(Profile::Table { r, value, scale })
    }

    pub fn scaled(&self, k: f64) -> Self {
        let mut p = self.clone();
        match &mut p {
            Profile::Zero => {}
            Profile::Gaussian { scale, .. }
            | Profile::Bump { scale, .. }
            | Profile::PolyGaussian { scale, .. }
            | Profile::Table { scale, .. } => *scale *= k,
        }
        p
    }
}

/// A complex profile `re(r) + i im(r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexProfile {
    pub re: Profile,
    pub im: Profile,
}

impl ComplexProfile {
    pub fn zero() -> Self {
        ComplexProfile {
            re: Profile::Zero,
            im: Profile::Zero,
        }
    }

    pub fn real(p: Profile) -> Self {
        ComplexProfile {
            re: p,
            im: Profile::Zero,
        }
    }

    pub fn imaginary(p: Profile) -> Self {
        ComplexProfile {
            re: Profile::Zero,
            im: p,
        }
    }

    pub fn eval(&self, r: f64) -> Complex64 {
        Complex64::new(self.re.eval(r), self.im.eval(r))
    }
}

/// Free data `(φ₀, φ̇₀, a_r, ȧ_r)`; `φ̇₀` is the covariant datum `D₀φ(0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeData {
    pub phi0: ComplexProfile,
    pub phi0_dot: ComplexProfile,
    /// Odd at the origin; sampled with `ar(0) = 0` enforced.
    pub ar0: Profile,
    pub ar0_dot: Profile,
}

impl FreeData {
    pub fn zero() -> Self {
        FreeData {
            phi0: ComplexProfile::zero(),
            phi0_dot: ComplexProfile::zero(),
            ar0: Profile::Zero,
            ar0_dot: Profile::Zero,
        }
    }

    /// `φ₀ = ε e^{-r²}`, `φ̇₀ = iε e^{-r²}`, `a_r = ȧ_r = 0`.
    pub fn reference(eps: f64) -> Self {
        let g = Profile::Gaussian { width: 1.0, scale: eps };
        FreeData {
            phi0: ComplexProfile::real(g.clone()),
            phi0_dot: ComplexProfile::imaginary(g),
            ar0: Profile::Zero,
            ar0_dot: Profile::Zero,
        }
    }

    pub fn sampled(&self, grid: &RadialGrid) -> SampledData {
        let mut ar0 = grid.sample(|r| self.ar0.eval(r));
        let mut ar0_dot = grid.sample(|r| self.ar0_dot.eval(r));
        ar0[0] = 0.0;
        ar0_dot[0] = 0.0;
        SampledData {
            phi0: grid.sample(|r| self.phi0.eval(r)),
            phi0_dot: grid.sample(|r| self.phi0_dot.eval(r)),
            ar0,
            ar0_dot,
        }
    }

    /// Largest value of `|f(r)| ⟨r⟩^{s0+1/2}` over the four profiles on the
    /// outer tenth of the grid relative to the whole grid; near or above 1
    /// signals non-decaying data.
    pub fn decay_ratio(&self, grid: &RadialGrid, s0: f64) -> f64 {
        let p = s0 + 0.5;
        let mut inner = 0.0f64;
        let mut outer = 0.0f64;
        for i in 0..grid.len() {
            let r = grid.r(i);
            let w = jbracket(r).powf(p);
            let v = [
                self.phi0.eval(r).norm(),
                self.phi0_dot.eval(r).norm(),
                self.ar0.eval(r).abs(),
                self.ar0_dot.eval(r).abs(),
            ]
            .into_iter()
            .fold(0.0, f64::max)
                * w;
            if r >= 0.9 * grid.r_max {
                outer = outer.max(v);
            }
            inner = inner.max(v);
        }
        if inner == 0.0 {
            0.0
        } else {
            outer / inner
        }
    }
}

/// Free data sampled on grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledData {
    pub phi0: Vec<Complex64>,
    pub phi0_dot: Vec<Complex64>,
    pub ar0: Vec<f64>,
    pub ar0_dot: Vec<f64>,
}

impl SampledData {
    /// `Im(φ₀ conj φ̇₀)` per node.
    pub fn charge_density(&self) -> Vec<f64> {
        self.phi0.iter().zip(&self.phi0_dot).map(|(a, b)| (a * b.conj()).im).collect()
    }
}

/// The conserved charge with its truncation estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargeValue {
    pub q: f64,
    pub tail: f64,
}

impl ChargeValue {
    pub fn new(q: f64) -> Self {
        ChargeValue { q, tail: 0.0 }
    }

    /// `Q / 4π`.
    pub fn coulomb(&self) -> f64 {
        self.q / (4.0 * PI)
    }
}

/// Tail of `∫_R^∞ C σ^{m-p} dσ` given the last sample `f(R) = C R^{-p}`.
fn power_tail(last: f64, r_max: f64, m: f64, p: f64) -> f64 {
    if last == 0.0 {
        return 0.0;
    }
    if p - m <= 1.0 {
        return f64::INFINITY;
    }
    last.abs() * r_max.powf(m + 1.0) / (p - m - 1.0)
}

/// `Q = 4π ∫ Im(φ₀ conj φ̇₀) r² dr` by Simpson, with `decay` the assumed
/// power-law decay of the density beyond `r_max`.
pub fn compute_charge(data: &FreeData, grid: &RadialGrid, decay: f64) -> ChargeValue {
    let s = data.sampled(grid);
    charge_of_density(&s.charge_density(), grid, decay)
}

pub fn charge_of_density(rho: &[f64], grid: &RadialGrid, decay: f64) -> ChargeValue {
    let integrand: Vec<f64> = rho.iter().enumerate().map(|(i, v)| v * grid.r(i).powi(2)).collect();
    let q = 4.0 * PI * simpson(&integrand, grid.h);
    let tail = 4.0 * PI * power_tail(*rho.last().unwrap(), grid.r_max, 2.0, decay);
    ChargeValue { q, tail }
}

/// Cumulative `∫_0^{r_i} f dr` from nodal values, fourth order (cubic
/// interpolation per cell).
pub fn cumulative_integral(f: &[f64], h: f64, parity: Parity) -> Vec<f64> {
    let n = f.len() - 1;
    let mut out = vec![0.0; n + 1];
    let g = |i: isize| crate::field::ghost(f, i, parity);
    for i in 0..n {
        let ii = i as isize;
        let cell = if i + 2 <= n {
            h / 24.0 * (-g(ii - 1) + 13.0 * f[i] + 13.0 * f[i + 1] - f[i + 2])
        } else {
            h / 24.0 * (f[i - 2] - 5.0 * f[i - 1] + 19.0 * f[i] + 9.0 * f[i + 1])
        };
        out[i + 1] = out[i] + cell;
    }
    out
}

/// Solution of the constraint for `a₀` and the Lorenz value of `ȧ₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct A0Solution {
    pub a0: Vec<f64>,
    pub a0_dot: Vec<f64>,
    /// Estimate of the neglected `∫_{r_max}^∞ ρ σ dσ`.
    pub tail: f64,
}

/// Decaying radial solution of `Δa₀ = ∂^j ȧ_j - Im(φ₀ conj φ̇₀)`.
///
/// `tail_tol` is relative to `max|a₀|`; `decay` is the assumed power of the
/// source density beyond the grid.
pub fn solve_a0(data: &FreeData, grid: &RadialGrid, decay: f64, tail_tol: f64) -> Result<A0Solution> {
    let s = data.sampled(grid);
    solve_a0_sampled(&s, grid, decay, tail_tol)
}

pub fn solve_a0_sampled(s: &SampledData, grid: &RadialGrid, decay: f64, tail_tol: f64) -> Result<A0Solution> {
    let h = grid.h;
    let n = grid.len();
    let dens = s.charge_density();
    let rho: Vec<f64> = (0..n).map(|i| dens[i] - divergence_odd(&s.ar0_dot, h, i)).collect();
    let inner_f: Vec<f64> = (0..n).map(|i| rho[i] * grid.r(i).powi(2)).collect();
    let outer_f: Vec<f64> = (0..n).map(|i| rho[i] * grid.r(i)).collect();
    let inner = cumulative_integral(&inner_f, h, Parity::Even);
    let outer = cumulative_integral(&outer_f, h, Parity::Odd);
    let total_outer = outer[n - 1];
    let mut a0 = vec![0.0; n];
    a0[0] = total_outer;
    for i in 1..n {
        a0[i] = inner[i] / grid.r(i) + (total_outer - outer[i]);
    }
    let tail = power_tail(rho[n - 1], grid.r_max, 1.0, decay);
    let scale = a0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if tail > tail_tol * scale.max(f64::MIN_POSITIVE) && tail > 0.0 {
        return Err(MkgError::DomainTooSmall {
            tail,
            tol: tail_tol * scale,
        });
    }
    let a0_dot = (0..n).map(|i| divergence_odd(&s.ar0, h, i)).collect();
    Ok(A0Solution { a0, a0_dot, tail })
}

/// Electric field of the data and the Gauss-law residual.
#[derive(Debug, Clone, PartialEq)]
pub struct Admissible {
    pub e: Vec<f64>,
    pub compat_residual: f64,
}

/// `E = ȧ_r - ∂_r a₀` and `sup |(1/r²)∂_r(r²E) - Im(φ₀ conj φ̇₀)|`.
pub fn build_admissible(s: &SampledData, sol: &A0Solution, grid: &RadialGrid) -> Admissible {
    let h = grid.h;
    let n = grid.len();
    let mut e: Vec<f64> = (0..n).map(|i| s.ar0_dot[i] - d_r(&sol.a0, h, i, Parity::Even)).collect();
    e[0] = 0.0;
    let dens = s.charge_density();
    let compat_residual = (0..n).map(|i| (divergence_odd(&e, h, i) - dens[i]).abs()).fold(0.0, f64::max);
    Admissible { e, compat_residual }
}

/// Assembled initial slice with `∂_tφ(0) = φ̇₀ - i a₀ φ₀`.
pub fn assemble_state(s: &SampledData, sol: &A0Solution) -> FieldState {
    let phi_t = s
        .phi0
        .iter()
        .zip(&s.phi0_dot)
        .zip(&sol.a0)
        .map(|((p, pd), a)| pd - Complex64::new(0.0, *a) * p)
        .collect();
    FieldState {
        t: 0.0,
        phi: s.phi0.clone(),
        phi_t,
        a0: sol.a0.clone(),
        a0_t: sol.a0_dot.clone(),
        ar: s.ar0.clone(),
        ar_t: s.ar0_dot.clone(),
    }
}

/// Everything the evolution needs from the data stage.
#[derive(Debug, Clone)]
pub struct InitialData {
    pub state: FieldState,
    pub charge: ChargeValue,
    pub tail: f64,
    pub compat_residual: f64,
}

pub fn build_initial(data: &FreeData, grid: &RadialGrid, decay: f64, tail_tol: f64) -> Result<InitialData> {
    let s = data.sampled(grid);
    let sol = solve_a0_sampled(&s, grid, decay, tail_tol)?;
    let adm = build_admissible(&s, &sol, grid);
    let charge = charge_of_density(&s.charge_density(), grid, decay);
    let state = assemble_state(&s, &sol);
    Ok(InitialData {
        state,
        charge,
        tail: sol.tail,
        compat_residual: adm.compat_residual,
    })
}

/// `10x³ - 15x⁴ + 6x⁵` clamped to `[0, 1]`.
#[inline]
pub fn smoothstep5(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        x * x * x * (10.0 + x * (-15.0 + 6.0 * x))
    }
}

#[inline]
pub fn smoothstep5_prime(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        30.0 * x * x * (1.0 - x) * (1.0 - x)
    }
}

/// Increasing cutoff: 0 below `lo`, 1 above `hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffChi {
    pub lo: f64,
    pub hi: f64,
    pub degree: u32,
}

impl Default for CutoffChi {
    fn default() -> Self {
        CutoffChi {
            lo: 0.5,
            hi: 1.0,
            degree: 5,
        }
    }
}

impl CutoffChi {
    pub fn eval(&self, x: f64) -> f64 {
        smoothstep5((x - self.lo) / (self.hi - self.lo))
    }

    pub fn derivative(&self, x: f64) -> f64 {
        smoothstep5_prime((x - self.lo) / (self.hi - self.lo)) / (self.hi - self.lo)
    }

    /// The subtracted Coulomb tail `χ(r - t) Q/(4π r)`; zero at the origin.
    pub fn coulomb_tail(&self, q: ChargeValue, t: f64, r: f64) -> f64 {
        let c = self.eval(r - t);
        if c == 0.0 {
            0.0
        } else {
            c * q.coulomb() / r
        }
    }
}

/// `a₀ -> a₀ - χ(r-t) Q/(4πr)`; `a₀_t` receives the matching time derivative.
pub fn subtract_charge_tail(state: &FieldState, grid: &RadialGrid, q: ChargeValue, chi: &CutoffChi) -> FieldState {
    let mut out = state.clone();
    if q.q == 0.0 {
        return out;
    }
    for i in 1..state.len() {
        let r = grid.r(i);
        let x = r - state.t;
        out.a0[i] -= chi.eval(x) * q.coulomb() / r;
        out.a0_t[i] += chi.derivative(x) * q.coulomb() / r;
    }
    out
}

/// Weighted Sobolev norm with a divergence diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedNorm {
    pub value: f64,
    pub diagnostic: Option<String>,
}

/// `√(4π Σ_{j≤k} ∫ (1+r²)^{s0+j} |∂_r^j f|² r² dr)` with derivatives from
/// repeated centered differencing.
pub fn weighted_norm(f: &[Complex64], grid: &RadialGrid, parity: Parity, k: usize, s0: f64) -> WeightedNorm {
    let n = grid.len();
    let mut deriv = f.to_vec();
    let mut par = parity;
    let mut total = 0.0;
    let mut outer = 0.0;
    for j in 0..=k {
        if j > 0 {
            deriv = crate::field::d_r_all(&deriv, grid.h, par);
            par = match par {
                Parity::Even => Parity::Odd,
                Parity::Odd => Parity::Even,
            };
        }
        let integrand: Vec<f64> = (0..n)
            .map(|i| {
                let r = grid.r(i);
                (1.0 + r * r).powf(s0 + j as f64) * deriv[i].norm_sqr() * r * r
            })
            .collect();
        total += 4.0 * PI * simpson(&integrand, grid.h);
        let cut = (0.9 * n as f64) as usize;
        outer += 4.0 * PI * simpson(&integrand[cut..], grid.h);
    }
    if !total.is_finite() || (total > 0.0 && outer > 0.05 * total) {
        return WeightedNorm {
            value: f64::INFINITY,
            diagnostic: Some(format!(
                "integrand does not decay: outer tenth carries {:.3e} of {:.3e}",
                outer, total
            )),
        };
    }
    WeightedNorm {
        value: total.sqrt(),
        diagnostic: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{adaptive_to_infinity, QuadTol};

    #[test]
    fn reference_charge() {
        let g = RadialGrid::new(12.0, 2400).unwrap();
        let q = compute_charge(&FreeData::reference(1.0), &g, 6.0);
        let oracle = adaptive_to_infinity(|r| (-2.0 * r * r).exp() * r * r, 0.0, QuadTol::default()).unwrap();
        assert!((q.q + 4.0 * PI * oracle.value).abs() < 1e-9);
        assert!((q.q + 1.96870).abs() < 1e-5);
    }

    #[test]
    fn zero_data_gives_zero() {
        let g = RadialGrid::new(10.0, 100).unwrap();
        let sol = solve_a0(&FreeData::zero(), &g, 6.0, 1e-8).unwrap();
        assert!(sol.a0.iter().all(|&v| v == 0.0));
        assert_eq!(compute_charge(&FreeData::zero(), &g, 6.0).q, 0.0);
    }

    fn unit_density() -> FreeData {
        // Im(φ₀ conj φ̇₀) = e^{-r²}
        let g = Profile::Gaussian {
            width: 2f64.sqrt(),
            scale: 1.0,
        };
        FreeData {
            phi0: ComplexProfile::real(g.clone()),
            phi0_dot: ComplexProfile::imaginary(g.scaled(-1.0)),
            ar0: Profile::Zero,
            ar0_dot: Profile::Zero,
        }
    }

    #[test]
    fn newtonian_potential_values() {
        let g = RadialGrid::new(20.0, 4000).unwrap();
        let sol = solve_a0(&unit_density(), &g, 6.0, 1e-8).unwrap();
        assert!((sol.a0[0] - 0.5).abs() < 1e-10);
        let r = g.r(3000);
        assert!((r * sol.a0[3000] - PI.sqrt() / 4.0).abs() < 1e-10);
    }

    #[test]
    fn compat_residual_is_second_order() {
        let mut res = Vec::new();
        for n in [400, 800, 1600] {
            let g = RadialGrid::new(10.0, n).unwrap();
            let s = unit_density().sampled(&g);
            let sol = solve_a0_sampled(&s, &g, 6.0, 1e-8).unwrap();
            res.push(build_admissible(&s, &sol, &g).compat_residual);
        }
        for w in res.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn tail_subtraction_examples() {
        let g = RadialGrid::new(4.0, 16).unwrap();
        let mut s = FieldState::zeros(&g, 0.0);
        s.a0 = vec![1.0; g.len()];
        let q = ChargeValue::new(4.0 * PI);
        let out = subtract_charge_tail(&s, &g, q, &CutoffChi::default());
        assert!((out.a0[8] - 0.5).abs() < 1e-15); // r = 2
        assert_eq!(out.a0[1], 1.0); // r = 0.25
        assert_eq!(subtract_charge_tail(&s, &g, ChargeValue::new(0.0), &CutoffChi::default()), s);
    }

    #[test]
    fn cutoff_shape() {
        let chi = CutoffChi::default();
        assert_eq!(chi.eval(0.4), 0.0);
        assert_eq!(chi.eval(1.0), 1.0);
        let mut prev = 0.0;
        for k in 0..=100 {
            let v = chi.eval(0.5 + k as f64 * 0.005);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn weighted_norm_gaussian() {
        let g = RadialGrid::new(10.0, 2000).unwrap();
        let f = g.sample(|r| Complex64::new((-r * r).exp(), 0.0));
        let w = weighted_norm(&f, &g, Parity::Even, 0, 1.0);
        let c = (PI / 2.0).sqrt();
        let expect = 4.0 * PI * (c / 8.0 + 3.0 * c / 32.0);
        assert!((w.value.powi(2) - expect).abs() < 1e-9);
        let w2 = weighted_norm(&f, &g, Parity::Even, 2, 1.5);
        assert!(w2.value >= weighted_norm(&f, &g, Parity::Even, 2, 1.0).value);
        let flat = vec![Complex64::new(1.0, 0.0); g.len()];
        assert!(weighted_norm(&flat, &g, Parity::Even, 0, 1.0).value.is_infinite());
    }
}
