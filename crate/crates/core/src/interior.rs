//! Interior limit of the potential: the asymptotic source on the light cone,
//! the explicit solutions `A^ex`, `A^{ex,∞}` and the limit `K_μ(y)` of
//! `t A_μ(t, t y)`.
//!
//! Four-vectors are indexed `(t, x, y, z)` with lower indices; along a
//! direction `ω` the null covector is `L_μ = (-1, ω)`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::smoothstep5;
use crate::error::{MkgError, Result};
use crate::extraction::{linear_fit, RadiationTable, UniformTable};
use crate::field::{interp_cubic, jbracket, FieldState, Parity, RadialGrid};
use crate::quad::{self, QuadTol};

pub type FourVector = [f64; 4];

/// Decreasing cutoff, 1 below `lo` and 0 above `hi` (quintic smoothstep).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffChi0 {
    pub lo: f64,
    pub hi: f64,
}

impl Default for CutoffChi0 {
    fn default() -> Self {
        CutoffChi0 { lo: 0.5, hi: 0.75 }
    }
}

impl CutoffChi0 {
    pub fn eval(&self, s: f64) -> f64 {
        1.0 - smoothstep5((s - self.lo) / (self.hi - self.lo))
    }
}

/// `L_μ(ω)`.
pub fn null_covector(omega: [f64; 3]) -> FourVector {
    [-1.0, omega[0], omega[1], omega[2]]
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn unit_or_z(v: [f64; 3]) -> [f64; 3] {
    let n = norm3(v);
    if n > 0.0 {
        [v[0] / n, v[1] / n, v[2] / n]
    } else {
        [0.0, 0.0, 1.0]
    }
}

/// Spherically symmetric source `𝒥_μ(q, ω) = L_μ(ω) j(q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymSource {
    pub j: UniformTable,
}

impl AsymSource {
    pub fn zero() -> Self {
        AsymSource {
            j: UniformTable {
                q0: 0.0,
                dq: 1.0,
                values: vec![0.0; 4],
            },
        }
    }

    /// `j = Im(Φ₀ conj ∂_qΦ₀) = -𝒥_L̄/2` from an extracted table.
    pub fn from_table(table: &RadiationTable) -> Self {
        AsymSource { j: table.j_scalar() }
    }

    /// Tabulates `f` on `[lo, hi]` with spacing close to `dq`.
    pub fn from_fn<F: Fn(f64) -> f64>(lo: f64, hi: f64, dq: f64, f: F) -> Self {
        let n = ((hi - lo) / dq).ceil().max(3.0) as usize;
        let dq = (hi - lo) / n as f64;
        AsymSource {
            j: UniformTable {
                q0: lo,
                dq,
                values: (0..=n).map(|k| f(lo + k as f64 * dq)).collect(),
            },
        }
    }

    pub fn j(&self, q: f64) -> f64 {
        self.j.eval(q)
    }

    pub fn j_mu(&self, q: f64, omega: [f64; 3]) -> FourVector {
        let v = self.j(q);
        null_covector(omega).map(|l| l * v)
    }

    pub fn is_zero(&self) -> bool {
        self.j.values.iter().all(|&v| v == 0.0)
    }

    /// Composite 3-point Gauss rule on the table cells, exact for the
    /// cubic interpolant.
    pub fn q_rule(&self) -> (Vec<f64>, Vec<f64>) {
        let (x, w) = quad::gauss_legendre(3);
        let cells = self.j.values.len() - 1;
        let mut nodes = Vec::with_capacity(cells * 3);
        let mut weights = Vec::with_capacity(cells * 3);
        for c in 0..cells {
            let mid = self.j.q0 + (c as f64 + 0.5) * self.j.dq;
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(mid + 0.5 * self.j.dq * xi);
                weights.push(0.5 * self.j.dq * wi);
            }
        }
        (nodes, weights)
    }

    /// `M = ∫ j dq`.
    pub fn mass(&self) -> f64 {
        let (nodes, weights) = self.q_rule();
        nodes.iter().zip(&weights).map(|(q, w)| w * self.j(*q)).sum()
    }

    /// Smallest `C` with `|j(q)| ≤ C ⟨q⟩^{-2s} ⟨q₊⟩^{-2γ}` on the nodes.
    pub fn decay_constant(&self, s: f64, gamma: f64) -> f64 {
        self.j
            .nodes()
            .iter()
            .zip(&self.j.values)
            .map(|(&q, &v)| v.abs() * jbracket(q).powf(2.0 * s) * jbracket(q.max(0.0)).powf(2.0 * gamma))
            .fold(0.0, f64::max)
    }

    /// Largest `|L^μ 𝒥_μ|` and `|S_B^μ 𝒥_μ|` over the nodes, for direction `ω`.
    pub fn frame_defect(&self, omega: [f64; 3]) -> f64 {
        let w = unit_or_z(omega);
        let helper = if w[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let d = dot3(helper, w);
        let e1 = unit_or_z([helper[0] - d * w[0], helper[1] - d * w[1], helper[2] - d * w[2]]);
        let e2 = [
            w[1] * e1[2] - w[2] * e1[1],
            w[2] * e1[0] - w[0] * e1[2],
            w[0] * e1[1] - w[1] * e1[0],
        ];
        let mut worst = 0.0f64;
        for &q in &self.j.nodes() {
            let jm = self.j_mu(q, w);
            // L^μ = (1, ω)
            let l_contr = jm[0] + dot3(w, [jm[1], jm[2], jm[3]]);
            let s1 = dot3(e1, [jm[1], jm[2], jm[3]]);
            let s2 = dot3(e2, [jm[1], jm[2], jm[3]]);
            worst = worst.max(l_contr.abs()).max(s1.abs()).max(s2.abs());
        }
        worst
    }
}

/// `∫_{S²} dS(ω) / (a - ⟨x, ω⟩) = (2π/|x|) ln((a+|x|)/(a-|x|))`.
pub fn angular_kernel_integral(a: f64, x_norm: f64) -> Result<f64> {
    if !(x_norm >= 0.0) || !(x_norm < a) {
        return Err(MkgError::Domain(format!(
            "angular kernel needs 0 <= |x| < a, got |x| = {x_norm}, a = {a}"
        )));
    }
    if x_norm < 1e-6 {
        return Ok(4.0 * PI / a);
    }
    Ok(2.0 * PI / x_norm * (2.0 * x_norm / (a - x_norm)).ln_1p())
}

/// `∫_{S²} ⟨x̂, ω⟩ / (a - ⟨x, ω⟩) dS`.
fn radial_kernel_integral(a: f64, x_norm: f64, log_term: f64) -> f64 {
    let e = x_norm / a;
    if e < 1e-3 {
        let e2 = e * e;
        return 2.0 * PI / a * (2.0 * e / 3.0) * (1.0 + 0.6 * e2 + 3.0 / 7.0 * e2 * e2);
    }
    2.0 * PI * (-2.0 / x_norm + a / (x_norm * x_norm) * log_term)
}

/// `(∫ L₀/(a-⟨x,ω⟩) dS, ∫ ⟨x̂,ω⟩/(a-⟨x,ω⟩) dS)` with `d = a - |x| > 0`.
/// Written in terms of `d` so that it stays accurate as `d -> 0`.
fn kernel_pair(d: f64, x_norm: f64) -> (f64, f64) {
    let a = x_norm + d;
    if x_norm < 1e-6 * a {
        return (-4.0 * PI / a, radial_kernel_integral(a, x_norm, 0.0));
    }
    let log_term = (2.0 * x_norm / d).ln_1p();
    (-2.0 * PI / x_norm * log_term, radial_kernel_integral(a, x_norm, log_term))
}

fn spread(x: [f64; 3], t_part: f64, radial: f64) -> FourVector {
    let u = unit_or_z(x);
    [t_part, radial * u[0], radial * u[1], radial * u[2]]
}

/// Gauss–Legendre in `cos θ` (n nodes) times `2n` uniform azimuths.
pub fn sphere_rule(n: usize) -> Vec<([f64; 3], f64)> {
    let (x, w) = quad::gauss_legendre(n);
    let m = 2 * n;
    let dphi = 2.0 * PI / m as f64;
    let mut out = Vec::with_capacity(n * m);
    for (ci, wi) in x.iter().zip(&w) {
        let si = (1.0 - ci * ci).max(0.0).sqrt();
        for k in 0..m {
            let phi = (k as f64 + 0.5) * dphi;
            out.push(([si * phi.cos(), si * phi.sin(), *ci], wi * dphi));
        }
    }
    out
}

/// Product-rule integral over `S²`, doubling until successive values agree
/// to `tol` relative to `max(1, |I|)`.
pub fn sphere_integral<F: Fn([f64; 3]) -> f64 + Sync>(f: F, tol: f64) -> Result<quad::Integral> {
    // parallel map, fixed-order sum: results must not depend on scheduling
    let eval = |n: usize| -> f64 {
        let terms: Vec<f64> = sphere_rule(n).par_iter().map(|(w, wt)| wt * f(*w)).collect();
        terms.iter().sum()
    };
    let mut n = 8;
    let mut prev = eval(n);
    while n < 1024 {
        n *= 2;
        let cur = eval(n);
        let err = (cur - prev).abs();
        if err <= tol * cur.abs().max(1.0) {
            return Ok(quad::Integral {
                value: cur,
                error: err,
                panels: n,
            });
        }
        prev = cur;
    }
    Err(MkgError::Quadrature {
        err: f64::NAN,
        target: tol,
    })
}

fn c_and_dir(y: [f64; 3]) -> Result<f64> {
    let c = norm3(y);
    if !(c < 1.0) {
        return Err(MkgError::Domain(format!("interior limit needs |y| < 1, got {c}")));
    }
    Ok(c)
}

/// `(K₀, K_r)` per unit mass at `|y| = c`.
fn unit_k(c: f64) -> (f64, f64) {
    if c < 1e-3 {
        let c2 = c * c;
        return (
            -(1.0 + c2 / 3.0 + c2 * c2 / 5.0),
            0.5 * (2.0 * c / 3.0 + 0.4 * c * c2 + 2.0 / 7.0 * c * c2 * c2),
        );
    }
    let l = (2.0 * c / (1.0 - c)).ln_1p();
    (-l / (2.0 * c), 0.5 * (-2.0 / c + l / (c * c)))
}

/// `K_μ(y) = (1/4π) ∫∫ 𝒥_μ(q,ω)/(1 - ⟨y,ω⟩) dS dq` via the closed angular
/// forms.
pub fn k_mu(y: [f64; 3], source: &AsymSource) -> Result<FourVector> {
    let c = c_and_dir(y)?;
    let m = source.mass();
    let (k0, kr) = unit_k(c);
    Ok(spread(y, m * k0, m * kr))
}

/// `K_μ(y)` for an arbitrary `𝒥_μ(q, ω)` by S² product quadrature, with the
/// `q`-integral done on the given rule.
pub fn k_mu_generic<F>(y: [f64; 3], source: F, q_nodes: &[f64], q_weights: &[f64], tol: f64) -> Result<FourVector>
where
    F: Fn(f64, [f64; 3]) -> FourVector + Sync,
{
    c_and_dir(y)?;
    let integrated = |w: [f64; 3]| -> FourVector {
        let mut acc = [0.0; 4];
        for (q, wq) in q_nodes.iter().zip(q_weights) {
            let v = source(*q, w);
            for k in 0..4 {
                acc[k] += wq * v[k];
            }
        }
        acc
    };
    let mut out = [0.0; 4];
    for (k, slot) in out.iter_mut().enumerate() {
        let r = sphere_integral(|w| integrated(w)[k] / (1.0 - dot3(y, w)), tol)?;
        *slot = r.value / (4.0 * PI);
    }
    Ok(out)
}

/// `A^ex_μ(t, x)`, the cut-off retarded solution driven by the asymptotic
/// source. `abs_tol` is the absolute target of each `q`-quadrature.
pub fn eval_a_ex(t: f64, x: [f64; 3], source: &AsymSource, chi0: &CutoffChi0, abs_tol: f64) -> Result<FourVector> {
    if !(t >= 1.0) {
        return Err(MkgError::Domain(format!("A^ex is evaluated for t >= 1, got {t}")));
    }
    if source.is_zero() {
        return Ok([0.0; 4]);
    }
    let xn = norm3(x);
    let scale = t + xn;
    // where χ₀(⟨q⟩/(t+|x|)) vanishes
    let reach = ((chi0.hi * scale).powi(2) - 1.0).max(0.0).sqrt();
    let q_star = xn - t;
    let lo = source.j.lo().max(-reach).max(q_star);
    let hi = source.j.hi().min(reach);
    if hi <= lo {
        return Ok([0.0; 4]);
    }
    let weight = |q: f64| source.j(q) * chi0.eval(jbracket(q) / scale) / (4.0 * PI);
    let tol = QuadTol {
        abs: abs_tol,
        rel: 1e-12,
        max_panels: 20000,
    };
    let mut out = [0.0f64; 2];
    for (k, slot) in out.iter_mut().enumerate() {
        let pick = |d: f64| {
            let (k0, kr) = kernel_pair(d, xn);
            if k == 0 {
                k0
            } else {
                kr
            }
        };
        let val = if lo == q_star && xn > 0.0 {
            // logarithmic endpoint at a = |x|
            quad::adaptive_left_singular(|d| weight(q_star + d) * pick(d), hi - q_star, tol)?.value
        } else {
            let nb = 64usize;
            let breaks: Vec<f64> = (0..=nb).map(|i| lo + (hi - lo) * i as f64 / nb as f64).collect();
            quad::adaptive_with_breaks(|q| weight(q) * pick(q - q_star), &breaks, tol)?.value
        };
        *slot = val;
    }
    Ok(spread(x, out[0], out[1]))
}

/// `A^{ex,∞}_μ(t, x) = (1/4π) ∫∫ 𝒥_μ/(t - ⟨x,ω⟩) dS dq = K_μ(x/t)/t`.
pub fn eval_a_ex_infty(t: f64, x: [f64; 3], source: &AsymSource) -> Result<FourVector> {
    let xn = norm3(x);
    if !(xn < t) {
        return Err(MkgError::Domain(format!("A^ex,inf needs |x| < t, got |x| = {xn}, t = {t}")));
    }
    let m = source.mass() / (4.0 * PI);
    let (k0, kr) = kernel_pair(t - xn, xn);
    Ok(spread(x, m * k0, m * kr))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRow {
    pub t: f64,
    pub r: f64,
    pub difference: f64,
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub rows: Vec<ChainRow>,
    /// Slope of `ln |A^ex - A^{ex,∞}|` against `ln t`.
    pub fitted_exponent: f64,
    /// Slope of `ln(difference / bound)` against `ln t`.
    pub ratio_slope: f64,
    /// The bound's constant shows no growth trend in `t`.
    pub bounded: bool,
}

/// Differences `|A^ex - A^{ex,∞}|` (time component) at `r = c t` against
/// `t⁻¹⟨t-r⟩^{1-2s}(1 + ln((t+r)/(t-r)))`.
pub fn chain_difference_report(t_list: &[f64], c: f64, s: f64, source: &AsymSource, chi0: &CutoffChi0) -> Result<ChainReport> {
    let rows: Vec<ChainRow> = t_list
        .par_iter()
        .map(|&t| -> Result<ChainRow> {
            let r = c * t;
            let x = [0.0, 0.0, r];
            let a = eval_a_ex(t, x, source, chi0, 1e-14)?;
            let b = eval_a_ex_infty(t, x, source)?;
            let difference = (a[0] - b[0]).abs();
            let bound = jbracket(t - r).powf(1.0 - 2.0 * s) / t * (1.0 + ((t + r) / (t - r)).ln());
            Ok(ChainRow {
                t,
                r,
                difference,
                bound,
                ratio: difference / bound,
            })
        })
        .collect::<Result<_>>()?;
    let usable: Vec<&ChainRow> = rows.iter().filter(|r| r.difference > 0.0).collect();
    let (fitted_exponent, ratio_slope) = if usable.len() >= 2 {
        let lt: Vec<f64> = usable.iter().map(|r| r.t.ln()).collect();
        let ld: Vec<f64> = usable.iter().map(|r| r.difference.ln()).collect();
        let lr: Vec<f64> = usable.iter().map(|r| r.ratio.ln()).collect();
        (linear_fit(&lt, &ld)?.slope, linear_fit(&lt, &lr)?.slope)
    } else {
        (f64::NEG_INFINITY, 0.0)
    };
    Ok(ChainReport {
        bounded: ratio_slope <= 0.2,
        rows,
        fitted_exponent,
        ratio_slope,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteriorRow {
    pub t: f64,
    pub y_norm: f64,
    pub ta0_sim: f64,
    pub k0_pred: f64,
    pub abs_err: f64,
    pub tar_sim: f64,
    pub kr_pred: f64,
    pub abs_err_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteriorVerdict {
    pub y_norm: f64,
    pub decreasing: bool,
    pub final_rel_err: f64,
    pub sign_match: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteriorReport {
    pub rows: Vec<InteriorRow>,
    pub verdicts: Vec<InteriorVerdict>,
    pub pass: bool,
}

/// Compares `t A_μ(t, t|y|)` from snapshots (in increasing `t`) with
/// `K_μ(y)`.
pub fn interior_limit_check(
    snapshots: &[&FieldState],
    grid: &RadialGrid,
    source: &AsymSource,
    y_list: &[f64],
    rel_tol: f64,
) -> Result<InteriorReport> {
    let mut rows = Vec::new();
    let mut verdicts = Vec::new();
    for &y in y_list {
        let k = k_mu([0.0, 0.0, y], source)?;
        let (k0, kr) = (k[0], k[3]);
        let mut errs = Vec::new();
        let mut last_sim = 0.0;
        for st in snapshots {
            let r = st.t * y;
            if r > grid.r_max {
                return Err(MkgError::OutOfDomain { r, r_max: grid.r_max });
            }
            let ta0 = st.t * interp_cubic(&st.a0, grid.h, r, Parity::Even);
            let tar = st.t * interp_cubic(&st.ar, grid.h, r, Parity::Odd);
            let abs_err = (ta0 - k0).abs();
            errs.push(abs_err);
            last_sim = ta0;
            rows.push(InteriorRow {
                t: st.t,
                y_norm: y,
                ta0_sim: ta0,
                k0_pred: k0,
                abs_err,
                tar_sim: tar,
                kr_pred: kr,
                abs_err_r: (tar - kr).abs(),
            });
        }
        let decreasing = errs.windows(2).all(|w| w[1] < w[0]) || errs.iter().all(|&e| e == 0.0);
        let final_rel_err = match errs.last() {
            Some(&e) if k0 != 0.0 => e / k0.abs(),
            Some(&e) => e,
            None => f64::NAN,
        };
        let sign_match = k0 == 0.0 || (k0 * last_sim > 0.0 && k0.signum() == -source.mass().signum());
        let pass = decreasing && final_rel_err < rel_tol && sign_match;
        verdicts.push(InteriorVerdict {
            y_norm: y,
            decreasing,
            final_rel_err,
            sign_match,
            pass,
        });
    }
    let pass = verdicts.iter().all(|v| v.pass);
    Ok(InteriorReport { rows, verdicts, pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn indicator() -> AsymSource {
        // cubic interpolation of a step is not a step; use a fine table and
        // compare against j's own quadrature instead
        AsymSource::from_fn(0.0, 1.0, 0.01, |_| 1.0)
    }

    #[test]
    fn angular_kernel_values() {
        assert!((angular_kernel_integral(1.0, 0.0).unwrap() - 4.0 * PI).abs() < 1e-14);
        assert!((angular_kernel_integral(1.0, 0.5).unwrap() - 4.0 * PI * 3f64.ln()).abs() < 1e-12);
        assert!((angular_kernel_integral(2.0, 1.0).unwrap() - 2.0 * PI * 3f64.ln()).abs() < 1e-12);
        assert!(angular_kernel_integral(1.0, 1.0).is_err());
    }

    #[test]
    fn angular_kernel_matches_sphere_rule() {
        let x = [0.3, -0.2, 0.5];
        let xn = norm3(x);
        let a = 0.8;
        let q = sphere_integral(|w| 1.0 / (a - dot3(x, w)), 1e-12).unwrap().value;
        assert!((q - angular_kernel_integral(a, xn).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn k0_closed_form() {
        let src = AsymSource::from_fn(-1.0, 1.0, 0.01, |q| 0.75 * (1.0 - q * q));
        assert!((src.mass() - 1.0).abs() < 1e-12);
        let k = k_mu([0.5, 0.0, 0.0], &src).unwrap();
        assert!((k[0] + 3f64.ln()).abs() < 1e-10);
        assert!(k_mu([1.0, 0.0, 0.0], &src).is_err());
    }

    #[test]
    fn chi0_plateaus() {
        let c = CutoffChi0::default();
        assert_eq!(c.eval(0.4), 1.0);
        assert_eq!(c.eval(0.8), 0.0);
        assert!(c.eval(0.6) < c.eval(0.55));
    }

    #[test]
    fn a_ex_indicator_oracle() {
        let src = indicator();
        let (t, x) = (10.0, 1.0);
        let a = eval_a_ex(t, [0.0, 0.0, x], &src, &CutoffChi0::default(), 1e-13).unwrap();
        // -(1/4π)(2π/x) ∫₀¹ ln((t+q+x)/(t+q-x)) dq
        let xlnx = |v: f64| v * v.ln();
        let anti = |q: f64| xlnx(t + q + x) - xlnx(t + q - x);
        let expect = -0.5 / x * (anti(1.0) - anti(0.0));
        assert!((a[0] - expect).abs() < 1e-10, "{} vs {}", a[0], expect);
    }

    #[test]
    fn a_ex_infty_homogeneity() {
        let src = AsymSource::from_fn(-1.0, 1.0, 0.01, |q| 0.75 * (1.0 - q * q));
        let a = eval_a_ex_infty(2.0, [0.0, 1.0, 0.0], &src).unwrap();
        assert!((a[0] + 0.5 * 3f64.ln()).abs() < 1e-10);
        let k = k_mu([0.0, 0.5, 0.0], &src).unwrap();
        for i in 0..4 {
            assert!((2.0 * a[i] - k[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn frame_defect_is_roundoff() {
        let src = AsymSource::from_fn(-2.0, 2.0, 0.1, |q| (-q * q).exp());
        assert!(src.frame_defect([0.6, 0.0, 0.8]) < 1e-15);
    }
}
