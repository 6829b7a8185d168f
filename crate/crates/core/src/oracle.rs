//! Reference solutions of the radial wave equation `-□φ = F`: the
//! double-integral representation for vanishing data, d'Alembert and
//! Kirchhoff for free data, and decay-envelope certifiers.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MkgError, Result};
use crate::quad::{self, QuadTol};
use crate::report::CsvTable;

type Fn1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type Fn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// An even radial profile with its derivative and the radii where it is
/// not smooth.
#[derive(Clone)]
pub struct Radial {
    value: Fn1,
    deriv: Fn1,
    pub breaks: Vec<f64>,
}

impl std::fmt::Debug for Radial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Radial").field("breaks", &self.breaks).finish_non_exhaustive()
    }
}

impl Radial {
    pub fn from_fn<F, D>(value: F, deriv: D, breaks: Vec<f64>) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Radial {
            value: Arc::new(value),
            deriv: Arc::new(deriv),
            breaks,
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn constant(c: f64) -> Self {
        Self::from_fn(move |_| c, |_| 0.0, vec![])
    }

    pub fn gaussian(amp: f64, width: f64) -> Self {
        Self::mixture(&[(amp, width)])
    }

    /// `Σ a_k exp(-r²/w_k²)`.
    pub fn mixture(terms: &[(f64, f64)]) -> Self {
        let a: Vec<(f64, f64)> = terms.to_vec();
        let b = a.clone();
        Self::from_fn(
            move |r| a.iter().map(|(c, w)| c * (-(r / w).powi(2)).exp()).sum(),
            move |r| b.iter().map(|(c, w)| -2.0 * r / (w * w) * c * (-(r / w).powi(2)).exp()).sum(),
            vec![],
        )
    }

    /// 1 on `[lo, hi]`, 0 elsewhere.
    pub fn indicator(lo: f64, hi: f64) -> Self {
        Self::from_fn(move |r| if (lo..=hi).contains(&r) { 1.0 } else { 0.0 }, |_| 0.0, vec![lo, hi])
    }

    pub fn eval(&self, r: f64) -> f64 {
        (self.value)(r.abs())
    }

    pub fn derivative(&self, r: f64) -> f64 {
        (self.deriv)(r.abs()) * r.signum()
    }
}

/// A radial source `F(t, r)` with a declared bound
/// `|F| ≤ C/((1+r)(1+t+r)(1+|t-r|)^{1+δ})`.
#[derive(Clone)]
pub struct RadialSource {
    f: Fn2,
    pub c: f64,
    pub delta: f64,
    /// Extra `ξ = t + r` and `η = t - r` values where `F` has kinks.
    pub xi_breaks: Vec<f64>,
    pub eta_breaks: Vec<f64>,
}

impl std::fmt::Debug for RadialSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RadialSource")
            .field("c", &self.c)
            .field("delta", &self.delta)
            .finish_non_exhaustive()
    }
}

impl RadialSource {
    pub fn new<F: Fn(f64, f64) -> f64 + Send + Sync + 'static>(f: F, c: f64, delta: f64) -> Self {
        RadialSource {
            f: Arc::new(f),
            c,
            delta,
            xi_breaks: vec![],
            eta_breaks: vec![0.0],
        }
    }

    pub fn zero() -> Self {
        Self::new(|_, _| 0.0, 0.0, 1.0)
    }

    pub fn eval(&self, t: f64, r: f64) -> f64 {
        (self.f)(t, r)
    }

    pub fn envelope(&self, t: f64, r: f64) -> f64 {
        self.c / ((1.0 + r) * (1.0 + t + r) * (1.0 + (t - r).abs()).powf(1.0 + self.delta))
    }

    /// Largest `|F|/envelope` over a sample grid on `[0, extent]²`.
    pub fn check_decay(&self, extent: f64, n: usize) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..=n {
            for k in 0..=n {
                let t = extent * i as f64 / n as f64;
                let r = extent * k as f64 / n as f64;
                let env = self.envelope(t, r);
                let v = self.eval(t, r).abs();
                worst = worst.max(if env > 0.0 {
                    v / env
                } else if v > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                });
            }
        }
        worst
    }
}

fn with_breaks(lo: f64, hi: f64, extra: &[f64]) -> Vec<f64> {
    let mut b = vec![lo];
    for &x in extra {
        if x > lo && x < hi {
            b.push(x);
        }
    }
    b.push(hi);
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

pub const ORACLE_TOL: f64 = 1e-10;

/// `φ(t, r)` for `-□φ = F` with vanishing data:
/// `rφ = (1/4) ∬ ρ F(s, ρ) H(s) dη dξ` over `η ≤ t-r`, `t-r ≤ ξ ≤ t+r`,
/// with `s = (ξ+η)/2`, `ρ = (ξ-η)/2`.
pub fn solve_inhom_radial(f: &RadialSource, t: f64, r: f64) -> Result<f64> {
    if !(t >= 0.0) || !(r > 0.0) {
        return Err(MkgError::Domain(format!(
            "solve_inhom_radial needs t >= 0, r > 0 (t = {t}, r = {r})"
        )));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let inner_tol = QuadTol {
        abs: 1e-13,
        rel: 1e-11,
        max_panels: 2000,
    };
    let outer_tol = QuadTol {
        abs: 1e-12,
        rel: 1e-10,
        max_panels: 2000,
    };
    let eta_hi = t - r;
    let inner = |xi: f64| -> f64 {
        // s ≥ 0 and ρ ≥ 0 give -ξ ≤ η ≤ min(ξ, t-r)
        let lo = -xi;
        let hi = eta_hi.min(xi);
        if hi <= lo {
            return 0.0;
        }
        let breaks = with_breaks(lo, hi, &f.eta_breaks);
        quad::adaptive_with_breaks(
            |eta| {
                let s = 0.5 * (xi + eta);
                let rho = 0.5 * (xi - eta);
                rho * f.eval(s, rho)
            },
            &breaks,
            inner_tol,
        )
        .map(|i| i.value)
        .unwrap_or(f64::NAN)
    };
    let xi_lo = (t - r).abs();
    let mut xb = f.xi_breaks.clone();
    xb.push(t - r);
    let breaks = with_breaks(xi_lo, t + r, &xb);
    let outer = quad::adaptive_with_breaks(inner, &breaks, outer_tol)?;
    if !outer.value.is_finite() {
        return Err(MkgError::Quadrature {
            err: f64::NAN,
            target: outer_tol.abs,
        });
    }
    Ok(0.25 * outer.value / r)
}

/// Radial d'Alembert solution of `-□φ = 0` with `φ(0) = g`, `φ_t(0) = h`.
pub fn dalembert_free(g: &Radial, h: &Radial, t: f64, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(MkgError::NegativeRadius(r));
    }
    let a = (r - t).abs();
    let b = r + t;
    let mut rphi = 0.5 * ((r - t) * g.eval(a) + (r + t) * g.eval(b));
    if b > a {
        let breaks = with_breaks(a, b, &h.breaks);
        let tol = QuadTol {
            abs: 1e-14,
            rel: 1e-13,
            max_panels: 4000,
        };
        rphi += 0.5 * quad::adaptive_with_breaks(|l| l * h.eval(l), &breaks, tol)?.value;
    }
    Ok(rphi / r)
}

/// Kirchhoff's formula for radial data, reduced to `μ = ⟨x̂, ω⟩`:
/// `w = (1/2)∫ [t (w₁(ρ) + w₀'(ρ)(rμ+t)/ρ) + w₀(ρ)] dμ`,
/// `ρ = √(r²+t²+2rtμ)`.
pub fn kirchhoff_eval(w0: &Radial, w1: &Radial, t: f64, r: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(w0.eval(r));
    }
    let rho = |mu: f64| (r * r + t * t + 2.0 * r * t * mu).max(0.0).sqrt();
    let integrand = |mu: f64| {
        let p = rho(mu);
        let dir = if p > 0.0 { (r * mu + t) / p } else { 0.0 };
        t * (w1.eval(p) + w0.derivative(p) * dir) + w0.eval(p)
    };
    let mut mu_breaks = Vec::new();
    if r > 0.0 {
        for b in w0.breaks.iter().chain(&w1.breaks) {
            mu_breaks.push((b * b - r * r - t * t) / (2.0 * r * t));
        }
    }
    let breaks = with_breaks(-1.0, 1.0, &mu_breaks);
    let tol = QuadTol {
        abs: 1e-14,
        rel: 1e-13,
        max_panels: 4000,
    };
    Ok(0.5 * quad::adaptive_with_breaks(integrand, &breaks, tol)?.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DecayBound {
    Logest1 {
        delta: f64,
    },
    Logest2 {
        mu: f64,
        delta_plus: f64,
        delta_minus: f64,
    },
    Logest3 {
        mu: f64,
        delta_plus: f64,
        delta_minus: f64,
    },
    /// `norm` is the weighted data norm of the free data.
    Homoest {
        gamma: f64,
        norm: f64,
    },
}

/// `S⁰(t, r) = (t/r) ln(⟨t+r⟩/⟨t-r⟩)` in the form used by the
/// inhomogeneous estimate, with the `r -> 0` limit.
pub fn s0_inhom(t: f64, r: f64) -> f64 {
    let jb = |x: f64| x.hypot(1.0);
    if r < 1e-8 * (1.0 + t) {
        return 2.0 * t * t / (1.0 + t * t);
    }
    t / r * (jb(t + r) / jb(t - r)).ln()
}

impl DecayBound {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(MkgError::Config(m));
        match *self {
            DecayBound::Logest1 { delta } if !(delta > 0.0) => bad(format!("logest1 needs delta > 0, got {delta}")),
            DecayBound::Logest2 {
                mu,
                delta_plus,
                delta_minus,
            } if !(delta_minus > 0.0 && delta_minus < mu && delta_minus <= delta_plus) => bad(format!(
                "logest2 needs 0 < delta_minus < mu and delta_minus <= delta_plus (mu = {mu}, delta_plus = {delta_plus}, delta_minus = {delta_minus})"
            )),
            DecayBound::Logest3 {
                mu,
                delta_plus,
                delta_minus,
            } if !(mu > 0.0 && mu < delta_minus && delta_minus <= delta_plus) => bad(format!(
                "logest3 needs 0 < mu < delta_minus <= delta_plus (mu = {mu}, delta_plus = {delta_plus}, delta_minus = {delta_minus})"
            )),
            DecayBound::Homoest { gamma, norm } if !(gamma > 0.0 && gamma < 1.0) || !(norm >= 0.0) => {
                bad(format!("homoest needs 0 < gamma < 1 and a nonnegative data norm (gamma = {gamma}, norm = {norm})"))
            }
            _ => Ok(()),
        }
    }

    /// The right-hand side of the estimate with unit constant.
    pub fn envelope(&self, t: f64, r: f64) -> f64 {
        let q = r - t;
        let qp = q.max(0.0);
        let qm = (-q).max(0.0);
        match *self {
            DecayBound::Logest1 { delta } => s0_inhom(t, r) / ((1.0 + t + r) * (1.0 + qp).powf(delta)),
            DecayBound::Logest2 {
                delta_plus, delta_minus, ..
            } => 1.0 / ((1.0 + t + r) * (1.0 + qp).powf(delta_plus) * (1.0 + qm).powf(delta_minus)),
            DecayBound::Logest3 { mu, delta_plus, .. } => {
                1.0 / ((1.0 + t + r) * (1.0 + q.abs()).powf(mu) * (1.0 + qp).powf(delta_plus - mu))
            }
            DecayBound::Homoest { gamma, norm } => norm / ((1.0 + t + r) * (1.0 + q.abs()).powf(gamma)),
        }
    }
}

/// `sup_x ((1+|x|)^{2+γ}(|w₁| + |w₀'|) + (1+|x|)^{1+γ}|w₀|)` sampled on
/// `[0, r_max]`.
pub fn homoest_norm(w0: &Radial, w1: &Radial, gamma: f64, r_max: f64, n: usize) -> f64 {
    (0..=n)
        .map(|k| {
            let x = r_max * k as f64 / n as f64;
            (1.0 + x).powf(2.0 + gamma) * (w1.eval(x).abs() + w0.derivative(x).abs())
                + (1.0 + x).powf(1.0 + gamma) * w0.eval(x).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayVerdict {
    pub c_small: f64,
    pub c_large: f64,
    /// `c_large / c_small - 1`.
    pub change: f64,
    pub pass: bool,
}

/// One sweep: `sup |φ| / envelope` over `n × n` points of `(0, extent]²`.
/// Returns the constant and the sample table `t, r, |φ|, envelope, ratio`.
pub fn decay_sweep<S>(solution: &S, bound: &DecayBound, extent: f64, n: usize) -> Result<(f64, Vec<[f64; 5]>)>
where
    S: Fn(f64, f64) -> Result<f64> + Sync,
{
    bound.validate()?;
    let pts: Vec<(f64, f64)> = (1..=n)
        .flat_map(|i| (1..=n).map(move |k| (extent * i as f64 / n as f64, extent * k as f64 / n as f64)))
        .collect();
    let rows = pts
        .par_iter()
        .map(|&(t, r)| -> Result<[f64; 5]> {
            let v = solution(t, r)?.abs();
            let env = bound.envelope(t, r);
            let ratio = if v == 0.0 { 0.0 } else { v / env };
            Ok([t, r, v, env, ratio])
        })
        .collect::<Result<Vec<_>>>()?;
    let c = rows.iter().map(|row| row[4]).fold(0.0, f64::max);
    Ok((c, rows))
}

/// Observed constant on `(0, T]²` and `(0, 2T]²` (same spacing); passes
/// when both are finite and agree within `stability`.
pub fn verify_decay_bound<S>(
    solution: &S,
    bound: &DecayBound,
    extent: f64,
    n: usize,
    stability: f64,
) -> Result<(DecayVerdict, Vec<[f64; 5]>)>
where
    S: Fn(f64, f64) -> Result<f64> + Sync,
{
    let (c_small, _) = decay_sweep(solution, bound, extent, n)?;
    let (c_large, rows) = decay_sweep(solution, bound, 2.0 * extent, 2 * n)?;
    let change = if c_small == 0.0 && c_large == 0.0 {
        0.0
    } else {
        c_large / c_small - 1.0
    };
    let pass = c_small.is_finite() && c_large.is_finite() && change.abs() <= stability;
    Ok((
        DecayVerdict {
            c_small,
            c_large,
            change,
            pass,
        },
        rows,
    ))
}

pub fn decay_table(config_hash: &str, rows: &[[f64; 5]]) -> CsvTable {
    let mut t = CsvTable::new(config_hash, &["t", "r", "abs_phi", "envelope", "ratio"]);
    for r in rows {
        t.push(r.to_vec());
    }
    t
}

/// Smallest value of the solution over the points (nonnegative for
/// nonnegative sources).
pub fn positivity_min(f: &RadialSource, points: &[(f64, f64)]) -> Result<f64> {
    let v = points
        .par_iter()
        .map(|&(t, r)| solve_inhom_radial(f, t, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(v.into_iter().fold(f64::INFINITY, f64::min))
}

/// Largest `|φ|` at points with `r > R + t` for a source supported in
/// `r ≤ R`.
pub fn finite_speed_max(f: &RadialSource, support_r: f64, points: &[(f64, f64)]) -> Result<f64> {
    let v = points
        .par_iter()
        .filter(|(t, r)| *r > support_r + *t)
        .map(|&(t, r)| solve_inhom_radial(f, t, r).map(f64::abs))
        .collect::<Result<Vec<_>>>()?;
    Ok(v.into_iter().fold(0.0, f64::max))
}

/// Self-tests run by the command line `oracle` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCase {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub const ORACLE_CASES: &[&str] = &[
    "manufactured",
    "dalembert",
    "kirchhoff",
    "logest1",
    "homoest",
    "positivity",
    "finite_speed",
];

/// `φ* = e^{-t} e^{-r²}`: the source of `-□φ* = F` and the free data that
/// the zero-data representation misses.
pub fn manufactured_source() -> RadialSource {
    RadialSource::new(|t, r| (-t).exp() * (-r * r).exp() * (7.0 - 4.0 * r * r), 8.0, 1.0)
}

pub fn run_case(name: &str) -> Result<OracleCase> {
    let case = |measured: f64, tolerance: f64, pass: bool| OracleCase {
        name: name.to_string(),
        measured,
        tolerance,
        pass,
    };
    match name {
        "manufactured" => {
            let (t, r) = (1.0, 1.0);
            let inhom = solve_inhom_radial(&manufactured_source(), t, r)?;
            let free = dalembert_free(&Radial::gaussian(1.0, 1.0), &Radial::gaussian(-1.0, 1.0), t, r)?;
            let err = (inhom + free - (-t - r * r).exp()).abs();
            Ok(case(err, 1e-6, err < 1e-6))
        }
        "dalembert" => {
            let v = dalembert_free(&Radial::zero(), &Radial::indicator(0.0, 1.0), 1.0, 1.0)?;
            let err = (v - 0.25).abs();
            Ok(case(err, 1e-12, err < 1e-12))
        }
        "kirchhoff" => {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
            let mut worst = 0.0f64;
            for _ in 0..1000 {
                let terms = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<(f64, f64)> {
                    (0..rng.gen_range(1..=3))
                        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.3..2.0)))
                        .collect()
                };
                let g = Radial::mixture(&terms(&mut rng));
                let h = Radial::mixture(&terms(&mut rng));
                let t = rng.gen_range(0.0..6.0);
                let r = rng.gen_range(0.05..6.0);
                let d = dalembert_free(&g, &h, t, r)?;
                let k = kirchhoff_eval(&g, &h, t, r)?;
                worst = worst.max((d - k).abs());
            }
            Ok(case(worst, 1e-8, worst < 1e-8))
        }
        "logest1" => {
            let src = RadialSource::new(
                |t, r| 1.0 / ((1.0 + r) * (1.0 + t + r) * (1.0 + (t - r).abs()).powi(2)),
                1.0,
                1.0,
            );
            let bound = DecayBound::Logest1 { delta: 1.0 };
            let (v, _) = verify_decay_bound(&|t, r| solve_inhom_radial(&src, t, r), &bound, 100.0, 12, 0.2)?;
            Ok(case(v.change.abs(), 0.2, v.pass))
        }
        "homoest" => {
            let w1 = Radial::gaussian(1.0, 1.0);
            let w0 = Radial::zero();
            let gamma = 0.5;
            let norm = homoest_norm(&w0, &w1, gamma, 40.0, 4000);
            let bound = DecayBound::Homoest { gamma, norm };
            let (v, _) = verify_decay_bound(&|t, r| dalembert_free(&w0, &w1, t, r), &bound, 100.0, 40, 0.2)?;
            Ok(case(v.change.abs(), 0.2, v.pass))
        }
        "positivity" => {
            let mut worst = f64::INFINITY;
            for (c, w) in [(0.0, 1.0), (2.0, 0.5), (1.0, 2.0)] {
                let src = RadialSource::new(move |t, r| (-((r - c) / w).powi(2) - t).exp(), 10.0, 1.0);
                let pts: Vec<(f64, f64)> = (1..=6)
                    .flat_map(|i| (1..=6).map(move |k| (i as f64, 0.7 * k as f64)))
                    .collect();
                worst = worst.min(positivity_min(&src, &pts)?);
            }
            Ok(case(worst, 0.0, worst >= 0.0))
        }
        "finite_speed" => {
            let src = RadialSource::new(
                |t, r| {
                    if r <= 1.0 && t <= 1.0 {
                        (1.0 - r * r).powi(2) * (t * (1.0 - t)).max(0.0)
                    } else {
                        0.0
                    }
                },
                10.0,
                1.0,
            );
            let pts: Vec<(f64, f64)> = (1..=5)
                .flat_map(|i| (0..5).map(move |k| (0.5 * i as f64, 2.0 + 0.5 * i as f64 + 0.3 * k as f64 + 0.1)))
                .collect();
            let m = finite_speed_max(&src, 1.0, &pts)?;
            Ok(case(m, 1e-14, m <= 1e-14))
        }
        other => Err(MkgError::Config(format!(
            "unknown oracle case {other:?}; known cases: {}",
            ORACLE_CASES.join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_source_gives_zero() {
        assert_eq!(solve_inhom_radial(&RadialSource::zero(), 2.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn dalembert_initial_condition() {
        let g = Radial::gaussian(1.0, 1.0);
        let v = dalembert_free(&g, &Radial::zero(), 0.0, 0.7).unwrap();
        assert!((v - (-0.49f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn dalembert_indicator() {
        let v = dalembert_free(&Radial::zero(), &Radial::indicator(0.0, 1.0), 1.0, 1.0).unwrap();
        assert!((v - 0.25).abs() < 1e-13);
        let k = kirchhoff_eval(&Radial::zero(), &Radial::indicator(0.0, 1.0), 1.0, 1.0).unwrap();
        assert!((k - 0.25).abs() < 1e-12);
    }

    #[test]
    fn kirchhoff_constant() {
        let v = kirchhoff_eval(&Radial::constant(3.0), &Radial::zero(), 2.5, 1.2).unwrap();
        assert!((v - 3.0).abs() < 1e-13);
    }

    #[test]
    fn radiation_field_limit() {
        // r φ(t, t+q) -> (q/2) g(|q|)
        let g = Radial::gaussian(1.0, 1.0);
        let q = 0.5f64;
        let t = 200.0;
        let v = (t + q) * dalembert_free(&g, &Radial::zero(), t, t + q).unwrap();
        assert!((v - 0.5 * q * (-q * q).exp()).abs() < 1e-12);
    }

    #[test]
    fn bad_params_rejected() {
        let b = DecayBound::Logest2 {
            mu: 0.2,
            delta_plus: 1.0,
            delta_minus: 0.5,
        };
        assert!(matches!(b.validate(), Err(MkgError::Config(_))));
        assert!(DecayBound::Logest3 {
            mu: 0.2,
            delta_plus: 1.0,
            delta_minus: 0.5
        }
        .validate()
        .is_ok());
    }

    #[test]
    fn zero_solution_constant() {
        let (c, _) = decay_sweep(&|_, _| Ok(0.0), &DecayBound::Logest1 { delta: 1.0 }, 10.0, 4).unwrap();
        assert_eq!(c, 0.0);
    }

    #[test]
    fn unknown_case() {
        assert!(run_case("nope").is_err());
    }
}
