//! The asymptotic system at null infinity in `(q, s = ln r)`:
//! `∂_s P = -i 𝒜_L P`, `∂_s B_μ = (L_μ/2) Im(Φ conj P)` with `P = ∂_qΦ`,
//! `B_μ = ∂_q𝒜_μ` and `𝒜_L` a constant.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MkgError, Result};
use crate::extraction::linear_fit;
use crate::interior::{null_covector, FourVector};
use crate::report::fmt_f64;

/// Right-hand side used for `∂_s P`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseRhs {
    /// `-i 𝒜_L P`.
    Null,
    /// `-i |P| P`, a self-interaction that is not of null form.
    ModulusPhase,
    /// `|P| P`, blows up in finite `s`.
    Riccati,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymState {
    pub s: f64,
    pub q0: f64,
    pub dq: f64,
    pub p: Vec<Complex64>,
    pub b_mu: Vec<FourVector>,
    pub a_l_param: f64,
    pub omega: [f64; 3],
}

/// `∫_q^{q_max} f`, fourth order: interior cells use the cubic through
/// four nodes, the two end cells one-sided cubics.
fn tail_integral<T>(f: &[T], dq: f64) -> Vec<T>
where
    T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let n = f.len();
    let mut out = vec![T::default(); n];
    if n < 2 {
        return out;
    }
    let cell = |i: usize| -> T {
        // integral over [q_i, q_{i+1}]
        if n < 4 {
            return (f[i] + f[i + 1]) * (0.5 * dq);
        }
        if i == 0 {
            (f[0] * 9.0 + f[1] * 19.0 + f[2] * -5.0 + f[3]) * (dq / 24.0)
        } else if i == n - 2 {
            (f[n - 1] * 9.0 + f[n - 2] * 19.0 + f[n - 3] * -5.0 + f[n - 4]) * (dq / 24.0)
        } else {
            (f[i - 1] * -1.0 + f[i] * 13.0 + f[i + 1] * 13.0 + f[i + 2] * -1.0) * (dq / 24.0)
        }
    };
    for i in (0..n - 1).rev() {
        out[i] = out[i + 1] + cell(i);
    }
    out
}

impl AsymState {
    /// State at `s0` with `P = dΦ₀/dq` and `B_μ = 0`.
    pub fn new(q0: f64, dq: f64, p: Vec<Complex64>, a_l_param: f64, omega: [f64; 3], s0: f64) -> Result<Self> {
        let n = (omega[0] * omega[0] + omega[1] * omega[1] + omega[2] * omega[2]).sqrt();
        if (n - 1.0).abs() > 1e-12 {
            return Err(MkgError::Domain(format!("direction must be a unit vector, |ω| = {n}")));
        }
        if !(dq > 0.0) || p.len() < 4 {
            return Err(MkgError::InvalidGrid(
                "asymptotic q grid needs dq > 0 and at least 4 nodes".into(),
            ));
        }
        let b_mu = vec![[0.0; 4]; p.len()];
        Ok(AsymState {
            s: s0,
            q0,
            dq,
            p,
            b_mu,
            a_l_param,
            omega,
        })
    }

    /// Samples `Φ₀` and differentiates it analytically through `dphi0`.
    pub fn from_profile<D>(q_lo: f64, q_hi: f64, n: usize, dphi0: D, a_l_param: f64, omega: [f64; 3]) -> Result<Self>
    where
        D: Fn(f64) -> Complex64,
    {
        let dq = (q_hi - q_lo) / n as f64;
        let p = (0..=n).map(|k| dphi0(q_lo + k as f64 * dq)).collect();
        Self::new(q_lo, dq, p, a_l_param, omega, 0.0)
    }

    pub fn q_grid(&self) -> Vec<f64> {
        (0..self.p.len()).map(|k| self.q0 + k as f64 * self.dq).collect()
    }

    /// `Φ(q) = -∫_q^{q_max} P`, i.e. `Φ(q_max) = 0`.
    pub fn phi(&self) -> Vec<Complex64> {
        tail_integral(&self.p, self.dq).into_iter().map(|v| -v).collect()
    }

    /// `𝒜_μ(q) = -∫_q^{q_max} B_μ` (zero at `q_max`).
    pub fn a_mu(&self) -> Vec<FourVector> {
        let mut out = vec![[0.0; 4]; self.p.len()];
        for k in 0..4 {
            let comp: Vec<f64> = self.b_mu.iter().map(|b| b[k]).collect();
            for (o, v) in out.iter_mut().zip(tail_integral(&comp, self.dq)) {
                o[k] = -v;
            }
        }
        out
    }

    /// `L̄^μ` with raised time index: `(1, -ω)`.
    fn lbar_up(&self) -> FourVector {
        [1.0, -self.omega[0], -self.omega[1], -self.omega[2]]
    }

    fn l_up(&self) -> FourVector {
        [1.0, self.omega[0], self.omega[1], self.omega[2]]
    }

    pub fn a_lbar(&self) -> Vec<f64> {
        let lb = self.lbar_up();
        self.a_mu().iter().map(|a| contract(&lb, a)).collect()
    }

    pub fn a_l(&self) -> Vec<f64> {
        let l = self.l_up();
        self.a_mu().iter().map(|a| contract(&l, a)).collect()
    }

    /// `j(q) = Im(Φ conj P)`.
    pub fn j(&self) -> Vec<f64> {
        self.phi().iter().zip(&self.p).map(|(f, p)| (f * p.conj()).im).collect()
    }

    /// `∫_q^{q_max} j`, the predicted `s`-slope of `𝒜_L̄`.
    pub fn albar_slope_prediction(&self) -> Vec<f64> {
        tail_integral(&self.j(), self.dq)
    }
}

fn contract(u: &FourVector, a: &FourVector) -> f64 {
    u[0] * a[0] + u[1] * a[1] + u[2] * a[2] + u[3] * a[3]
}

struct Deriv {
    p: Vec<Complex64>,
    b: Vec<FourVector>,
}

fn deriv(p: &[Complex64], dq: f64, a_l: f64, l_mu: &FourVector, rhs: PhaseRhs) -> Deriv {
    let phi: Vec<Complex64> = tail_integral(p, dq).into_iter().map(|v| -v).collect();
    let dp = p
        .par_iter()
        .map(|&v| match rhs {
            PhaseRhs::Null => Complex64::new(0.0, -a_l) * v,
            PhaseRhs::ModulusPhase => Complex64::new(0.0, -v.norm()) * v,
            PhaseRhs::Riccati => v * v.norm(),
        })
        .collect();
    let b = phi
        .iter()
        .zip(p)
        .map(|(f, v)| {
            let im = (f * v.conj()).im;
            l_mu.map(|l| 0.5 * l * im)
        })
        .collect();
    Deriv { p: dp, b }
}

/// RK4 in `s` from `state.s` to `s_target` with steps of at most `ds`.
pub fn integrate(state: &AsymState, s_target: f64, ds: f64) -> Result<AsymState> {
    integrate_with(state, s_target, ds, PhaseRhs::Null)
}

pub fn integrate_with(state: &AsymState, s_target: f64, ds: f64, rhs: PhaseRhs) -> Result<AsymState> {
    if !(ds > 0.0) || !ds.is_finite() {
        return Err(MkgError::InvalidScheme(format!("ds must be positive, got {ds}")));
    }
    if !(s_target >= state.s) {
        return Err(MkgError::InvalidScheme(format!(
            "s_target {s_target} is behind the state at s = {}",
            state.s
        )));
    }
    let span = s_target - state.s;
    let steps = (span / ds - 1e-9).ceil().max(0.0) as usize;
    let h = if steps > 0 { span / steps as f64 } else { 0.0 };
    let l_mu = null_covector(state.omega);
    let mut out = state.clone();
    let s0 = state.s;
    for k in 0..steps {
        let p0 = out.p.clone();
        let stage = |p: &[Complex64]| deriv(p, out.dq, out.a_l_param, &l_mu, rhs);
        let axpy = |d: &Deriv, c: f64| -> Vec<Complex64> { p0.iter().zip(&d.p).map(|(a, b)| a + b * c).collect() };
        let k1 = stage(&p0);
        let k2 = stage(&axpy(&k1, 0.5 * h));
        let k3 = stage(&axpy(&k2, 0.5 * h));
        let k4 = stage(&axpy(&k3, h));
        for i in 0..p0.len() {
            out.p[i] = p0[i] + (k1.p[i] + k2.p[i] * 2.0 + k3.p[i] * 2.0 + k4.p[i]) * (h / 6.0);
            for m in 0..4 {
                out.b_mu[i][m] += h / 6.0 * (k1.b[i][m] + 2.0 * k2.b[i][m] + 2.0 * k3.b[i][m] + k4.b[i][m]);
            }
        }
        out.s = s0 + (k + 1) as f64 * h;
        if out.p.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(MkgError::Divergent(format!("P became non-finite at s = {}", out.s)));
        }
    }
    out.s = s_target;
    Ok(out)
}

/// States at the requested `s` values (increasing, starting at or after
/// `state.s`).
pub fn trajectory(state: &AsymState, s_list: &[f64], ds: f64, rhs: PhaseRhs) -> Result<Vec<AsymState>> {
    let mut out = Vec::with_capacity(s_list.len());
    let mut cur = state.clone();
    for &s in s_list {
        cur = integrate_with(&cur, s, ds, rhs)?;
        out.push(cur.clone());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlbarProfile {
    pub q: Vec<f64>,
    pub slope: Vec<f64>,
    pub intercept: Vec<f64>,
    /// Worst regression residual over all `q`.
    pub max_residual: f64,
}

/// Per-`q` linear regression of `𝒜_L̄` against `s`.
pub fn albar_profile(states: &[AsymState]) -> Result<AlbarProfile> {
    if states.len() < 3 {
        return Err(MkgError::InsufficientSamples {
            need: 3,
            got: states.len(),
        });
    }
    let s: Vec<f64> = states.iter().map(|st| st.s).collect();
    let profiles: Vec<Vec<f64>> = states.iter().map(|st| st.a_lbar()).collect();
    let n = states[0].p.len();
    let mut slope = Vec::with_capacity(n);
    let mut intercept = Vec::with_capacity(n);
    let mut max_residual = 0.0f64;
    for i in 0..n {
        let y: Vec<f64> = profiles.iter().map(|p| p[i]).collect();
        if y.iter().all(|&v| v == y[0]) {
            slope.push(0.0);
            intercept.push(y[0]);
            continue;
        }
        let fit = linear_fit(&s, &y)?;
        slope.push(fit.slope);
        intercept.push(fit.intercept);
        max_residual = max_residual.max(fit.max_residual);
    }
    Ok(AlbarProfile {
        q: states[0].q_grid(),
        slope,
        intercept,
        max_residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// `max_{q,s} ||P(q,s)| - |P(q,0)||`, relative to `sup |P(·,0)|`.
    pub modulus_drift: f64,
    /// Worst residual of the affine fit of `sup_q |𝒜_L̄|` in `s`, relative
    /// to `max(1, sup)`.
    pub albar_affine_residual: f64,
    /// Largest change of `sup_q |𝒜_L|` and `sup_q |𝒜_{S_B}|` in `s`.
    pub tangential_drift: f64,
    pub blow_up: bool,
    pub pass: bool,
    pub s_reached: f64,
}

pub const MODULUS_TOL: f64 = 1e-10;
pub const AFFINE_TOL: f64 = 1e-6;
pub const TANGENTIAL_TOL: f64 = 1e-10;
const BLOW_UP_FACTOR: f64 = 1e6;

fn tangential_sup(st: &AsymState) -> f64 {
    let w = st.omega;
    let helper = if w[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let d = helper[0] * w[0] + helper[1] * w[1] + helper[2] * w[2];
    let mut e1 = [helper[0] - d * w[0], helper[1] - d * w[1], helper[2] - d * w[2]];
    let n1 = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    e1 = e1.map(|v| v / n1);
    let e2 = [
        w[1] * e1[2] - w[2] * e1[1],
        w[2] * e1[0] - w[0] * e1[2],
        w[0] * e1[1] - w[1] * e1[0],
    ];
    let l = st.l_up();
    st.a_mu()
        .iter()
        .map(|a| {
            let al = contract(&l, a).abs();
            let s1 = (e1[0] * a[1] + e1[1] * a[2] + e1[2] * a[3]).abs();
            let s2 = (e2[0] * a[1] + e2[1] * a[2] + e2[2] * a[3]).abs();
            al.max(s1).max(s2)
        })
        .fold(0.0, f64::max)
}

/// Integrates over `s ∈ [state.s, state.s + span]`, sampling `samples` slices,
/// and checks the weak null structure: conserved `|P|`, affine `𝒜_L̄`,
/// constant tangential components.
pub fn weak_null_certificate(state: &AsymState, span: f64, ds: f64, samples: usize, rhs: PhaseRhs) -> Result<Certificate> {
    let samples = samples.max(3);
    let s_list: Vec<f64> = (1..=samples).map(|k| state.s + span * k as f64 / samples as f64).collect();
    let p0: Vec<f64> = state.p.iter().map(|v| v.norm()).collect();
    let p_sup = p0.iter().cloned().fold(0.0, f64::max);
    let mut states = vec![state.clone()];
    let mut blow_up = false;
    let mut cur = state.clone();
    for &s in &s_list {
        match integrate_with(&cur, s, ds, rhs) {
            Ok(next) => {
                let sup = next.p.iter().map(|v| v.norm()).fold(0.0, f64::max);
                cur = next;
                states.push(cur.clone());
                if sup > BLOW_UP_FACTOR * p_sup.max(f64::MIN_POSITIVE) {
                    blow_up = true;
                    break;
                }
            }
            Err(MkgError::Divergent(_)) => {
                blow_up = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let scale = if p_sup > 0.0 { p_sup } else { 1.0 };
    let modulus_drift = states
        .iter()
        .flat_map(|st| st.p.iter().zip(&p0).map(|(v, m)| (v.norm() - m).abs()))
        .fold(0.0, f64::max)
        / scale;
    let s: Vec<f64> = states.iter().map(|st| st.s).collect();
    let sups: Vec<f64> = states
        .iter()
        .map(|st| st.a_lbar().iter().map(|v| v.abs()).fold(0.0, f64::max))
        .collect();
    let albar_affine_residual = if sups.iter().any(|v| !v.is_finite()) {
        f64::INFINITY
    } else if sups.iter().all(|&v| v == sups[0]) {
        0.0
    } else if s.len() >= 3 {
        let fit = linear_fit(&s, &sups)?;
        fit.max_residual / sups.iter().cloned().fold(1.0, f64::max)
    } else {
        f64::INFINITY
    };
    let tan: Vec<f64> = states.iter().map(tangential_sup).collect();
    let tangential_drift = tan.iter().map(|v| (v - tan[0]).abs()).fold(0.0, f64::max);
    let pass = !blow_up && modulus_drift < MODULUS_TOL && albar_affine_residual < AFFINE_TOL && tangential_drift < TANGENTIAL_TOL;
    Ok(Certificate {
        modulus_drift,
        albar_affine_residual,
        tangential_drift,
        blow_up,
        pass,
        s_reached: cur.s,
    })
}

/// CSV rows `q, s, |P|, Re Φ, Im Φ, A_Lbar` for each state.
pub fn write_csv<W: Write>(out: &mut W, config_hash: &str, states: &[AsymState]) -> Result<()> {
    writeln!(out, "# config_hash={config_hash}")?;
    writeln!(out, "q,s,abs_P,re_Phi,im_Phi,A_Lbar")?;
    for st in states {
        let phi = st.phi();
        let albar = st.a_lbar();
        for (i, q) in st.q_grid().iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt_f64(*q),
                fmt_f64(st.s),
                fmt_f64(st.p[i].norm()),
                fmt_f64(phi[i].re),
                fmt_f64(phi[i].im),
                fmt_f64(albar[i])
            )?;
        }
    }
    Ok(())
}
