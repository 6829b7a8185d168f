//! Null-infinity extraction: radiation field with the charge phase, the
//! limit of `rA_L`, the asymptotic current, the modified bad component and
//! weighted decay envelopes.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::data::{ChargeValue, CutoffChi};
use crate::error::{MkgError, Result};
use crate::evolution::RaySample;
use crate::field::{jbracket, s0_weight, FieldState, Parity, RadialGrid, Weights};
use crate::quad::{adaptive_left_singular, adaptive_with_breaks, QuadTol};

/// Charge phase `e^{i (Q/4π) ln(1+r)}`.
pub fn charge_phase(q: ChargeValue, r: f64) -> Complex64 {
    Complex64::from_polar(1.0, q.coulomb() * r.ln_1p())
}

/// Limit estimate from the last value with Cauchy increments as error bars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitEstimate<T> {
    pub value: T,
    pub err_est: f64,
    pub radii: Vec<f64>,
    pub increments: Vec<f64>,
    /// Terminal increment over the previous one.
    pub terminal_ratio: f64,
    /// Increments normalised by `⟨t+r⟩^{1/2-(s+γ)}` do not grow at the end.
    pub rate_consistent: bool,
}

/// `|x_{k+1} - x_k|` for consecutive entries.
pub fn cauchy_increments<T: Copy + std::ops::Sub<Output = T>>(values: &[T], norm: impl Fn(T) -> f64) -> Vec<f64> {
    values.windows(2).map(|w| norm(w[1] - w[0])).collect()
}

fn estimate<T: Copy + std::ops::Sub<Output = T>>(
    values: &[T],
    tr: &[f64],
    radii: Vec<f64>,
    weights: &Weights,
    norm: impl Fn(T) -> f64,
) -> Result<LimitEstimate<T>> {
    if values.len() < 3 {
        return Err(MkgError::InsufficientSamples {
            need: 3,
            got: values.len(),
        });
    }
    let inc = cauchy_increments(values, norm);
    let k = inc.len();
    let terminal_ratio = if inc[k - 2] > 0.0 {
        inc[k - 1] / inc[k - 2]
    } else if inc[k - 1] == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let p = 0.5 - weights.s0p;
    let normalized: Vec<f64> = inc.iter().enumerate().map(|(i, d)| d / jbracket(tr[i + 1]).powf(p)).collect();
    let earlier = normalized[..k - 1].iter().cloned().fold(0.0, f64::max);
    let rate_consistent = normalized[k - 1] <= 1.5 * earlier || normalized[k - 1] == 0.0;
    if inc[k - 1] > inc[k - 2] {
        return Err(MkgError::NoLimit(format!(
            "increments grow at the end of the sequence: {:.3e} after {:.3e}",
            inc[k - 1],
            inc[k - 2]
        )));
    }
    Ok(LimitEstimate {
        value: values[values.len() - 1],
        err_est: inc[k - 1],
        radii,
        increments: inc,
        terminal_ratio,
        rate_consistent,
    })
}

/// Phase-corrected values `r e^{i(Q/4π)ln(1+r)} φ` along a ray.
pub fn corrected_sequence(ray: &RaySample, q: ChargeValue) -> Vec<Complex64> {
    ray.points.iter().map(|p| p.rphi * charge_phase(q, p.r)).collect()
}

/// Radiation field `Φ₀(q)` as the last phase-corrected value.
pub fn extract_phi0(ray: &RaySample, q: ChargeValue, weights: &Weights) -> Result<LimitEstimate<Complex64>> {
    let values = corrected_sequence(ray, q);
    let tr: Vec<f64> = ray.points.iter().map(|p| p.t + p.r).collect();
    let radii = ray.points.iter().map(|p| p.r).collect();
    if values.iter().all(|v| *v == Complex64::default()) && values.len() >= 3 {
        return Ok(LimitEstimate {
            value: Complex64::default(),
            err_est: 0.0,
            radii,
            increments: vec![0.0; values.len() - 1],
            terminal_ratio: 0.0,
            rate_consistent: true,
        });
    }
    estimate(&values, &tr, radii, weights, |z| z.norm())
}

/// Limit of `r A_L` along a ray. `agrees` compares against `Q/4π` with the
/// relative tolerance `rel_tol`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ALLimit {
    pub estimate: LimitEstimate<f64>,
    pub relative_errors: Vec<f64>,
    pub agrees: bool,
}

pub fn extract_al_limit(ray: &RaySample, q: ChargeValue, weights: &Weights, rel_tol: f64) -> Result<ALLimit> {
    let values: Vec<f64> = ray.points.iter().map(|p| p.r * p.frame.a_l).collect();
    let tr: Vec<f64> = ray.points.iter().map(|p| p.t + p.r).collect();
    let radii = ray.points.iter().map(|p| p.r).collect();
    let target = q.coulomb();
    let scale = if target != 0.0 { target.abs() } else { 1.0 };
    let relative_errors: Vec<f64> = values.iter().map(|v| (v - target).abs() / scale).collect();
    let estimate = if values.len() >= 3 && values.iter().all(|&v| v == 0.0) {
        LimitEstimate {
            value: 0.0,
            err_est: 0.0,
            radii,
            increments: vec![0.0; values.len() - 1],
            terminal_ratio: 0.0,
            rate_consistent: true,
        }
    } else {
        estimate(&values, &tr, radii, weights, f64::abs)?
    };
    let agrees = relative_errors.last().map(|&e| e <= rel_tol).unwrap_or(false);
    Ok(ALLimit {
        estimate,
        relative_errors,
        agrees,
    })
}

/// Least-squares line with its coefficient of determination and
/// correlation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub correlation: f64,
    pub max_residual: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n < 3 || y.len() != n {
        return Err(MkgError::InsufficientSamples {
            need: 3,
            got: n.min(y.len()),
        });
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(MkgError::Domain("degenerate abscissae in fit".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = (0..n).map(|i| (y[i] - intercept - slope * x[i]).powi(2)).sum();
    let max_residual = (0..n).map(|i| (y[i] - intercept - slope * x[i]).abs()).fold(0.0, f64::max);
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    let correlation = if syy == 0.0 { 1.0 } else { sxy / (sxx * syy).sqrt() };
    Ok(LinearFit {
        slope,
        intercept,
        r2,
        correlation,
        max_residual,
    })
}

/// Unwrapped argument of a complex sequence. Consecutive wrapped jumps
/// above `π/2` are treated as aliasing.
pub fn unwrap_phase(values: &[Complex64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(values.len());
    let mut prev = 0.0;
    for (i, z) in values.iter().enumerate() {
        let a = z.arg();
        if i == 0 {
            out.push(a);
            prev = a;
            continue;
        }
        let mut d = a - prev.rem_euclid(2.0 * std::f64::consts::PI);
        d = (d + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI;
        if d.abs() > 0.5 * std::f64::consts::PI {
            return Err(MkgError::Undersampled { index: i - 1, jump: d });
        }
        prev += d;
        out.push(prev);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseFit {
    pub slope: f64,
    pub r2: f64,
    pub samples: usize,
}

/// Slope of the unwrapped `arg(rφ)` against `ln(1+r)`.
pub fn phase_slope_fit(ray: &RaySample) -> Result<PhaseFit> {
    let vals: Vec<Complex64> = ray.points.iter().map(|p| p.rphi).collect();
    phase_slope_fit_values(&ray.points.iter().map(|p| p.r).collect::<Vec<_>>(), &vals)
}

pub fn phase_slope_fit_values(r: &[f64], values: &[Complex64]) -> Result<PhaseFit> {
    let top = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let bottom = values.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    if values.len() < 3 {
        return Err(MkgError::InsufficientSamples {
            need: 3,
            got: values.len(),
        });
    }
    if !(top > 0.0) || bottom < 1e-6 * top {
        return Err(MkgError::Domain(
            "|rφ| is not bounded away from zero on the fit window".into(),
        ));
    }
    let phase = unwrap_phase(values)?;
    let x: Vec<f64> = r.iter().map(|v| v.ln_1p()).collect();
    let fit = linear_fit(&x, &phase)?;
    Ok(PhaseFit {
        slope: fit.slope,
        r2: fit.r2,
        samples: values.len(),
    })
}

/// `𝒥_L̄ = -2 Im(Φ₀ conj ∂_qΦ₀)` on a uniform grid.
pub fn compute_j_asym(phi0: &[Complex64], dq: f64) -> Vec<f64> {
    let d = dq_derivative(phi0, dq);
    phi0.iter().zip(&d).map(|(p, dp)| -2.0 * (p * dp.conj()).im).collect()
}

/// Centered first differences, one-sided second order at the ends.
pub fn dq_derivative(f: &[Complex64], dq: f64) -> Vec<Complex64> {
    let n = f.len();
    if n < 3 {
        return vec![Complex64::default(); n];
    }
    (0..n)
        .map(|i| {
            if i == 0 {
                (f[1] * 4.0 - f[0] * 3.0 - f[2]) / (2.0 * dq)
            } else if i == n - 1 {
                (f[n - 1] * 3.0 - f[n - 2] * 4.0 + f[n - 3]) / (2.0 * dq)
            } else {
                (f[i + 1] - f[i - 1]) / (2.0 * dq)
            }
        })
        .collect()
}

/// A function tabulated on a uniform grid, cubic between nodes and zero
/// outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformTable {
    pub q0: f64,
    pub dq: f64,
    pub values: Vec<f64>,
}

impl UniformTable {
    pub fn lo(&self) -> f64 {
        self.q0
    }

    pub fn hi(&self) -> f64 {
        self.q0 + self.dq * (self.values.len() - 1) as f64
    }

    pub fn eval(&self, q: f64) -> f64 {
        if q < self.lo() || q > self.hi() {
            return 0.0;
        }
        let x = (q - self.q0) / self.dq;
        crate::field::interp_cubic_clamped(&self.values, x)
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.values.len()).map(|i| self.q0 + i as f64 * self.dq).collect()
    }
}

/// `(1/2r) ∫_{r-t}^∞ 𝒥(η) ln((η+t+r)/(η+t-r)) dη` for `𝒥` supported on
/// `[lo, hi]`, with the logarithmic endpoint handled by `η = (r-t) + e^μ`.
pub fn log_kernel_correction<F: Fn(f64) -> f64>(
    j: F,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    t: f64,
    r: f64,
    abs_tol: f64,
) -> Result<f64> {
    if r <= 0.0 {
        return Err(MkgError::NegativeRadius(r));
    }
    let a = r - t;
    let kernel = |eta: f64| ((eta + t + r) / (eta + t - r)).ln();
    let start = a.max(lo);
    if start >= hi {
        return Ok(0.0);
    }
    let tol = QuadTol {
        abs: abs_tol,
        rel: 0.0,
        max_panels: 20000,
    };
    let mut total = 0.0;
    let mut regular_from = start;
    if a >= lo {
        let end = (a + 1.0).min(hi);
        let mut pieces: Vec<f64> = vec![a];
        pieces.extend(breaks.iter().copied().filter(|&b| b > a && b < end));
        pieces.push(end);
        // the singular first piece, then smooth pieces up to `end`
        total += adaptive_left_singular(|d| j(a + d) * ((d + 2.0 * r) / d).ln(), pieces[1] - a, tol)?.value;
        if pieces.len() > 2 {
            total += adaptive_with_breaks(|x| j(x) * kernel(x), &pieces[1..], tol)?.value;
        }
        regular_from = end;
    }
    if regular_from < hi {
        let mut pieces: Vec<f64> = vec![regular_from];
        pieces.extend(breaks.iter().copied().filter(|&b| b > regular_from && b < hi));
        pieces.push(hi);
        total += adaptive_with_breaks(|x| j(x) * kernel(x), &pieces, tol)?.value;
    }
    Ok(total / (2.0 * r))
}

/// `A_L̄^mod = A_L̄ - (1/2r)∫_{r-t}^∞ 𝒥_L̄ ln((η+t+r)/(η+t-r)) dη`.
pub fn mod_albar(a_lbar: f64, j_lbar: &UniformTable, t: f64, r: f64) -> Result<f64> {
    let need = r - t;
    if need < j_lbar.lo() {
        return Err(MkgError::Coverage {
            lo: j_lbar.lo(),
            hi: j_lbar.hi(),
            need_lo: need,
            need_hi: j_lbar.hi(),
        });
    }
    if j_lbar.values.iter().all(|&v| v == 0.0) {
        return Ok(a_lbar);
    }
    let stride = ((1.0 / j_lbar.dq).round() as usize).max(1);
    let breaks: Vec<f64> = j_lbar.nodes().into_iter().step_by(stride).collect();
    let c = log_kernel_correction(|x| j_lbar.eval(x), j_lbar.lo(), j_lbar.hi(), &breaks, t, r, 1e-10)?;
    Ok(a_lbar - c)
}

/// Outputs of the radiation extraction on the `q` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiationTable {
    pub q_grid: Vec<f64>,
    pub phi0: Vec<Complex64>,
    pub dphi0_dq: Vec<Complex64>,
    pub j_lbar_asym: Vec<f64>,
    /// `Q/4π`, the limit `r A_L` is compared with.
    pub a_l_limit: f64,
    /// `|r A_L - Q/4π|` at the final slice.
    pub a_l_limit_err: Vec<f64>,
    /// `r A_L̄^mod` at the final slice.
    pub a_lbar_mod_limit: Vec<f64>,
    /// `|Φ₀(t_last) - Φ₀(t_prev)|`.
    pub phi0_err: Vec<f64>,
}

impl RadiationTable {
    /// Largest violation of `𝒥_L̄ = -2 Im(Φ₀ conj ∂_qΦ₀)`.
    pub fn identity_defect(&self) -> f64 {
        self.phi0
            .iter()
            .zip(&self.dphi0_dq)
            .zip(&self.j_lbar_asym)
            .map(|((p, d), j)| (j + 2.0 * (p * d.conj()).im).abs())
            .fold(0.0, f64::max)
    }

    pub fn dq(&self) -> f64 {
        if self.q_grid.len() > 1 {
            self.q_grid[1] - self.q_grid[0]
        } else {
            1.0
        }
    }

    pub fn j_table(&self) -> UniformTable {
        UniformTable {
            q0: self.q_grid[0],
            dq: self.dq(),
            values: self.j_lbar_asym.clone(),
        }
    }

    /// `j(q) = Im(Φ₀ conj ∂_qΦ₀) = -𝒥_L̄/2`.
    pub fn j_scalar(&self) -> UniformTable {
        UniformTable {
            q0: self.q_grid[0],
            dq: self.dq(),
            values: self.j_lbar_asym.iter().map(|v| -0.5 * v).collect(),
        }
    }
}

/// Values along `r = t + q` on a slice, phase-corrected.
fn slice_phi0(state: &FieldState, grid: &RadialGrid, q_grid: &[f64], q: ChargeValue) -> Result<Vec<Complex64>> {
    q_grid
        .iter()
        .map(|&qq| {
            let r = state.t + qq;
            if r < 0.0 || r > grid.r_max {
                return Err(MkgError::OutOfDomain { r, r_max: grid.r_max });
            }
            let phi = crate::field::interp_cubic(&state.phi, grid.h, r, Parity::Even);
            Ok(phi * r * charge_phase(q, r))
        })
        .collect()
}

/// Builds the table from the final slice and an earlier one (for error
/// bars), with the charge-tail subtraction applied for `A¹`.
pub fn build_radiation_table(
    last: &FieldState,
    prev: &FieldState,
    grid: &RadialGrid,
    q_grid: &[f64],
    charge: ChargeValue,
) -> Result<RadiationTable> {
    let phi0 = slice_phi0(last, grid, q_grid, charge)?;
    let phi_prev = slice_phi0(prev, grid, q_grid, charge)?;
    let dq = if q_grid.len() > 1 { q_grid[1] - q_grid[0] } else { 1.0 };
    let dphi0_dq = dq_derivative(&phi0, dq);
    let j_lbar_asym: Vec<f64> = phi0.iter().zip(&dphi0_dq).map(|(p, d)| -2.0 * (p * d.conj()).im).collect();
    let table = UniformTable {
        q0: q_grid[0],
        dq,
        values: j_lbar_asym.clone(),
    };
    let target = charge.coulomb();
    let mut a_l_limit_err = Vec::with_capacity(q_grid.len());
    let mut a_lbar_mod_limit = Vec::with_capacity(q_grid.len());
    for &qq in q_grid {
        let r = last.t + qq;
        let f = crate::field::null_decompose(last, grid, r)?;
        a_l_limit_err.push((r * f.a_l - target).abs());
        a_lbar_mod_limit.push(r * mod_albar(f.a_lbar, &table, last.t, r)?);
    }
    let phi0_err = phi0.iter().zip(&phi_prev).map(|(a, b)| (a - b).norm()).collect();
    Ok(RadiationTable {
        q_grid: q_grid.to_vec(),
        phi0,
        dphi0_dq,
        j_lbar_asym,
        a_l_limit: target,
        a_l_limit_err,
        a_lbar_mod_limit,
        phi0_err,
    })
}

/// `r A¹_L̄` along a ray, i.e. `r A_L̄ - χ(q) Q/4π`.
pub fn r_albar_one(ray: &RaySample, q: ChargeValue, chi: &CutoffChi) -> Vec<f64> {
    ray.points
        .iter()
        .map(|p| p.r * p.frame.a_lbar - chi.eval(p.r - p.t) * q.coulomb())
        .collect()
}

/// Residual of `L(r L̄(rA_L)) + L(rA¹_L̄) = r² J_L` along a ray.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameIdentity {
    pub sup: f64,
    pub points: Vec<(f64, f64)>,
}

/// `L` is the derivative along the outgoing ray and is formed by centered
/// time differences of the samples.
pub fn frame_identity_residual(ray: &RaySample, q: ChargeValue, chi: &CutoffChi) -> Result<FrameIdentity> {
    let n = ray.points.len();
    if n < 3 {
        return Err(MkgError::StencilStarvation(format!(
            "ray q = {} has {n} samples, centered differences need 3",
            ray.q
        )));
    }
    let tau = ray.points[1].t - ray.points[0].t;
    if !(tau > 0.0) {
        return Err(MkgError::StencilStarvation("ray samples are not ordered in time".into()));
    }
    for w in ray.points.windows(2) {
        if ((w[1].t - w[0].t) - tau).abs() > 1e-9 * tau.max(1.0) {
            return Err(MkgError::StencilStarvation(format!(
                "ray q = {} is not uniformly sampled (gap {} vs {tau})",
                ray.q,
                w[1].t - w[0].t
            )));
        }
    }
    let y = r_albar_one(ray, q, chi);
    let mut points = Vec::with_capacity(n - 2);
    let mut sup = 0.0f64;
    for k in 1..n - 1 {
        let p = &ray.points;
        let lx = (p[k + 1].r_lbar_ral - p[k - 1].r_lbar_ral) / (2.0 * tau);
        let ly = (y[k + 1] - y[k - 1]) / (2.0 * tau);
        let res = (lx + ly - p[k].r2_jl).abs();
        sup = sup.max(res);
        points.push((p[k].t, res));
    }
    Ok(FrameIdentity { sup, points })
}

/// Quantity an envelope is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnvelopeQuantity {
    PhiModulus,
    J0,
}

/// Envelope `⟨t+r⟩^a ⟨t-r⟩^b ⟨(r-t)₊⟩^c S⁰(t,r)^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl WeightSpec {
    /// `|φ| ≲ ⟨t+r⟩^{-1} ⟨t-r⟩^{1/2-s} ⟨(r-t)₊⟩^{-γ}`.
    pub fn phi_decay(w: &Weights) -> Self {
        WeightSpec {
            a: -1.0,
            b: 0.5 - w.s,
            c: -w.gamma,
            d: 0.0,
        }
    }

    /// `|J| ≲ ⟨t+r⟩^{-2} ⟨t-r⟩^{-2s} ⟨(r-t)₊⟩^{-2γ}`.
    pub fn current_decay(w: &Weights) -> Self {
        WeightSpec {
            a: -2.0,
            b: -2.0 * w.s,
            c: -2.0 * w.gamma,
            d: 0.0,
        }
    }

    pub fn envelope(&self, t: f64, r: f64) -> Result<f64> {
        let mut e = 1.0;
        if self.a != 0.0 {
            e *= jbracket(t + r).powf(self.a);
        }
        if self.b != 0.0 {
            e *= jbracket(t - r).powf(self.b);
        }
        if self.c != 0.0 {
            e *= jbracket((r - t).max(0.0)).powf(self.c);
        }
        if self.d != 0.0 {
            e *= s0_weight(t, r)?.powf(self.d);
        }
        Ok(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeResult {
    pub sup: f64,
    pub t: f64,
    pub r: f64,
}

/// `sup |value| / envelope(t, r)` over `(t, r, value)` samples.
pub fn envelope_check(samples: &[(f64, f64, f64)], spec: &WeightSpec) -> Result<EnvelopeResult> {
    let mut best = EnvelopeResult {
        sup: 0.0,
        t: 0.0,
        r: 0.0,
    };
    for &(t, r, v) in samples {
        if v == 0.0 {
            continue;
        }
        let ratio = v.abs() / spec.envelope(t, r)?;
        if ratio > best.sup {
            best = EnvelopeResult { sup: ratio, t, r };
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::RayPoint;
    use crate::field::NullFrameSample;

    fn synthetic_ray(f: impl Fn(f64) -> Complex64) -> RaySample {
        let points = (0..200)
            .map(|k| {
                let t = 10.0 + k as f64;
                let r = t + 1.0;
                RayPoint {
                    t,
                    r,
                    frame: NullFrameSample::from_potential(t, r, 0.0, 0.0),
                    phi: f(r) / r,
                    rphi: f(r),
                    r_lbar_ral: 0.0,
                    r2_jl: 0.0,
                }
            })
            .collect();
        RaySample {
            q: 1.0,
            points,
            truncated: false,
        }
    }

    #[test]
    fn exact_phase_slope() {
        let ray = synthetic_ray(|r| Complex64::from_polar(2.0, -0.3 * r.ln_1p()));
        let fit = phase_slope_fit(&ray).unwrap();
        assert!((fit.slope + 0.3).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn j_asym_of_rotating_profile() {
        let dq = 1e-3;
        let q: Vec<f64> = (0..2001).map(|i| -1.0 + i as f64 * dq).collect();
        let phi: Vec<Complex64> = q.iter().map(|&x| Complex64::from_polar((-x * x).exp(), x)).collect();
        let j = compute_j_asym(&phi, dq);
        for i in 1..q.len() - 1 {
            let f2 = (-2.0 * q[i] * q[i]).exp();
            assert!((j[i] - 2.0 * f2).abs() < 1e-5);
        }
        let real: Vec<Complex64> = q.iter().map(|&x| Complex64::new(x.sin(), 0.0)).collect();
        assert!(compute_j_asym(&real, dq).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn indicator_log_kernel_closed_form() {
        let (t, r) = (10.0, 4.0);
        let a = t + r;
        let b = t - r;
        let anti = |e: f64| (e + a) * (e + a).ln() - (e + b) * (e + b).ln();
        let exact = (anti(1.0) - anti(0.0)) / (2.0 * r);
        let got = log_kernel_correction(|_| 1.0, 0.0, 1.0, &[], t, r, 1e-13).unwrap();
        assert!((got - exact).abs() < 1e-11, "{got} vs {exact}");
    }

    #[test]
    fn singular_endpoint_inside_support() {
        // r - t = 0.25 lies in the support [0, 1]
        let (t, r) = (3.0, 3.25);
        let a = t + r;
        let b = t - r;
        let xlnx = |x: f64| if x == 0.0 { 0.0 } else { x * x.ln() };
        let anti = |e: f64| xlnx(e + a) - xlnx(e + b);
        let exact = (anti(1.0) - anti(0.25)) / (2.0 * r);
        let got = log_kernel_correction(|_| 1.0, 0.0, 1.0, &[], t, r, 1e-12).unwrap();
        assert!((got - exact).abs() < 1e-10, "{got} vs {exact}");
    }

    #[test]
    fn envelope_identity() {
        let w = Weights::new(0.9, 0.4).unwrap();
        let spec = WeightSpec::phi_decay(&w);
        let samples: Vec<(f64, f64, f64)> = (1..50)
            .map(|k| {
                let (t, r) = (k as f64, 0.5 * k as f64 + 3.0);
                (t, r, spec.envelope(t, r).unwrap())
            })
            .collect();
        let res = envelope_check(&samples, &spec).unwrap();
        assert!((res.sup - 1.0).abs() < 1e-14);
        assert_eq!(envelope_check(&[(1.0, 1.0, 0.0)], &spec).unwrap().sup, 0.0);
    }

    #[test]
    fn unwrap_detects_aliasing() {
        let v = vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.1)];
        assert!(matches!(unwrap_phase(&v), Err(MkgError::Undersampled { .. })));
    }

    #[test]
    fn non_cauchy_sequence_is_flagged() {
        let w = Weights::new(0.9, 0.4).unwrap();
        let vals = [1.0, 1.1, 1.15, 1.4];
        let tr = [1.0, 2.0, 4.0, 8.0];
        assert!(matches!(
            estimate(&vals, &tr, tr.to_vec(), &w, f64::abs),
            Err(MkgError::NoLimit(_))
        ));
    }
}
