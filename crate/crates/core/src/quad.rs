//! Quadrature rules shared by the data builder, the extraction module and
//! the reference solvers.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{MkgError, Result};

/// Composite Simpson rule on uniformly spaced samples.
///
/// An odd number of intervals is closed with Simpson's 3/8 rule on the last
/// three intervals.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * h * (values[0] + values[1]),
        3 => h / 3.0 * (values[0] + 4.0 * values[1] + values[2]),
        _ => {
            let intervals = n - 1;
            let (even_end, tail) = if intervals.is_multiple_of(2) {
                (n - 1, 0.0)
            } else {
                let k = n - 4;
                let tail = 3.0 * h / 8.0 * (values[k] + 3.0 * values[k + 1] + 3.0 * values[k + 2] + values[k + 3]);
                (n - 4, tail)
            };
            let mut acc = values[0] + values[even_end];
            for (i, v) in values.iter().enumerate().take(even_end).skip(1) {
                acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            acc * h / 3.0 + tail
        }
    }
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One 15-point Gauss–Kronrod panel. Returns (kronrod estimate, |K - G|).
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = half * XGK[j];
        let s = f(center - x) + f(center + x);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

/// Tolerances for [`adaptive`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadTol {
    pub abs: f64,
    pub rel: f64,
    pub max_panels: usize,
}

impl Default for QuadTol {
    fn default() -> Self {
        QuadTol {
            abs: 1e-10,
            rel: 1e-10,
            max_panels: 4000,
        }
    }
}

impl QuadTol {
    pub fn abs(abs: f64) -> Self {
        QuadTol {
            abs,
            rel: 0.0,
            ..Default::default()
        }
    }
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod (15 point) integration on `[a, b]`.
///
/// The panel with the largest error estimate is bisected until the summed
/// estimate meets `max(tol.abs, tol.rel * |I|)`. Hitting the panel cap is an
/// error carrying the achieved estimate.
pub fn adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: QuadTol) -> Result<Integral> {
    adaptive_with_breaks(f, &[a, b], tol)
}

/// [`adaptive`] started from the panels delimited by `breaks` (sorted).
pub fn adaptive_with_breaks<F: Fn(f64) -> f64>(f: F, breaks: &[f64], tol: QuadTol) -> Result<Integral> {
    let mut heap = BinaryHeap::new();
    let mut value = 0.0;
    let mut error = 0.0;
    for w in breaks.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let (v, e) = gk15(&f, w[0], w[1]);
        value += v;
        error += e;
        heap.push(Panel {
            a: w[0],
            b: w[1],
            value: v,
            error: e,
        });
    }
    let mut panels = heap.len();
    loop {
        let target = tol.abs.max(tol.rel * value.abs());
        if error <= target {
            return Ok(Integral { value, error, panels });
        }
        if panels >= tol.max_panels {
            return Err(MkgError::Quadrature { err: error, target });
        }
        let Some(worst) = heap.pop() else {
            return Ok(Integral { value, error, panels });
        };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // panel cannot be split further in double precision
            return Err(MkgError::Quadrature { err: error, target });
        }
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        value += v1 + v2 - worst.value;
        error += e1 + e2 - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
        panels += 1;
    }
}

/// Integral over `[a, ∞)` through the map `x = a + u / (1 - u)`.
pub fn adaptive_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, tol: QuadTol) -> Result<Integral> {
    adaptive(
        |u: f64| {
            if u >= 1.0 {
                return 0.0;
            }
            let w = 1.0 - u;
            let v = f(a + u / w) / (w * w);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        tol,
    )
}

/// `∫_0^w f(d) dd` for `f` with an integrable (e.g. logarithmic)
/// singularity at `d = 0`.
///
/// Uses `d = e^μ`, which turns `ln d` into a linear factor and adds an
/// exponentially decaying weight; the μ-range is truncated at
/// `e^μ = e^{-92} w`. The integrand receives the offset `d` itself so that
/// the singular factor can be formed without cancellation.
pub fn adaptive_left_singular<F: Fn(f64) -> f64>(f: F, w: f64, tol: QuadTol) -> Result<Integral> {
    if w <= 0.0 {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            panels: 0,
        });
    }
    let top = w.ln();
    let bottom = top - 92.0;
    let breaks = [bottom, top - 20.0, top - 6.0, top - 2.0, top];
    adaptive_with_breaks(
        |mu: f64| {
            let d = mu.exp();
            f(d) * d
        },
        &breaks,
        tol,
    )
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` (Newton iteration on P_n).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre rule: `panels` equal panels of `order` nodes.
pub fn composite_gauss<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (x, w) = gauss_legendre(order);
    let width = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let c = lo + 0.5 * width;
        let mut s = 0.0;
        for (xi, wi) in x.iter().zip(&w) {
            s += wi * f(c + 0.5 * width * xi);
        }
        acc += 0.5 * width * s;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_for_cubics() {
        let h = 0.1;
        for n in [5usize, 6, 7, 10, 11] {
            let v: Vec<f64> = (0..n).map(|i| (i as f64 * h).powi(3)).collect();
            let b = (n - 1) as f64 * h;
            assert!((simpson(&v, h) - b.powi(4) / 4.0).abs() < 1e-13, "n = {n}");
        }
    }

    #[test]
    fn gauss_legendre_weights_sum_to_two() {
        for n in [1, 2, 5, 16, 40] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            let m: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(2)).sum();
            if n >= 2 {
                assert!((m - 2.0 / 3.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn adaptive_gaussian_moment() {
        let r = adaptive_to_infinity(|x| (-x * x).exp() * x * x, 0.0, QuadTol::default()).unwrap();
        assert!((r.value - std::f64::consts::PI.sqrt() / 4.0).abs() < 1e-10);
    }

    #[test]
    fn left_singular_log() {
        // ∫_0^1 ln x dx = -1
        let r = adaptive_left_singular(|x: f64| x.ln(), 1.0, QuadTol::abs(1e-12)).unwrap();
        assert!((r.value + 1.0).abs() < 1e-11);
    }

    #[test]
    fn panel_cap_is_reported() {
        let err = adaptive(
            |x: f64| (1.0 / x).sin(),
            1e-9,
            1.0,
            QuadTol {
                abs: 1e-15,
                rel: 0.0,
                max_panels: 10,
            },
        );
        assert!(matches!(err, Err(MkgError::Quadrature { .. })));
    }
}
