use mkg_core::asymptotic::{integrate_with, AsymState, PhaseRhs, MODULUS_TOL};
use mkg_core::config::parse_config;
use mkg_core::data::{build_initial, ComplexProfile, FreeData, Profile};
use mkg_core::evolution::monitors::{charge_monitor, gauss_residual, lorenz_residual};
use mkg_core::field::{field_strength, gauge_transform, jbracket, null_decompose, s0_weight, GaugeJet};
use mkg_core::interior::{angular_kernel_integral, eval_a_ex_infty, k_mu, sphere_integral, AsymSource};
use mkg_core::oracle::{dalembert_free, kirchhoff_eval, positivity_min, Radial, RadialSource};
use mkg_core::report::{fmt_f64, parse_f64, CsvTable};
use mkg_core::{NullFrameSample, RadialGrid};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit(theta: f64, phi: f64) -> [f64; 3] {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn frame_round_trip(a0 in -1e3f64..1e3, ar in -1e3f64..1e3, r in 0.1f64..1e4) {
        let s = NullFrameSample::from_potential(1.0, r, a0, ar);
        let (b0, br) = s.potential();
        let scale = a0.abs().max(ar.abs()).max(1e-300);
        prop_assert!((b0 - a0).abs() <= 4.0 * f64::EPSILON * scale);
        prop_assert!((br - ar).abs() <= 4.0 * f64::EPSILON * scale);
    }

    #[test]
    fn jbracket_even_and_increasing(x in 0.0f64..1e6, dx in 1e-3f64..10.0) {
        prop_assert_eq!(jbracket(x), jbracket(-x));
        prop_assert!(jbracket(x + dx) > jbracket(x));
        prop_assert!(jbracket(x) >= 1.0);
    }

    #[test]
    fn s0_below_power_bound(t in 1e-3f64..1e6, frac in 1e-6f64..1.0) {
        let r = t * frac;
        let s0 = s0_weight(t, r).unwrap();
        for eps in [0.05, 0.1, 0.5] {
            let bound = (jbracket(t + r) / jbracket(t - r)).powf(eps) / eps;
            prop_assert!(s0 <= bound * (1.0 + 1e-12), "t={} r={} eps={} s0={} bound={}", t, r, eps, s0, bound);
        }
    }

    #[test]
    fn angint_matches_sphere_quadrature(a in 0.5f64..5.0, ratio in 0.0f64..0.99) {
        let x = a * ratio;
        let closed = angular_kernel_integral(a, x).unwrap();
        let num = sphere_integral(|w| 1.0 / (a - x * w[2]), 1e-11).unwrap().value;
        prop_assert!((closed - num).abs() <= 1e-8 * closed.abs(), "a={} x={} {} vs {}", a, x, closed, num);
    }

    #[test]
    fn a_ex_infty_homogeneous(t in 1.0f64..1e3, c in 0.0f64..0.95, th in 0.0f64..std::f64::consts::PI, ph in 0.0f64..std::f64::consts::TAU, lam in 0.1f64..100.0) {
        let src = AsymSource::from_fn(-5.0, 5.0, 0.05, |q| (-q * q).exp());
        let w = unit(th, ph);
        let x = w.map(|v| v * c * t);
        let a = eval_a_ex_infty(t, x, &src).unwrap();
        let b = eval_a_ex_infty(lam * t, x.map(|v| v * lam), &src).unwrap();
        for k in 0..4 {
            prop_assert!((b[k] * lam - a[k]).abs() <= 1e-12 * a[0].abs().max(1e-300));
        }
    }

    #[test]
    fn source_frame_defect_vanishes(th in 0.0f64..std::f64::consts::PI, ph in 0.0f64..std::f64::consts::TAU) {
        let src = AsymSource::from_fn(-5.0, 5.0, 0.05, |q| (-q * q).exp() * (1.0 + 0.3 * q));
        prop_assert!(src.frame_defect(unit(th, ph)) <= 1e-15);
    }

    #[test]
    fn float_text_round_trip(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        let back = parse_f64(&fmt_f64(x)).unwrap();
        if x.is_nan() {
            prop_assert!(back.is_nan());
        } else {
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }

    #[test]
    fn csv_round_trip(rows in proptest::collection::vec(proptest::collection::vec(-1e300f64..1e300, 3), 0..20)) {
        let mut t = CsvTable::new("h", &["a", "b", "c"]);
        for r in &rows {
            t.push(r.clone());
        }
        let back = CsvTable::parse(&t.render()).unwrap();
        prop_assert_eq!(back, t);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn modulus_and_b_l_preserved(amp in 0.1f64..2.0, al in -3.0f64..3.0, th in 0.0f64..std::f64::consts::PI, ph in 0.0f64..std::f64::consts::TAU) {
        let w = unit(th, ph);
        let st = AsymState::from_profile(-8.0, 8.0, 320, |q| {
            Complex64::new(0.0, amp * q).exp() * (-q * q).exp() * amp
        }, al, w).unwrap();
        let out = integrate_with(&st, 5.0, 0.01, PhaseRhs::Null).unwrap();
        // RK4 amplification on the imaginary axis is 1 - z⁶/144
        let z = al.abs() * 0.01;
        let bound = 2.0 * 500.0 * z.powi(6) / 144.0 * amp + MODULUS_TOL * amp;
        for (a, b) in st.p.iter().zip(&out.p) {
            prop_assert!((a.norm() - b.norm()).abs() <= bound);
        }
        let l = [1.0, w[0], w[1], w[2]];
        for b in &out.b_mu {
            let bl: f64 = (0..4).map(|k| l[k] * b[k]).sum();
            let size = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            // rounding accumulates over the 500 steps
            prop_assert!(bl.abs() <= 1e-12 * size.max(1e-300), "{} {}", bl, size);
        }
    }

    #[test]
    fn constraints_and_charge(amp in 0.001f64..0.05, w1 in 0.6f64..2.0, w2 in 0.6f64..2.0, ar_amp in 0.0f64..0.01) {
        let data = FreeData {
            phi0: ComplexProfile::real(Profile::Gaussian { width: w1, scale: amp }),
            phi0_dot: ComplexProfile::imaginary(Profile::Gaussian { width: w2, scale: amp }),
            ar0: Profile::PolyGaussian { power: 1, width: 1.5, scale: ar_amp },
            ar0_dot: Profile::Zero,
        };
        let grid = RadialGrid::new(40.0, 800).unwrap();
        let init = build_initial(&data, &grid, 0.5, 1e-6).unwrap();
        let scale = init.state.sup_norm().max(1e-300);
        prop_assert!(lorenz_residual(&init.state, &grid) <= 1e-12 * scale);
        let q_mon = charge_monitor(&init.state, &grid);
        prop_assert!((q_mon - init.charge.q).abs() <= 1e-6 * init.charge.q.abs() + 1e-12);
        // Gauss residual is a discretisation error: square of the spacing
        prop_assert!(gauss_residual(&init.state, &grid) <= 50.0 * grid.h * grid.h * amp * amp);
    }

    #[test]
    fn oracles_agree_on_mixtures(a1 in -1.0f64..1.0, w1 in 0.5f64..2.0, a2 in -1.0f64..1.0, w2 in 0.5f64..2.0, t in 0.1f64..6.0, r in 0.1f64..8.0) {
        let g = Radial::mixture(&[(a1, w1), (a2, w2)]);
        let h = Radial::mixture(&[(a2, w1)]);
        let d = dalembert_free(&g, &h, t, r).unwrap();
        let k = kirchhoff_eval(&g, &h, t, r).unwrap();
        prop_assert!((d - k).abs() <= 1e-9 * (1.0 + d.abs()), "{} vs {}", d, k);
    }
}

#[test]
fn s0_bound_on_ten_thousand_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10_000 {
        let t = 10f64.powf(rng.gen_range(-3.0..6.0));
        let r = t * rng.gen_range(1e-9..=1.0);
        let s0 = s0_weight(t, r).unwrap();
        for eps in [0.05, 0.1, 0.5] {
            let bound = (jbracket(t + r) / jbracket(t - r)).powf(eps) / eps;
            assert!(s0 <= bound * (1.0 + 1e-12), "t={t} r={r} eps={eps}");
        }
    }
}

#[test]
fn grid_state_frame_round_trip() {
    let grid = RadialGrid::new(20.0, 400).unwrap();
    let init = build_initial(&FreeData::reference(0.1), &grid, 0.5, 1e-6).unwrap();
    for i in [1usize, 10, 57, 200, 399] {
        let r = grid.r(i);
        let s = null_decompose(&init.state, &grid, r).unwrap();
        let (a0, ar) = s.potential();
        assert!((a0 - init.state.a0[i]).abs() <= 1e-15 * init.state.a0[i].abs().max(1e-300));
        assert!((ar - init.state.ar[i]).abs() <= 1e-15 + 1e-15 * init.state.ar[i].abs());
    }
}

#[test]
fn k0_strictly_monotone_in_radius() {
    let src = AsymSource::from_fn(-5.0, 5.0, 0.02, |q| (-q * q).exp());
    let mut prev = f64::INFINITY;
    for k in 0..50 {
        let c = k as f64 * 0.019;
        let k0 = k_mu([0.0, 0.0, c], &src).unwrap()[0];
        // positive mass: K0 is negative and decreases with |y|
        assert!(k0 < prev, "c={c}: {k0} vs {prev}");
        prev = k0;
    }
}

/// Outgoing spherical packet `ψ = ∫ k² e^{-k²} sinc(kr) cos(kt) dk`, a solution
/// of the free wave equation that is smooth at the origin.
fn packet(amp: f64, t0: f64) -> impl Fn(f64, f64) -> GaugeJet + Copy {
    move |t: f64, r: f64| {
        let t = t + t0;
        let (x, w) = mkg_core::quad::gauss_legendre(64);
        let mut g = GaugeJet::default();
        let kmax = 6.0;
        for (xi, wi) in x.iter().zip(&w) {
            let k = 0.5 * kmax * (xi + 1.0);
            let a = amp * 0.5 * kmax * wi * k * k * (-k * k).exp();
            let kr = k * r;
            let (s, ds) = if kr < 1e-4 {
                (1.0 - kr * kr / 6.0, -k * kr / 3.0)
            } else {
                (kr.sin() / kr, (kr * kr.cos() - kr.sin()) / (kr * r))
            };
            let (c, sn) = ((k * t).cos(), (k * t).sin());
            g.psi += a * s * c;
            g.psi_t += -a * k * s * sn;
            g.psi_tt += -a * k * k * s * c;
            g.psi_r += a * ds * c;
            g.psi_tr += -a * k * ds * sn;
        }
        g
    }
}

#[test]
fn gauge_invariance_second_order() {
    let mut errs = Vec::new();
    for n in [400usize, 800, 1600] {
        let grid = RadialGrid::new(20.0, n).unwrap();
        let init = build_initial(&FreeData::reference(0.1), &grid, 0.5, 1e-6).unwrap();
        let g = gauge_transform(&init.state, &grid, packet(0.5, 1.5));
        let e0 = field_strength(&init.state, &grid);
        let e1 = field_strength(&g, &grid);
        let mut de = 0.0f64;
        let mut dphi = 0.0f64;
        for i in 0..grid.len() {
            de = de.max((e0[i] - e1[i]).abs());
            dphi = dphi.max((init.state.phi[i].norm() - g.phi[i].norm()).abs());
        }
        assert!(dphi <= 1e-15);
        errs.push(de);
    }
    for k in 0..2 {
        let order = (errs[k] / errs[k + 1]).log2();
        assert!(order >= 1.8, "errors {errs:?}");
    }
}

#[test]
fn positivity_for_random_nonnegative_sources() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..3 {
        let a: f64 = rng.gen_range(0.1..1.0);
        let c: f64 = rng.gen_range(0.5..2.0);
        let f = RadialSource::new(move |t, r| a * (-(t - c).powi(2) - r * r).exp(), 0.0, 0.0);
        let pts: Vec<(f64, f64)> = (1..5).flat_map(|i| (1..4).map(move |j| (i as f64, j as f64 * 0.7))).collect();
        assert!(positivity_min(&f, &pts).unwrap() >= 0.0);
    }
}

#[test]
fn config_hash_ignores_formatting() {
    let a = parse_config("[grid]\nr_max = 400\nn_cells = 8000\n[scheme]\ncfl = 0.5\n").unwrap();
    let b = parse_config("# comment\n[scheme]\n  cfl=5e-1   ; trailing\n\n[grid]\nn_cells = 8000\nr_max = 4.0e2\n").unwrap();
    assert_eq!(a.hash(), b.hash());
    let c = parse_config("[grid]\nr_max = 400\nn_cells = 8000\n[scheme]\ncfl = 0.4\n").unwrap();
    assert_ne!(a.hash(), c.hash());
}
