use mkg_core::data::{build_initial, FreeData};
use mkg_core::evolution::{evolve_with, Boundary, SchemeParams};
use mkg_core::field::{gauge_transform, GaugeJet};
use mkg_core::{FieldState, RadialGrid};

fn run(data: &FreeData, n: usize, cfl: f64, t_end: f64, gauge: Option<fn(f64, f64) -> GaugeJet>) -> (FieldState, RadialGrid) {
    let grid = RadialGrid::new(30.0, n).unwrap();
    let mut init = build_initial(data, &grid, 0.5, 1e-6).unwrap().state;
    if let Some(g) = gauge {
        init = gauge_transform(&init, &grid, g);
    }
    let scheme = SchemeParams::new(cfl, t_end, Boundary::None, 10, &grid).unwrap();
    (evolve_with(&init, &grid, &scheme, None, &mut []).unwrap(), grid)
}

/// Free spherical wave `∫ k² e^{-k²} sinc(kr) cos(k(t+1)) dk`.
fn packet(t: f64, r: f64) -> GaugeJet {
    let (x, w) = mkg_core::quad::gauss_legendre(64);
    let t = t + 1.0;
    let kmax = 6.0;
    let mut g = GaugeJet::default();
    for (xi, wi) in x.iter().zip(&w) {
        let k = 0.5 * kmax * (xi + 1.0);
        let a = 0.3 * 0.5 * kmax * wi * k * k * (-k * k).exp();
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

fn sup_diff(a: &FieldState, b: &FieldState) -> f64 {
    let mut d = 0.0f64;
    for i in 0..a.len() {
        d = d
            .max((a.phi[i] - b.phi[i]).norm())
            .max((a.a0[i] - b.a0[i]).abs())
            .max((a.ar[i] - b.ar[i]).abs());
    }
    d
}

#[test]
fn discrete_gauge_covariance_is_second_order() {
    let data = FreeData::reference(0.2);
    let mut errs = Vec::new();
    for n in [300usize, 600, 1200] {
        let (plain, grid) = run(&data, n, 0.5, 4.0, None);
        let (gauged, _) = run(&data, n, 0.5, 4.0, Some(packet));
        let expected = gauge_transform(&plain, &grid, packet);
        errs.push(sup_diff(&gauged, &expected));
    }
    for k in 0..2 {
        let order = (errs[k] / errs[k + 1]).log2();
        assert!(order >= 1.8, "errors {errs:?}");
    }
}

#[test]
fn halving_cfl_changes_less_than_spatial_error() {
    let data = FreeData::reference(0.2);
    let (a, _) = run(&data, 600, 0.5, 6.0, None);
    let (b, _) = run(&data, 600, 0.25, 6.0, None);
    let (fine, _) = run(&data, 1200, 0.25, 6.0, None);
    let coarse_nodes = |s: &FieldState| FieldState {
        t: s.t,
        phi: s.phi.iter().step_by(2).copied().collect(),
        phi_t: s.phi_t.iter().step_by(2).copied().collect(),
        a0: s.a0.iter().step_by(2).copied().collect(),
        a0_t: s.a0_t.iter().step_by(2).copied().collect(),
        ar: s.ar.iter().step_by(2).copied().collect(),
        ar_t: s.ar_t.iter().step_by(2).copied().collect(),
    };
    let temporal = sup_diff(&a, &b);
    let spatial = sup_diff(&b, &coarse_nodes(&fine));
    assert!(temporal < spatial, "temporal {temporal} spatial {spatial}");
}

#[test]
fn zero_data_stays_zero() {
    let (s, _) = run(&FreeData::zero(), 200, 0.5, 10.0, None);
    assert_eq!(s.sup_norm(), 0.0);
}
