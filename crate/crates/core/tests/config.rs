use std::fs;

use mkg_core::config::{load_config, parse_config, RunConfig};
use mkg_core::data::Profile;
use mkg_core::MkgError;

#[test]
fn table_profile_resolves_relative_to_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    fs::create_dir(tmp.path().join("sub")).unwrap();
    fs::write(tmp.path().join("sub/phi.txt"), "# r value\n0 1\n1 0.5\n2 0\n").unwrap();
    fs::write(
        tmp.path().join("sub/run.ini"),
        "[data]\nphi0_re = table path=phi.txt scale=2\n[output]\ndir = here\n",
    )
    .unwrap();
    let cfg = load_config(&tmp.path().join("sub/run.ini")).unwrap();
    match &cfg.data.phi0_re {
        Profile::Table { r, value, scale } => {
            assert_eq!(r, &vec![0.0, 1.0, 2.0]);
            assert_eq!(value, &vec![1.0, 0.5, 0.0]);
            assert_eq!(*scale, 2.0);
        }
        p => panic!("{p:?}"),
    }
    assert_eq!(cfg.data.phi0_re.eval(0.5), 1.5);
    assert_eq!(cfg.output.dir, tmp.path().join("sub/here"));
}

#[test]
fn missing_table_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("run.ini"), "[data]\nphi0_re = table path=nope.txt scale=1\n").unwrap();
    let e = load_config(&tmp.path().join("run.ini")).unwrap_err();
    assert!(matches!(e, MkgError::Config(_)), "{e:?}");
}

#[test]
fn every_violation_is_reported_at_once() {
    let e = parse_config("[weights]\ns = 0.4\ngamma = -1\n[scheme]\ncfl = 0\n[grid]\nn_cells = 3\n")
        .unwrap_err()
        .to_string();
    for needle in ["s = 0.4", "gamma", "cfl", "n_cells"] {
        assert!(e.contains(needle), "{needle} missing from {e}");
    }
}

#[test]
fn parse_errors_carry_line_numbers() {
    let cases = [
        ("[grid]\nr_max 100\n", "line 2"),
        ("[grid]\n\n\nr_max = abc\n", "line 4"),
        ("[grid\n", "line 1"),
        ("r_max = 1\n", "line 1"),
        ("[grid]\nn_cells = 400\n[grid]\nn_cells = 800\n", "line 3"),
    ];
    for (text, want) in cases {
        let e = parse_config(text).unwrap_err().to_string();
        assert!(e.contains(want), "{text:?}: {e}");
    }
}

#[test]
fn defaults_are_the_reference_setup() {
    let c = RunConfig::default();
    assert_eq!(c.grid.r_max, 400.0);
    assert_eq!(c.grid.n_cells, 8000);
    assert_eq!(c.scheme.t_end, 320.0);
    assert_eq!(c.data.amplitude, 0.01);
    assert!(c.validate().is_ok());
}
