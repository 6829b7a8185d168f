//! `mkg_lab`: configuration, pipeline and self-check entry points for
//! Python. Rich results cross the boundary as JSON strings.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use mkg_core::config::{load_config, parse_config};
use mkg_core::interior::{self, AsymSource};
use mkg_core::{oracle, pipeline, MkgError};

fn err(e: MkgError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Validated configuration as canonical JSON.
#[pyfunction]
fn config_json(text: &str) -> PyResult<String> {
    let c = parse_config(text).map_err(err)?;
    serde_json::to_string(&c).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pyfunction]
fn config_hash(text: &str) -> PyResult<String> {
    Ok(parse_config(text).map_err(err)?.hash())
}

/// Runs the full pipeline for a configuration file and returns report.json.
#[pyfunction]
fn run(py: Python<'_>, path: &str) -> PyResult<String> {
    let cfg = load_config(std::path::Path::new(path)).map_err(err)?;
    let rep = py.detach(|| pipeline::run_pipeline(&cfg)).map_err(err)?;
    mkg_core::report::to_json(&rep).map_err(err)
}

/// `(name, measured, tolerance, pass)` of a reference-solver self-check.
#[pyfunction]
fn oracle_case(name: &str) -> PyResult<(String, f64, f64, bool)> {
    let c = oracle::run_case(name).map_err(err)?;
    Ok((c.name, c.measured, c.tolerance, c.pass))
}

#[pyfunction]
fn oracle_cases() -> Vec<String> {
    oracle::ORACLE_CASES.iter().map(|s| s.to_string()).collect()
}

/// `∫_{S²} dS(ω) / (a - ⟨x, ω⟩)` for `|x| = x_norm < a`.
#[pyfunction]
fn angular_kernel_integral(a: f64, x_norm: f64) -> PyResult<f64> {
    interior::angular_kernel_integral(a, x_norm).map_err(err)
}

/// `K_μ(y)` for a source `j` tabulated from `q0` with spacing `dq`.
#[pyfunction]
fn k_mu(y: [f64; 3], q0: f64, dq: f64, j: Vec<f64>) -> PyResult<[f64; 4]> {
    if j.len() < 4 || !(dq > 0.0) {
        return Err(PyValueError::new_err("need at least 4 samples and dq > 0"));
    }
    let table = mkg_core::extraction::UniformTable { q0, dq, values: j };
    interior::k_mu(y, &AsymSource { j: table }).map_err(err)
}

#[pymodule]
fn mkg_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(config_json, m)?)?;
    m.add_function(wrap_pyfunction!(config_hash, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_case, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_cases, m)?)?;
    m.add_function(wrap_pyfunction!(angular_kernel_integral, m)?)?;
    m.add_function(wrap_pyfunction!(k_mu, m)?)?;
    Ok(())
}
