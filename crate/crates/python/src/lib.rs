//! Python bindings for `lagfactor-core`.
//!
//! Panels are passed as a list of series (`p` lists of `T + 1` floats).

use lagfactor_core::simulation::{run_mc_with, McOptions};
use lagfactor_core::{
    calibrate_dt as core_calibrate, is_significant_region, k_hat as core_k_hat,
    k_tilde as core_k_tilde, k_tilde_multistep, lsd_edges as core_edges, mhat_spectrum,
    scenario_preset, spike_limit as core_spike, t_at_b_plus as core_tb, t_transform as core_t,
    AspectRatio, EstimatorConfig, FactorParams, Method, Panel, Scenario, Spectrum,
};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: lagfactor_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn ratio(y: f64) -> PyResult<AspectRatio> {
    AspectRatio::new(y).map_err(err)
}

fn spectrum(eigenvalues: Vec<f64>) -> PyResult<Spectrum> {
    Spectrum::from_eigenvalues(eigenvalues).map_err(err)
}

fn panel(series: Vec<Vec<f64>>) -> PyResult<Panel> {
    Panel::from_series(&series).map_err(err)
}

/// Support edges `(a, b)` of the noise law.
#[pyfunction]
fn lsd_edges(y: f64) -> PyResult<(f64, f64)> {
    Ok(core_edges(ratio(y)?))
}

#[pyfunction]
fn t_at_b_plus(y: f64) -> PyResult<f64> {
    Ok(core_tb(ratio(y)?))
}

#[pyfunction]
fn t_transform(z: f64, y: f64) -> PyResult<f64> {
    core_t(z, ratio(y)?).map_err(err)
}

/// Limit of a factor's eigenvalue as a dict.
#[pyfunction]
#[pyo3(signature = (gamma0, gamma1, y, sigma2 = 1.0))]
fn spike_limit<'py>(
    py: Python<'py>,
    gamma0: f64,
    gamma1: f64,
    y: f64,
    sigma2: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let params = FactorParams::new(gamma0, gamma1, sigma2).map_err(err)?;
    let r = core_spike(&params, ratio(y)?).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("t1", r.t1)?;
    out.set_item("t_b_plus", r.t_b_plus)?;
    out.set_item("significant", r.significant)?;
    out.set_item("lambda", r.lambda)?;
    out.set_item("b", r.b)?;
    out.set_item(
        "region_significant",
        is_significant_region(&params, ratio(y)?).map_err(err)?,
    )?;
    Ok(out)
}

/// Eigenvalues of `S S'` (descending) and their consecutive ratios.
#[pyfunction]
fn spectrum_of(py: Python<'_>, series: Vec<Vec<f64>>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let panel = panel(series)?;
    let s = py.detach(|| mhat_spectrum(&panel)).map_err(err)?;
    Ok((s.eigenvalues, s.ratios))
}

/// `(k, saturated)`; `require_two` gives the reinforced variant.
#[pyfunction]
#[pyo3(signature = (eigenvalues, d_t, cap = None, require_two = false))]
fn k_hat(
    eigenvalues: Vec<f64>,
    d_t: f64,
    cap: Option<usize>,
    require_two: bool,
) -> PyResult<(usize, bool)> {
    let s = spectrum(eigenvalues)?;
    let cap = cap.unwrap_or(s.len().saturating_sub(1));
    let r = core_k_hat(
        &s,
        &EstimatorConfig::new(d_t, cap, require_two).map_err(err)?,
    )
    .map_err(err)?;
    Ok((r.k, r.saturated))
}

#[pyfunction]
#[pyo3(signature = (eigenvalues, cap = None))]
fn k_tilde(eigenvalues: Vec<f64>, cap: Option<usize>) -> PyResult<usize> {
    let s = spectrum(eigenvalues)?;
    let cap = cap.unwrap_or(s.len().saturating_sub(1));
    core_k_tilde(&s, cap).map_err(err)
}

/// Per-step `(r_hat, cumulative_k)`.
#[pyfunction]
#[pyo3(signature = (series, steps = 3, cap = None))]
fn k_tilde_steps(
    py: Python<'_>,
    series: Vec<Vec<f64>>,
    steps: usize,
    cap: Option<usize>,
) -> PyResult<Vec<(usize, usize)>> {
    let panel = panel(series)?;
    let cap = cap.unwrap_or(panel.p().min(panel.t()) / 2);
    let trace = py
        .detach(|| k_tilde_multistep(&panel, steps, cap))
        .map_err(err)?;
    Ok(trace.iter().map(|s| (s.r_hat, s.cumulative_k)).collect())
}

#[pyfunction]
#[pyo3(signature = (p, t, reps = 2000, level = 0.005, seed = 0))]
fn calibrate_dt<'py>(
    py: Python<'py>,
    p: usize,
    t: usize,
    reps: usize,
    level: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let r = py
        .detach(|| core_calibrate(p, t, reps, level, seed))
        .map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("q", r.q)?;
    out.set_item("d_T", r.d_t)?;
    out.set_item("reps", r.reps)?;
    out.set_item("quantile_level", r.quantile_level)?;
    out.set_item("seed", r.seed)?;
    Ok(out)
}

/// Frequencies of a Monte-Carlo run over a preset scenario.
#[pyfunction]
#[pyo3(signature = (scenario, p, t, reps, method = "kstar", seed = 0, d_t = None, calibration_reps = 2000))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    scenario: &str,
    p: usize,
    t: usize,
    reps: usize,
    method: &str,
    seed: u64,
    d_t: Option<f64>,
    calibration_reps: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let scenario = match scenario {
        "I" => Scenario::I,
        "II" => Scenario::II,
        "III" => Scenario::III,
        "IV" => Scenario::IV,
        other => return Err(PyValueError::new_err(format!("unknown scenario {other:?}"))),
    };
    let method = match method {
        "khat" => Method::Khat,
        "kstar" => Method::Kstar,
        "ktilde" => Method::Ktilde,
        "ktilde3" => Method::Ktilde3,
        other => return Err(PyValueError::new_err(format!("unknown method {other:?}"))),
    };
    let spec = scenario_preset(scenario, p, t);
    let options = McOptions {
        d_t,
        calibration_reps,
        ..McOptions::default()
    };
    let r = py
        .detach(|| run_mc_with(&spec, reps, method, seed, &options))
        .map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("k0", r.k0)?;
    out.set_item("d_T", r.d_t)?;
    out.set_item("saturated", r.saturated)?;
    for (key, rows) in [
        ("table", &r.table),
        ("partition", &r.partition),
        ("histogram", &r.histogram),
    ] {
        let d = PyDict::new(py);
        for f in rows {
            d.set_item(&f.label, f.frequency)?;
        }
        out.set_item(key, d)?;
    }
    Ok(out)
}

#[pymodule]
fn lagfactor(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(lsd_edges, m)?)?;
    m.add_function(wrap_pyfunction!(t_at_b_plus, m)?)?;
    m.add_function(wrap_pyfunction!(t_transform, m)?)?;
    m.add_function(wrap_pyfunction!(spike_limit, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum_of, m)?)?;
    m.add_function(wrap_pyfunction!(k_hat, m)?)?;
    m.add_function(wrap_pyfunction!(k_tilde, m)?)?;
    m.add_function(wrap_pyfunction!(k_tilde_steps, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_dt, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
