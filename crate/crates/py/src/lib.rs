use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use limweak::experiments;
use limweak::{AnnulusGrid, Error, Exponents, OpKind, QuadratureSpec, SphereKernel, TestFunction};

fn to_py(e: Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn setup(kernel: &str, dim: usize, alpha: f64) -> PyResult<(SphereKernel, Exponents)> {
    let k = SphereKernel::parse(kernel, dim).map_err(to_py)?;
    let e = Exponents::new(dim, alpha).map_err(to_py)?;
    Ok((k, e))
}

/// Closed-form weak norm of `|Ω(x)| / |x|^{n-α}`.
#[pyfunction]
fn homog_weak_norm_closed(kernel: &str, dim: usize, alpha: f64) -> PyResult<f64> {
    let (k, e) = setup(kernel, dim, alpha)?;
    limweak::homog_weak_norm_closed(&k, &e).map_err(to_py)
}

#[pyfunction]
fn beta_t(dim: usize, alpha: f64, rho: f64, t: f64) -> PyResult<f64> {
    let e = Exponents::new(dim, alpha).map_err(to_py)?;
    limweak::beta_t(&e, rho, t).map_err(to_py)
}

/// Applies `op` ("M", "T_abs" or "T_signed") to `f` at the point `x`.
#[pyfunction]
#[pyo3(signature = (op, kernel, f, dim, alpha, x))]
fn apply(op: &str, kernel: &str, f: &str, dim: usize, alpha: f64, x: Vec<f64>) -> PyResult<f64> {
    let (k, e) = setup(kernel, dim, alpha)?;
    let op: OpKind = op.parse().map_err(to_py)?;
    let f = TestFunction::parse(f, dim).map_err(to_py)?;
    limweak::operators::apply_at(op, &k, &e, &f, &x, &QuadratureSpec::default()).map_err(to_py)
}

#[pyfunction]
fn identity_check<'py>(
    py: Python<'py>,
    kernel: &str,
    dim: usize,
    alpha: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let (k, e) = setup(kernel, dim, alpha)?;
    let grid = AnnulusGrid::for_identity(dim).map_err(to_py)?;
    let rep = py
        .detach(|| experiments::identity_check(&k, &e, &grid))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("closed_form", rep.closed_form)?;
    d.set_item("numeric", rep.numeric)?;
    d.set_item("rel_err", rep.rel_err)?;
    d.set_item("level_values", rep.level_values)?;
    Ok(d)
}

/// `D(t)` along `t_schedule`, with the matching `β_t` and rate bounds.
#[pyfunction]
#[pyo3(signature = (op, kernel, f, dim, alpha, rho, t_schedule, grid_res=128, rmax_mult=64.0))]
#[allow(clippy::too_many_arguments)]
fn limit_run<'py>(
    py: Python<'py>,
    op: &str,
    kernel: &str,
    f: &str,
    dim: usize,
    alpha: f64,
    rho: f64,
    t_schedule: Vec<f64>,
    grid_res: usize,
    rmax_mult: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let (k, e) = setup(kernel, dim, alpha)?;
    let op: OpKind = op.parse().map_err(to_py)?;
    let f = TestFunction::parse(f, dim).map_err(to_py)?;
    let grid = AnnulusGrid::for_limit(dim, rho, grid_res, rmax_mult).map_err(to_py)?;
    let quad = QuadratureSpec::default();
    let run = py
        .detach(|| experiments::limit_run(op, &k, &e, &f, rho, &t_schedule, &grid, &quad))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("t", run.t_schedule.clone())?;
    d.set_item("D", run.metrics.clone())?;
    d.set_item("beta", run.betas.clone())?;
    d.set_item("bound", run.bounds.clone())?;
    d.set_item("slope", run.slope)?;
    d.set_item("tail_cert", run.tail_certificates.clone())?;
    Ok(d)
}

/// Runs the command-line front end; returns its exit code.
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> i32 {
    let mut argv = vec!["limweak".to_string()];
    argv.extend(args);
    py.detach(|| limweak::cli::run_cli(argv))
}

#[pymodule]
fn pylimweak(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(homog_weak_norm_closed, m)?)?;
    m.add_function(wrap_pyfunction!(beta_t, m)?)?;
    m.add_function(wrap_pyfunction!(apply, m)?)?;
    m.add_function(wrap_pyfunction!(identity_check, m)?)?;
    m.add_function(wrap_pyfunction!(limit_run, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
