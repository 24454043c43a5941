//! Python module `rwre_lab`. Models are passed as JSON strings in the same
//! format the `rwre-lab` CLI reads.

use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rwre_core::bounds::{self, TwoVertexParams};
use rwre_core::cluster;
use rwre_core::env::validate_model;
use rwre_core::oracle::{self, FiniteWindow};
use rwre_core::walk;
use rwre_core::{Color, ModelSpec, Point, SiteDistribution, TransitionVector};

fn value_error<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_spec(spec_json: &str) -> PyResult<ModelSpec> {
    serde_json::from_str(spec_json).map_err(value_error)
}

/// Bounds for the two-vertex model; returns a dict with `m`, `lhs`,
/// `criterion_holds`, `lower`, `upper`, `alpha` and `annealed_drift`.
#[pyfunction]
fn kalikow_bounds<'py>(py: Python<'py>, p: f64, b: [f64; 4], r: [f64; 4]) -> PyResult<Bound<'py, PyDict>> {
    let params = TwoVertexParams::new(p, b, r).map_err(value_error)?;
    let rep = bounds::bound_report(&params).map_err(value_error)?;
    let d = PyDict::new(py);
    d.set_item("m", rep.m)?;
    d.set_item("lhs", rep.lhs)?;
    d.set_item("criterion_holds", rep.criterion_holds)?;
    d.set_item("lower", rep.lower)?;
    d.set_item("upper", rep.upper)?;
    d.set_item("alpha", rep.alpha)?;
    d.set_item("annealed_drift", rep.annealed_drift)?;
    Ok(d)
}

#[pyfunction]
fn p_star(epsilon: f64, kappa: f64, d: usize) -> PyResult<f64> {
    bounds::p_star(epsilon, kappa, d).map_err(value_error)
}

#[pyfunction]
fn epsilon_for_p(p: f64, kappa: f64, d: usize) -> PyResult<f64> {
    bounds::epsilon_for_p(p, kappa, d).map_err(value_error)
}

/// Closed-form 1-d velocity of an i.i.d. law given as `(weight, [right, left])` atoms.
#[pyfunction]
fn solomon_velocity(atoms: Vec<(f64, Vec<f64>)>) -> PyResult<f64> {
    let law = SiteDistribution::mixture(atoms).map_err(value_error)?;
    bounds::solomon_velocity_1d(&law).map_err(value_error)
}

/// Violated assumptions of a model, as messages; empty when valid.
#[pyfunction]
fn validate_spec(spec_json: &str) -> PyResult<Vec<String>> {
    let spec = parse_spec(spec_json)?;
    Ok(validate_model(&spec, None).violations.iter().map(|v| v.to_string()).collect())
}

/// Annealed velocity along `u` (default `e_1`) as `(mean, stderr)`.
#[pyfunction]
#[pyo3(signature = (spec_json, t, n_walks, seed, u = None))]
fn annealed_velocity(
    py: Python<'_>,
    spec_json: &str,
    t: u64,
    n_walks: u64,
    seed: u64,
    u: Option<Vec<f64>>,
) -> PyResult<(f64, f64)> {
    let spec = parse_spec(spec_json)?;
    let report = validate_model(&spec, None);
    if let Some(v) = report.violations.first() {
        return Err(value_error(v));
    }
    if t == 0 || n_walks == 0 {
        return Err(PyValueError::new_err("t and n_walks must be positive"));
    }
    let u = u.unwrap_or_else(|| {
        let mut e = vec![0.0; spec.d];
        e[0] = 1.0;
        e
    });
    if u.len() != spec.d {
        return Err(PyValueError::new_err("u must have one entry per dimension"));
    }
    let spec = Arc::new(spec);
    let est = py.detach(|| walk::annealed_velocity(&spec, &u, t, n_walks, seed)).map_err(value_error)?;
    Ok((est.mean, est.stderr))
}

/// Number of lattice animals of each size `1..=n_max` for the canonical step set.
#[pyfunction]
fn animal_counts(d: usize, n_max: usize) -> PyResult<Vec<u64>> {
    let steps = cluster::step_set(d).map_err(value_error)?;
    cluster::animal_counts(&steps, n_max).map_err(value_error)
}

/// Exact `E[N_x^T]` on the box of radius `radius` around the origin, every
/// site carrying `vector`; walks leaving the box are killed.
#[pyfunction]
fn exact_local_time(vector: Vec<f64>, radius: i64, x: Vec<i64>, t: u64) -> PyResult<f64> {
    let v = TransitionVector::new(vector).map_err(value_error)?;
    let d = v.dim();
    if x.len() != d {
        return Err(PyValueError::new_err("x must have one coordinate per dimension"));
    }
    let window = FiniteWindow::around(Point::origin(d), radius, |_| (Color::Blue, v.clone())).map_err(value_error)?;
    oracle::exact_local_time(&window, &Point::origin(d), &Point::new(&x), t).map_err(value_error)
}

#[pymodule]
fn rwre_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(kalikow_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(p_star, m)?)?;
    m.add_function(wrap_pyfunction!(epsilon_for_p, m)?)?;
    m.add_function(wrap_pyfunction!(solomon_velocity, m)?)?;
    m.add_function(wrap_pyfunction!(validate_spec, m)?)?;
    m.add_function(wrap_pyfunction!(annealed_velocity, m)?)?;
    m.add_function(wrap_pyfunction!(animal_counts, m)?)?;
    m.add_function(wrap_pyfunction!(exact_local_time, m)?)?;
    m.add("kalikow_spec", serde_json::to_string(&ModelSpec::kalikow()).map_err(value_error)?)?;
    Ok(())
}
