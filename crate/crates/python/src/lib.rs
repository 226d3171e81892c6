//! Python bindings. Curves are sequences of complex numbers `x + iy`;
//! configurations are JSON strings with the CLI's config keys.

use engine::curves::{polygon_to_srv, PlanePolygon, SrvCurve};
use engine::mean::{self, MeanFitConfig};
use engine::simulate::{simulate_spirals, SpiralConfig};
use engine::warping::DEFAULT_GRID;
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn estimation_error(e: engine::Error) -> PyErr {
    if e.is_numerical() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn to_srv(points: Vec<Complex64>, id: String) -> PyResult<SrvCurve> {
    let polygon = PlanePolygon::new(id, points).map_err(value_error)?;
    polygon_to_srv(&polygon).map_err(estimation_error)
}

fn to_srvs(curves: Vec<Vec<Complex64>>) -> PyResult<Vec<SrvCurve>> {
    curves
        .into_iter()
        .enumerate()
        .map(|(i, c)| to_srv(c, format!("curve_{i}")))
        .collect()
}

fn parse_config(config: Option<&str>) -> PyResult<MeanFitConfig> {
    let config: MeanFitConfig = match config {
        Some(text) => serde_json::from_str(text).map_err(value_error)?,
        None => MeanFitConfig::default(),
    };
    config.validate().map_err(value_error)?;
    Ok(config)
}

/// Elastic (default) or inelastic full Procrustes mean. Returns a dict with
/// `mean` (polyline), `variance`, `eigenvalues`, `converged`, `iterations`,
/// `rotations` and `aligned` (per-curve polylines).
#[pyfunction]
#[pyo3(signature = (curves, config = None, elastic = true))]
fn estimate_mean<'py>(
    py: Python<'py>,
    curves: Vec<Vec<Complex64>>,
    config: Option<&str>,
    elastic: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let config = parse_config(config)?;
    let srvs = to_srvs(curves)?;
    let result = py
        .detach(|| {
            if elastic {
                mean::estimate_elastic_mean(&srvs, &config)
            } else {
                mean::estimate_inelastic_mean(&srvs, &config)
            }
        })
        .map_err(estimation_error)?;
    let aligned: Vec<Vec<Complex64>> = result
        .curves
        .iter()
        .map(|c| engine::curves::srv_to_curve(&c.curve, &c.curve.nodes))
        .collect();
    let out = PyDict::new(py);
    out.set_item("mean", result.mean_polyline)?;
    out.set_item("variance", result.variance)?;
    out.set_item("eigenvalues", result.eigen.values)?;
    out.set_item("converged", result.converged)?;
    out.set_item("iterations", result.iterations)?;
    out.set_item("rotations", result.curves.iter().map(|c| c.rotation).collect::<Vec<_>>())?;
    out.set_item("aligned", aligned)?;
    Ok(out)
}

/// Elastic full Procrustes distance between two polygons.
#[pyfunction]
fn elastic_distance(a: Vec<Complex64>, b: Vec<Complex64>) -> PyResult<f64> {
    let (a, b) = (to_srv(a, "a".into())?, to_srv(b, "b".into())?);
    mean::elastic_distance(&a, &b, DEFAULT_GRID).map_err(estimation_error)
}

/// Inelastic full Procrustes distance between two polygons.
#[pyfunction]
fn inelastic_distance(a: Vec<Complex64>, b: Vec<Complex64>) -> PyResult<f64> {
    let (a, b) = (to_srv(a, "a".into())?, to_srv(b, "b".into())?);
    engine::curves::inelastic_distance(&a, &b).map(|(d, _)| d).map_err(estimation_error)
}

/// Noisy, irregularly sampled spirals under random similarity transforms.
#[pyfunction]
#[pyo3(signature = (n = 9, min_points = 17, max_points = 22, noise_sd = 0.005, seed = 1))]
fn simulate_spiral_curves(
    n: usize,
    min_points: usize,
    max_points: usize,
    noise_sd: f64,
    seed: u64,
) -> PyResult<Vec<Vec<Complex64>>> {
    let config = SpiralConfig {
        curves: n,
        min_points,
        max_points,
        noise_sd,
        seed,
        ..SpiralConfig::default()
    };
    Ok(simulate_spirals(&config)
        .map_err(value_error)?
        .into_iter()
        .map(|p| p.points)
        .collect())
}

/// Dense polyline of the true spiral with `segments` edges.
#[pyfunction]
#[pyo3(signature = (segments = 400))]
fn true_spiral(segments: usize) -> Vec<Complex64> {
    (0..=segments)
        .map(|k| engine::simulate::spiral_point(k as f64 / segments.max(1) as f64))
        .collect()
}

#[pymodule]
fn shapemean(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(estimate_mean, m)?)?;
    m.add_function(wrap_pyfunction!(elastic_distance, m)?)?;
    m.add_function(wrap_pyfunction!(inelastic_distance, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_spiral_curves, m)?)?;
    m.add_function(wrap_pyfunction!(true_spiral, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
