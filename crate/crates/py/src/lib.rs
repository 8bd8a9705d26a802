//! Python bindings for the chestnut dataset synthesizer.

use std::path::PathBuf;

use chestnut_core::config::SimConfig as CoreConfig;
use chestnut_core::error::Error as CoreError;
use chestnut_core::geo::{self, BearingConvention};
use chestnut_core::load::LoadState;
use chestnut_core::pipeline::{self, Inputs};
use chestnut_core::{qos, stats, validate};
use pyo3::create_exception;
use pyo3::exceptions::{PyAttributeError, PyException, PyTypeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyFloat, PyInt, PyString};
use serde_json::Value;

create_exception!(chestnut, ChestnutError, PyException);

fn err(e: CoreError) -> PyErr {
    ChestnutError::new_err(e.to_string())
}

#[pyclass(frozen, eq, from_py_object)]
#[derive(Clone, Copy, PartialEq)]
struct GeoPoint {
    inner: geo::GeoPoint,
}

#[pymethods]
impl GeoPoint {
    #[new]
    fn new(lon: f64, lat: f64) -> Self {
        GeoPoint {
            inner: geo::GeoPoint::new(lon, lat),
        }
    }

    #[getter]
    fn lon(&self) -> f64 {
        self.inner.lon
    }

    #[getter]
    fn lat(&self) -> f64 {
        self.inner.lat
    }

    fn __repr__(&self) -> String {
        format!("GeoPoint(lon={}, lat={})", self.inner.lon, self.inner.lat)
    }
}

/// Simulation parameters. Keyword arguments override the defaults.
#[pyclass(from_py_object)]
#[derive(Clone)]
struct SimConfig {
    inner: CoreConfig,
}

fn py_to_json(value: &Bound<'_, PyAny>) -> PyResult<Value> {
    if value.is_instance_of::<PyBool>() {
        Ok(Value::Bool(value.extract()?))
    } else if value.is_instance_of::<PyInt>() {
        Ok(Value::from(value.extract::<i64>()?))
    } else if value.is_instance_of::<PyFloat>() {
        Ok(Value::from(value.extract::<f64>()?))
    } else if value.is_instance_of::<PyString>() {
        Ok(Value::String(value.extract()?))
    } else {
        Err(PyTypeError::new_err(format!("unsupported value {value}")))
    }
}

fn json_to_py<'py>(py: Python<'py>, value: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match value {
        Value::Bool(b) => PyBool::new(py, *b).to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        other => py
            .import("json")?
            .call_method1("loads", (other.to_string(),))?,
    })
}

#[pymethods]
impl SimConfig {
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut fields = serde_json::to_value(CoreConfig::default())
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        if let Some(kwargs) = kwargs {
            let map = fields
                .as_object_mut()
                .expect("config serializes to an object");
            for (key, value) in kwargs.iter() {
                let key: String = key.extract()?;
                if !map.contains_key(&key) {
                    return Err(PyValueError::new_err(format!("unknown parameter `{key}`")));
                }
                map.insert(key, py_to_json(&value)?);
            }
        }
        let inner: CoreConfig =
            serde_json::from_value(fields).map_err(|e| PyValueError::new_err(e.to_string()))?;
        inner.validate().map_err(err)?;
        Ok(SimConfig { inner })
    }

    /// Small preset: 50 synthetic vehicles, 20 users.
    #[staticmethod]
    fn desk() -> Self {
        SimConfig {
            inner: CoreConfig::desk(),
        }
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(SimConfig {
            inner: CoreConfig::from_toml_str(text).map_err(err)?,
        })
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml_string()
    }

    fn window_count(&self) -> u32 {
        self.inner.window_count()
    }

    fn __getattr__<'py>(&self, py: Python<'py>, name: &str) -> PyResult<Bound<'py, PyAny>> {
        let fields =
            serde_json::to_value(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))?;
        match fields.get(name) {
            Some(v) => json_to_py(py, v),
            None => Err(PyAttributeError::new_err(name.to_string())),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "SimConfig(seed={}, n_u={}, n_s={})",
            self.inner.seed, self.inner.n_u, self.inner.n_s
        )
    }
}

/// Great-circle distance in meters.
#[pyfunction]
fn haversine(a: GeoPoint, b: GeoPoint) -> f64 {
    geo::haversine(a.inner, b.inner)
}

/// Point reached after moving `distance_m` along `direction_deg`.
#[pyfunction]
#[pyo3(signature = (p, direction_deg, distance_m, north_referenced = false))]
fn extrapolate(
    p: GeoPoint,
    direction_deg: f64,
    distance_m: f64,
    north_referenced: bool,
) -> GeoPoint {
    let convention = if north_referenced {
        BearingConvention::NorthReferenced
    } else {
        BearingConvention::EastReferenced
    };
    GeoPoint {
        inner: geo::GeoConstants::default().extrapolate(
            p.inner,
            direction_deg,
            distance_m,
            convention,
        ),
    }
}

#[pyfunction]
fn softmax3(x: [f64; 3]) -> [f64; 3] {
    chestnut_core::load::softmax3(x)
}

/// Queueing delay for a load history given oldest first; the last entry is
/// the current utilization.
#[pyfunction]
#[pyo3(signature = (history, k = 5))]
fn queueing_delay(history: Vec<[f64; 3]>, k: usize) -> PyResult<f64> {
    if history.is_empty() {
        return Err(PyValueError::new_err("history needs at least one entry"));
    }
    Ok(qos::queueing_delay(&LoadState::from_history(
        0, 0, history, k,
    )))
}

#[pyfunction]
fn simulation_delay(normalized_sum: f64, theta_rt: f64) -> f64 {
    qos::simulation_delay(normalized_sum, theta_rt)
}

#[pyfunction]
fn network_jitter(normalized_score: f64, theta_nj: f64) -> f64 {
    qos::network_jitter(normalized_score, theta_nj)
}

#[pyfunction]
fn time_perturbation(t: f64) -> f64 {
    qos::time_perturbation(t)
}

/// Generates a dataset into `out_dir` and returns the run manifest as a dict.
#[pyfunction]
#[pyo3(signature = (config, out_dir, gps = None, stations = None))]
fn generate<'py>(
    py: Python<'py>,
    config: &SimConfig,
    out_dir: PathBuf,
    gps: Option<PathBuf>,
    stations: Option<PathBuf>,
) -> PyResult<Bound<'py, PyAny>> {
    let inputs = match (gps, stations) {
        (Some(g), Some(s)) => Inputs::files(g, s),
        (None, None) => Inputs::Synthetic,
        _ => {
            return Err(PyValueError::new_err(
                "gps and stations must be given together",
            ))
        }
    };
    let cfg = config.inner.clone();
    let manifest = py
        .detach(|| pipeline::run(&cfg, &inputs, &out_dir))
        .map_err(err)?;
    let text =
        serde_json::to_string(&manifest).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Re-checks an output directory; returns the list of violations.
#[pyfunction]
fn validate_dir(py: Python<'_>, out_dir: PathBuf) -> PyResult<Vec<String>> {
    let report = py
        .detach(|| validate::validate_dir(&out_dir))
        .map_err(err)?;
    Ok(report.violations)
}

/// Recomputes the statistics files of an output directory.
#[pyfunction]
fn emit_stats(py: Python<'_>, out_dir: PathBuf) -> PyResult<()> {
    py.detach(|| stats::emit_stats_for_dir(&out_dir))
        .map_err(err)
}

#[pyfunction]
fn spearman(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    if x.len() != y.len() {
        return Err(PyValueError::new_err("sequences differ in length"));
    }
    Ok(stats::spearman(&x, &y))
}

#[pymodule]
fn chestnut(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ChestnutError", m.py().get_type::<ChestnutError>())?;
    m.add_class::<GeoPoint>()?;
    m.add_class::<SimConfig>()?;
    m.add_function(wrap_pyfunction!(haversine, m)?)?;
    m.add_function(wrap_pyfunction!(extrapolate, m)?)?;
    m.add_function(wrap_pyfunction!(softmax3, m)?)?;
    m.add_function(wrap_pyfunction!(queueing_delay, m)?)?;
    m.add_function(wrap_pyfunction!(simulation_delay, m)?)?;
    m.add_function(wrap_pyfunction!(network_jitter, m)?)?;
    m.add_function(wrap_pyfunction!(time_perturbation, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(validate_dir, m)?)?;
    m.add_function(wrap_pyfunction!(emit_stats, m)?)?;
    m.add_function(wrap_pyfunction!(spearman, m)?)?;
    Ok(())
}
