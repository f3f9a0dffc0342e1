use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use tsympnet::training::TrainConfig;
use tsympnet::verify::{run_suite, Suite};
use tsympnet::{
    init_model, load_checkpoint, rollout, sample_dataset, save_checkpoint, train, Arch,
    DatasetSpec, Forcing, Kind, PhasePoint, SympNetModel, SystemId, TrainingSample,
};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn point(coords: Vec<f64>) -> PyResult<PhasePoint> {
    PhasePoint::from_vec(coords).map_err(err)
}

fn arch_for(kind: Kind, layers: usize, width: Option<usize>, sublayers: Option<usize>) -> Arch {
    if kind.uses_gradient_modules() {
        Arch::gradient(layers, width.unwrap_or(0))
    } else {
        Arch::linear(layers, sublayers.unwrap_or(0))
    }
}

/// A symplectic network.
#[pyclass(name = "Model", module = "tsympnet_py", skip_from_py_object)]
#[derive(Clone)]
struct PyModel {
    inner: SympNetModel,
}

#[pymethods]
impl PyModel {
    /// `Model(kind, d, layers, width=None, sublayers=None, seed=0)`; gradient
    /// kinds (TG, NATG) take `width`, the others `sublayers`.
    #[new]
    #[pyo3(signature = (kind, d, layers, width=None, sublayers=None, seed=0))]
    fn new(
        kind: &str,
        d: usize,
        layers: usize,
        width: Option<usize>,
        sublayers: Option<usize>,
        seed: u64,
    ) -> PyResult<Self> {
        let kind: Kind = kind.parse().map_err(err)?;
        let inner =
            init_model(kind, d, arch_for(kind, layers, width, sublayers), seed).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: load_checkpoint(&path).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_checkpoint(&self.inner, &path).map_err(err)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind().as_str()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    fn params(&self) -> Vec<f64> {
        self.inner.all_params()
    }

    fn set_params(&mut self, params: Vec<f64>) -> PyResult<()> {
        self.inner.set_params(&params).map_err(err)
    }

    /// One step `ψ(h, t, x)`; `x` is `[p…, q…]`.
    #[pyo3(signature = (h, x, t=None))]
    fn forward(&self, h: f64, x: Vec<f64>, t: Option<f64>) -> PyResult<Vec<f64>> {
        Ok(self
            .inner
            .forward(h, t, &point(x)?)
            .map_err(err)?
            .into_vec())
    }

    /// Exact `2d × 2d` Jacobian with respect to `x`, as nested rows.
    #[pyo3(signature = (h, x, t=None))]
    fn jacobian(&self, h: f64, x: Vec<f64>, t: Option<f64>) -> PyResult<Vec<Vec<f64>>> {
        let j = self.inner.forward_jacobian(h, t, &point(x)?).map_err(err)?;
        Ok(j.row_iter().map(|r| r.iter().copied().collect()).collect())
    }

    /// Velocity `∂ψ/∂h` at `h = 0`.
    #[pyo3(signature = (x, t=None))]
    fn dh_at_zero(&self, x: Vec<f64>, t: Option<f64>) -> PyResult<Vec<f64>> {
        self.inner.dh_at_zero(t, &point(x)?).map_err(err)
    }

    /// `steps` network steps from `x0`; returns `steps + 1` states.
    #[pyo3(signature = (x0, h, steps, t0=0.0))]
    fn rollout(&self, x0: Vec<f64>, h: f64, steps: usize, t0: f64) -> PyResult<Vec<Vec<f64>>> {
        let traj = rollout(&self.inner, &point(x0)?, h, steps, t0).map_err(err)?;
        Ok(traj.into_iter().map(PhasePoint::into_vec).collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(kind={}, d={}, params={})",
            self.inner.kind(),
            self.inner.dim(),
            self.inner.param_count()
        )
    }
}

fn sample_to_dict<'py>(py: Python<'py>, s: &TrainingSample) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("x", s.x.as_slice().to_vec())?;
    d.set_item("t", s.t)?;
    d.set_item("h", s.h)?;
    d.set_item("y", s.y.as_slice().to_vec())?;
    Ok(d)
}

fn dict_to_sample(d: &Bound<'_, PyDict>) -> PyResult<TrainingSample> {
    let field = |name: &str| -> PyResult<Bound<'_, PyAny>> {
        d.get_item(name)?
            .ok_or_else(|| err(format!("sample is missing `{name}`")))
    };
    let t = match d.get_item("t")? {
        Some(v) if !v.is_none() => Some(v.extract()?),
        _ => None,
    };
    Ok(TrainingSample {
        x: point(field("x")?.extract()?)?,
        t,
        h: field("h")?.extract()?,
        y: point(field("y")?.extract()?)?,
    })
}

/// Training set of a benchmark system (`pendulum`, `linear`, `forced_ho`)
/// under its default protocol, as a list of `{x, t, h, y}` dicts.
#[pyfunction]
#[pyo3(signature = (system, seed=0, n=None))]
fn dataset<'py>(
    py: Python<'py>,
    system: &str,
    seed: u64,
    n: Option<usize>,
) -> PyResult<Bound<'py, PyList>> {
    let system: SystemId = system.parse().map_err(err)?;
    let mut spec = DatasetSpec::default_for(system, seed);
    if let Some(n) = n {
        spec.n = n;
    }
    let data = sample_dataset(&spec).map_err(err)?;
    let items = data
        .iter()
        .map(|s| sample_to_dict(py, s))
        .collect::<PyResult<Vec<_>>>()?;
    PyList::new(py, items)
}

/// Trains a copy of `model` with Adam; returns `(trained, loss_history)`.
/// Autonomous kinds ignore any `t` in the samples.
#[pyfunction(name = "train")]
#[pyo3(signature = (model, data, epochs, learning_rate=1e-3, seed=0))]
fn train_py(
    py: Python<'_>,
    model: &PyModel,
    data: Vec<Bound<'_, PyDict>>,
    epochs: usize,
    learning_rate: f64,
    seed: u64,
) -> PyResult<(PyModel, Vec<f64>)> {
    let nonauto = model.inner.kind().is_non_autonomous();
    let samples = data
        .iter()
        .map(|d| {
            let mut s = dict_to_sample(d)?;
            if !nonauto {
                s.t = None;
            }
            Ok(s)
        })
        .collect::<PyResult<Vec<_>>>()?;
    let mut cfg = TrainConfig {
        epochs,
        seed,
        ..TrainConfig::default()
    };
    cfg.adam.learning_rate = learning_rate;
    let start = model.inner.clone();
    let out = py.detach(|| train(start, &samples, &cfg)).map_err(err)?;
    Ok((PyModel { inner: out.model }, out.history))
}

/// Reference flow of a system over `h` starting at clock time `t0`.
#[pyfunction]
#[pyo3(signature = (system, x, h, t0=0.0))]
fn exact_flow(system: &str, x: Vec<f64>, h: f64, t0: f64) -> PyResult<Vec<f64>> {
    let system: SystemId = system.parse().map_err(err)?;
    let sys = system.build(Forcing::default()).map_err(err)?;
    let y = sys
        .exact_flow(t0, h, &point(x)?)
        .ok_or_else(|| err(format!("{} has no reference flow", system.as_str())))?;
    Ok(y.into_vec())
}

/// Runs a verification suite; returns one dict per check with `check`,
/// `pass` and a `values` mapping.
#[pyfunction]
#[pyo3(signature = (suite="all", seed=0))]
fn verify<'py>(py: Python<'py>, suite: &str, seed: u64) -> PyResult<Bound<'py, PyList>> {
    let suite: Suite = suite.parse().map_err(err)?;
    let reports = py.detach(|| run_suite(suite, seed)).map_err(err)?;
    let out = PyList::empty(py);
    for r in reports {
        let d = PyDict::new(py);
        d.set_item("check", &r.check)?;
        d.set_item("pass", r.pass)?;
        let values = PyDict::new(py);
        for m in &r.measurements {
            values.set_item(&m.name, m.value)?;
        }
        d.set_item("values", values)?;
        out.append(d)?;
    }
    Ok(out)
}

/// Closed-form parameter count of an architecture.
#[pyfunction]
#[pyo3(signature = (kind, d, layers, width=None, sublayers=None))]
fn param_count(
    kind: &str,
    d: usize,
    layers: usize,
    width: Option<usize>,
    sublayers: Option<usize>,
) -> PyResult<usize> {
    let kind: Kind = kind.parse().map_err(err)?;
    arch_for(kind, layers, width, sublayers)
        .param_count(kind, d)
        .map_err(err)
}

#[pymodule]
fn tsympnet_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(dataset, m)?)?;
    m.add_function(wrap_pyfunction!(train_py, m)?)?;
    m.add_function(wrap_pyfunction!(exact_flow, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(param_count, m)?)?;
    Ok(())
}
