//! Python bindings: configs, simulations, trajectories and the main analysis
//! functions. Structured results come back as plain dicts and lists.

use std::path::PathBuf;

use annihilation_kinetics as ak;
use annihilation_kinetics::diagnostics::{self, K_SIGMA};
use annihilation_kinetics::dsmc::checkpoint;
use annihilation_kinetics::profile::{self, Reference};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde::Serialize;
use serde_json::Value;

fn py_err(e: ak::Error) -> PyErr {
    match e {
        ak::Error::Io(e) => PyOSError::new_err(e.to_string()),
        ak::Error::MajorantViolation { .. } | ak::Error::Checkpoint(_) => PyRuntimeError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for ak::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn json_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => i.into_pyobject(py)?.into_any(),
            (_, Some(u)) => u.into_pyobject(py)?.into_any(),
            _ => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(a) => {
            let items = a.iter().map(|x| json_to_py(py, x)).collect::<PyResult<Vec<_>>>()?;
            PyList::new(py, items)?.into_any()
        }
        Value::Object(o) => {
            let d = PyDict::new(py);
            for (k, x) in o {
                d.set_item(k, json_to_py(py, x)?)?;
            }
            d.into_any()
        }
    })
}

fn to_py<'py, T: Serialize>(py: Python<'py>, x: &T) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(x).map_err(|e| PyValueError::new_err(e.to_string()))?;
    json_to_py(py, &v)
}

fn ensemble(dim: usize, weight: f64, velocities: Vec<Vec<f64>>) -> PyResult<ak::ParticleEnsemble> {
    ak::ParticleEnsemble::from_rows(dim, weight, &velocities).py()
}

fn rows(e: &ak::ParticleEnsemble) -> Vec<Vec<f64>> {
    e.iter().map(<[f64]>::to_vec).collect()
}

/// Simulation configuration in the flat `key = value` format.
#[pyclass(name = "Config", module = "annihilation_kinetics_py")]
struct PyConfig {
    inner: ak::SimConfig,
}

#[pymethods]
impl PyConfig {
    /// Defaults, then `key=value` keyword overrides using the text-format keys.
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut c = PyConfig {
            inner: ak::SimConfig::default(),
        };
        if let Some(kw) = kwargs {
            for (k, v) in kw.iter() {
                c.set(&k.extract::<String>()?, &v.str()?.to_string())?;
            }
        }
        Ok(c)
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        let inner = ak::SimConfig::parse(text).py()?;
        inner.validate().py()?;
        Ok(PyConfig { inner })
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    /// Sets one key, validating the whole config afterwards.
    fn set(&mut self, key: &str, value: &str) -> PyResult<()> {
        let mut found = false;
        let mut lines: Vec<String> = self
            .inner
            .to_text()
            .lines()
            .map(|l| match l.split_once(" = ") {
                Some((k, _)) if k == key => {
                    found = true;
                    format!("{key} = {value}")
                }
                _ => l.to_string(),
            })
            .collect();
        if !found {
            lines.push(format!("{key} = {value}"));
        }
        let next = ak::SimConfig::parse(&lines.join("\n")).py()?;
        next.validate().py()?;
        self.inner = next;
        Ok(())
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn particle_count(&self) -> usize {
        self.inner.particle_count
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(dim={}, alpha={}, particle_count={}, seed={})",
            self.inner.dim, self.inner.alpha, self.inner.particle_count, self.inner.seed
        )
    }
}

/// Recorded moments and rescaled snapshots of a run.
#[pyclass(name = "Trajectory", module = "annihilation_kinetics_py")]
struct PyTrajectory {
    inner: ak::Trajectory,
}

#[pymethods]
impl PyTrajectory {
    #[staticmethod]
    fn read_dir(path: PathBuf) -> PyResult<Self> {
        Ok(PyTrajectory {
            inner: ak::Trajectory::read_dir(&path).py()?,
        })
    }

    fn write_dir(&self, path: PathBuf) -> PyResult<()> {
        self.inner.write_dir(&path).py()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn termination(&self) -> Option<String> {
        self.inner.termination.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.samples.len()
    }

    /// Column of the moment records: `t`, `tau`, `n`, `T`, `m1`, `m3`, `count` or `step`.
    fn series(&self, name: &str) -> PyResult<Vec<f64>> {
        let f: fn(&ak::TrajectorySample) -> f64 = match name {
            "t" => |s| s.record.t,
            "tau" => |s| s.record.tau,
            "n" => |s| s.record.n,
            "T" => |s| s.record.temperature,
            "m1" => |s| s.record.m1,
            "m3" => |s| s.record.m3,
            "count" => |s| s.count as f64,
            "step" => |s| s.step as f64,
            other => return Err(PyValueError::new_err(format!("unknown series `{other}`"))),
        };
        Ok(self.inner.samples.iter().map(f).collect())
    }

    /// Snapshot summaries (no histograms) as dicts.
    fn snapshots<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyList>> {
        let items = self
            .inner
            .snapshots
            .iter()
            .map(|s| {
                let d = PyDict::new(py);
                d.set_item("step", s.step)?;
                d.set_item("count", s.count)?;
                d.set_item("t", s.t)?;
                d.set_item("tau", s.tau)?;
                d.set_item("entropy", s.entropy)?;
                d.set_item("entropy_stderr", s.entropy_stderr)?;
                d.set_item("exp_moment", s.exp_moment)?;
                d.set_item("coefficients", to_py(py, &s.coefficients)?)?;
                Ok(d)
            })
            .collect::<PyResult<Vec<_>>>()?;
        PyList::new(py, items)
    }

    /// Tail profile as `(r_mid, density, stderr)`.
    fn profile(&self, burn_in_tau: f64) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let hs: Vec<&ak::RadialHistogram> = self.inner.tail(burn_in_tau).iter().map(|s| &s.histogram).collect();
        let p = profile::extract_profile(&hs).py()?;
        let se = p.stderr().map(<[f64]>::to_vec).unwrap_or_default();
        Ok((p.r_mid(), p.density().to_vec(), se))
    }

    /// Coefficients and predicted exponents of the tail profile.
    fn profile_rates<'py>(&self, py: Python<'py>, burn_in_tau: f64) -> PyResult<Bound<'py, PyAny>> {
        let hs: Vec<&ak::RadialHistogram> = self.inner.tail(burn_in_tau).iter().map(|s| &s.histogram).collect();
        let p = profile::extract_profile(&hs).py()?;
        let c = profile::profile_coefficients(&p, self.inner.alpha).py()?;
        let rates = profile::predicted_rates(&c).ok();
        to_py(
            py,
            &serde_json::json!({
                "coefficients": c,
                "predicted": rates,
                "l1_to_maxwellian": profile::profile_distance(&p, Reference::Maxwellian, 0.0).py()?,
            }),
        )
    }

    fn product_bound_check<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &diagnostics::product_bound_check(&self.inner, self.inner.alpha, K_SIGMA).py()?)
    }

    fn m1_bound_check<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &diagnostics::m1_bound_check(&self.inner, self.inner.alpha, K_SIGMA).py()?)
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }
}

/// A running DSMC simulation.
#[pyclass(name = "Simulation", module = "annihilation_kinetics_py")]
struct PySimulation {
    inner: ak::Simulation,
}

#[pymethods]
impl PySimulation {
    #[new]
    fn new(config: &PyConfig) -> PyResult<Self> {
        Ok(PySimulation {
            inner: ak::Simulation::new(config.inner.clone()).py()?,
        })
    }

    /// Continues from a checkpoint file written by `save_checkpoint`.
    #[staticmethod]
    fn resume(config: &PyConfig, path: PathBuf) -> PyResult<Self> {
        let (state, alpha) = checkpoint::read_checkpoint(&path).py()?;
        if alpha != config.inner.alpha {
            return Err(PyValueError::new_err(format!(
                "checkpoint alpha {alpha} differs from config alpha {}",
                config.inner.alpha
            )));
        }
        Ok(PySimulation {
            inner: ak::Simulation::resume(config.inner.clone(), state).py()?,
        })
    }

    /// One step; returns the termination reason once the run is over.
    fn advance(&mut self) -> PyResult<Option<&'static str>> {
        Ok(self.inner.advance().py()?.map(|t| t.as_str()))
    }

    fn run_steps(&mut self, steps: u64) -> PyResult<Option<&'static str>> {
        Ok(self.inner.run_steps(steps).py()?.map(|t| t.as_str()))
    }

    fn run_to_end(&mut self, py: Python<'_>) -> PyResult<&'static str> {
        let inner = &mut self.inner;
        let t = py.detach(|| inner.run_to_end()).py()?;
        Ok(t.as_str())
    }

    fn save_checkpoint(&self, path: PathBuf) -> PyResult<()> {
        checkpoint::write_checkpoint(&path, self.inner.state(), self.inner.config().alpha).py()
    }

    #[getter]
    fn t(&self) -> f64 {
        self.inner.state().t
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.inner.state().tau
    }

    #[getter]
    fn step(&self) -> u64 {
        self.inner.state().step
    }

    #[getter]
    fn count(&self) -> usize {
        self.inner.state().ensemble.count()
    }

    #[getter]
    fn collisions(&self) -> u64 {
        self.inner.state().collisions
    }

    #[getter]
    fn annihilations(&self) -> u64 {
        self.inner.state().annihilations
    }

    #[getter]
    fn alpha_warning(&self) -> Option<String> {
        self.inner.alpha_warning()
    }

    fn velocities(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.state().ensemble)
    }

    fn moments<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &ak::compute_moments(&self.inner.state().ensemble).py()?)
    }

    fn trajectory(&self) -> PyTrajectory {
        PyTrajectory {
            inner: self.inner.trajectory().clone(),
        }
    }
}

/// Runs `config` to termination and returns its trajectory.
#[pyfunction]
fn run(py: Python<'_>, config: &PyConfig) -> PyResult<PyTrajectory> {
    let cfg = config.inner.clone();
    let out = py.detach(|| ak::run(cfg)).py()?;
    Ok(PyTrajectory { inner: out.trajectory })
}

#[pyfunction]
fn post_collision(v: Vec<f64>, vs: Vec<f64>, sigma: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    ak::collision::post_collision(&v, &vs, &sigma).py()
}

#[pyfunction]
fn povzner_rho(k: f64, dim: usize) -> PyResult<f64> {
    ak::collision::povzner_rho(k, dim).py()
}

#[pyfunction]
fn alpha_star(dim: usize) -> PyResult<f64> {
    ak::collision::alpha_star(dim).py()
}

#[pyfunction]
fn maxwellian_coefficients<'py>(py: Python<'py>, dim: usize) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &ak::collision::maxwellian_coefficients(dim).py()?)
}

/// Moments `(n, u, T, m1, m3)` of particles with a common weight.
#[pyfunction]
fn compute_moments<'py>(py: Python<'py>, velocities: Vec<Vec<f64>>, weight: f64) -> PyResult<Bound<'py, PyAny>> {
    let dim = velocities.first().map_or(0, Vec::len);
    to_py(py, &ak::compute_moments(&ensemble(dim, weight, velocities)?).py()?)
}

/// Rescales to mass 1, momentum 0, energy d/2; returns `(weight, velocities)`.
#[pyfunction]
fn to_selfsimilar(velocities: Vec<Vec<f64>>, weight: f64) -> PyResult<(f64, Vec<Vec<f64>>)> {
    let dim = velocities.first().map_or(0, Vec::len);
    let psi = ak::rescale::to_selfsimilar(&ensemble(dim, weight, velocities)?).py()?;
    Ok((psi.weight(), rows(&psi)))
}

/// Log-log slope on `[lo, hi]`; returns `(slope, stderr)`.
#[pyfunction]
fn fit_power_law(times: Vec<f64>, values: Vec<f64>, lo: f64, hi: f64) -> PyResult<(f64, f64)> {
    let f = diagnostics::fit_power_law(&times, &values, (lo, hi)).py()?;
    Ok((f.slope, f.stderr))
}

#[pyfunction]
fn derive_seed(master: u64, index: u64) -> u64 {
    ak::dsmc::derive_seed(master, index)
}

#[pymodule]
fn annihilation_kinetics_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PySimulation>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(post_collision, m)?)?;
    m.add_function(wrap_pyfunction!(povzner_rho, m)?)?;
    m.add_function(wrap_pyfunction!(alpha_star, m)?)?;
    m.add_function(wrap_pyfunction!(maxwellian_coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(compute_moments, m)?)?;
    m.add_function(wrap_pyfunction!(to_selfsimilar, m)?)?;
    m.add_function(wrap_pyfunction!(fit_power_law, m)?)?;
    m.add_function(wrap_pyfunction!(derive_seed, m)?)?;
    Ok(())
}
