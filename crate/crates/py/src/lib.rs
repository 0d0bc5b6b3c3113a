//! Python bindings for scene generation, expert and policy evaluation,
//! dataset aggregation and training.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use waypt3d::harness::{evaluate as run_eval, Actor, Metrics, RunConfig, Scene as CoreScene};
use waypt3d::learner::{self, DaggerConfig, MlpPolicy, TrainConfig, LABEL_DIM};
use waypt3d::world::{self, SceneKind, SceneMeta, ScenePreset, VoxelGrid};
use waypt3d::Error;

fn err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::Format { .. } | Error::InvalidConfig(_) | Error::InvalidDims(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// A voxel scene with its generating metadata.
#[pyclass(name = "Scene", module = "pywaypt3d", skip_from_py_object)]
#[derive(Clone)]
struct PyScene {
    grid: VoxelGrid,
    meta: SceneMeta,
}

impl PyScene {
    fn core(&self) -> CoreScene {
        CoreScene::new(format!("{}-{}", self.meta.preset.kind, self.meta.seed), self.grid.clone())
    }
}

#[pymethods]
impl PyScene {
    #[staticmethod]
    #[pyo3(signature = (seed, preset = "mixed", clutter = 0.5, dims = [40, 40, 20], voxel = 0.25))]
    fn generate(seed: u64, preset: &str, clutter: f64, dims: [usize; 3], voxel: f64) -> PyResult<Self> {
        let kind: SceneKind = preset.parse().map_err(PyValueError::new_err)?;
        let (grid, meta) = world::gen_scene(seed, ScenePreset::new(kind, clutter), dims, voxel).map_err(err)?;
        Ok(Self { grid, meta })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let (grid, meta) = world::load_scene(&path).map_err(err)?;
        Ok(Self { grid, meta })
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        let (grid, meta) = world::parse_scene(text).map_err(err)?;
        Ok(Self { grid, meta })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        world::save_scene(&self.grid, &self.meta, &path).map_err(err)
    }

    fn to_text(&self) -> String {
        world::write_scene(&self.grid, &self.meta)
    }

    #[getter]
    fn dims(&self) -> [usize; 3] {
        self.grid.dims()
    }

    #[getter]
    fn voxel(&self) -> f64 {
        self.grid.voxel()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.meta.seed
    }

    #[getter]
    fn preset(&self) -> &'static str {
        self.meta.preset.kind.as_str()
    }

    fn occupied_fraction(&self) -> f64 {
        self.grid.occupied_fraction()
    }

    /// Occupancy as a flat list of 0/1 in x-fastest order.
    fn occupancy(&self) -> Vec<u8> {
        self.grid.cells().iter().map(|&c| c as u8).collect()
    }

    fn __repr__(&self) -> String {
        format!("Scene(preset={:?}, seed={}, dims={:?})", self.preset(), self.meta.seed, self.grid.dims())
    }
}

#[pyclass(name = "Policy", module = "pywaypt3d", skip_from_py_object)]
#[derive(Clone)]
struct PyPolicy {
    inner: MlpPolicy,
}

#[pymethods]
impl PyPolicy {
    #[new]
    #[pyo3(signature = (dims, seed = 0))]
    fn new(dims: Vec<usize>, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: learner::init_policy(seed, &dims).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: learner::load_policy(&path).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        learner::save_policy(&self.inner, &path).map_err(err)
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.inner.dims()
    }

    /// Body-frame waypoint `[x, y, z, yaw]` for one observation.
    fn predict(&self, obs: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.forward(&obs).map_err(err)
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }
}

#[pyclass(name = "Dataset", module = "pywaypt3d", skip_from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: learner::Dataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    fn new(obs_dim: usize) -> Self {
        Self {
            inner: learner::Dataset::new(obs_dim),
        }
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: learner::load_dataset(&path).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        learner::save_dataset(&self.inner, &path).map_err(err)
    }

    fn push(&mut self, obs: Vec<f64>, label: [f64; 4]) -> PyResult<()> {
        self.inner.push(&obs, label).map_err(err)
    }

    #[getter]
    fn obs_dim(&self) -> usize {
        self.inner.obs_dim
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

fn metrics_dict<'py>(py: Python<'py>, m: &Metrics) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("episodes", m.episodes)?;
    d.set_item("successes", m.successes)?;
    d.set_item("collisions", m.collisions)?;
    d.set_item("timeouts", m.timeouts)?;
    d.set_item("no_path", m.no_path)?;
    d.set_item("success_rate", m.success_rate)?;
    d.set_item("mean_time", m.mean_time)?;
    d.set_item("mean_path_ratio", m.mean_path_ratio)?;
    Ok(d)
}

/// Fly `episodes` episodes over `scenes` and return the aggregate metrics.
/// Without a policy the privileged expert flies.
#[pyfunction]
#[pyo3(signature = (scenes, episodes = 10, seed = 0, policy = None))]
fn evaluate<'py>(
    py: Python<'py>,
    scenes: Vec<PyRef<'py, PyScene>>,
    episodes: usize,
    seed: u64,
    policy: Option<PyRef<'py, PyPolicy>>,
) -> PyResult<Bound<'py, PyDict>> {
    let scenes: Vec<CoreScene> = scenes.iter().map(|s| s.core()).collect();
    let actor = match &policy {
        Some(p) => Actor::Policy(&p.inner),
        None => Actor::Expert,
    };
    let ev = run_eval(&actor, &scenes, episodes, seed, &RunConfig::default()).map_err(err)?;
    metrics_dict(py, &ev.metrics)
}

/// Train `policy` on `data`; returns the trained policy and per-epoch loss.
#[pyfunction]
#[pyo3(signature = (policy, data, epochs = 10, lr = 1e-4, weight_decay = 1e-2, batch = 64, seed = 0))]
fn train(
    policy: &PyPolicy,
    data: &PyDataset,
    epochs: usize,
    lr: f64,
    weight_decay: f64,
    batch: usize,
    seed: u64,
) -> PyResult<(PyPolicy, Vec<f64>)> {
    let cfg = TrainConfig {
        lr,
        weight_decay,
        batch,
        epochs,
        seed,
        ..TrainConfig::default()
    };
    let (p, hist) = learner::train(&policy.inner, &data.inner, &cfg).map_err(err)?;
    Ok((PyPolicy { inner: p }, hist))
}

/// Fresh policy for `data` with normalization fit on it.
#[pyfunction]
#[pyo3(signature = (data, hidden = vec![256, 128], seed = 0))]
fn fresh_policy(data: &PyDataset, hidden: Vec<usize>, seed: u64) -> PyResult<PyPolicy> {
    let mut dims = vec![data.inner.obs_dim];
    dims.extend(hidden);
    dims.push(LABEL_DIM);
    let mut p = learner::init_policy(seed, &dims).map_err(err)?;
    p.fit_normalization(&data.inner).map_err(err)?;
    Ok(PyPolicy { inner: p })
}

/// Run dataset aggregation; returns the final policy and aggregated data.
#[pyfunction]
#[pyo3(signature = (scenes, rounds = 4, per_round = 2000, alpha0 = 1.0, decay = 0.8, seed = 0, epochs = 10, lr = 1e-4))]
#[allow(clippy::too_many_arguments)]
fn collect(
    scenes: Vec<PyRef<'_, PyScene>>,
    rounds: usize,
    per_round: usize,
    alpha0: f64,
    decay: f64,
    seed: u64,
    epochs: usize,
    lr: f64,
) -> PyResult<(PyPolicy, PyDataset)> {
    let scenes: Vec<CoreScene> = scenes.iter().map(|s| s.core()).collect();
    let cfg = DaggerConfig {
        rounds,
        per_round,
        alpha0,
        decay,
        seed,
        train: TrainConfig {
            epochs,
            lr,
            seed,
            ..TrainConfig::default()
        },
        ..DaggerConfig::default()
    };
    let out = learner::dagger(&scenes, &cfg, &RunConfig::default()).map_err(err)?;
    let policy = out.policies.last().cloned().expect("at least one round");
    Ok((PyPolicy { inner: policy }, PyDataset { inner: out.dataset }))
}

#[pymodule]
fn pywaypt3d(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScene>()?;
    m.add_class::<PyPolicy>()?;
    m.add_class::<PyDataset>()?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(fresh_policy, m)?)?;
    m.add_function(wrap_pyfunction!(collect, m)?)?;
    Ok(())
}
