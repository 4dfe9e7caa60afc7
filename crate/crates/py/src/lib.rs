//! Python bindings for the saccade planner.
//!
//! Structured results (summaries, parsed frames, bench rows) cross the
//! boundary as JSON and come out as plain dicts.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;
use saccade_core as core;

/// `(pan, tilt, info_gain, utility, efe)`
type EvaluationRow = (usize, usize, f64, f64, f64);

fn to_py_err(e: core::Error) -> PyErr {
    match e {
        core::Error::Config { .. }
        | core::Error::InvalidGrid(_)
        | core::Error::InvalidProbability { .. }
        | core::Error::InvalidSensor(_)
        | core::Error::OutOfBounds { .. }
        | core::Error::RejectedFrame(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn json_to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Accepts `str` or `bytes` for a protocol line.
fn line_bytes(line: &Bound<'_, PyAny>) -> PyResult<Vec<u8>> {
    if let Ok(b) = line.cast::<PyBytes>() {
        return Ok(b.as_bytes().to_vec());
    }
    Ok(line.extract::<String>()?.into_bytes())
}

#[pyclass(name = "GridSpec", module = "saccade", frozen, eq, hash, from_py_object)]
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct PyGridSpec(core::GridSpec);

#[pymethods]
impl PyGridSpec {
    #[new]
    fn new(pan_blocks: usize, tilt_blocks: usize, fov_width: usize, fov_height: usize) -> PyResult<Self> {
        core::GridSpec::new(pan_blocks, tilt_blocks, fov_width, fov_height)
            .map(Self)
            .map_err(to_py_err)
    }

    #[getter]
    fn pan_blocks(&self) -> usize {
        self.0.pan_blocks()
    }

    #[getter]
    fn tilt_blocks(&self) -> usize {
        self.0.tilt_blocks()
    }

    #[getter]
    fn fov_width(&self) -> usize {
        self.0.fov_width()
    }

    #[getter]
    fn fov_height(&self) -> usize {
        self.0.fov_height()
    }

    fn num_blocks(&self) -> usize {
        self.0.num_blocks()
    }

    fn center_cell(&self) -> (usize, usize) {
        self.0.center_cell()
    }

    /// Blocks seen from a fixation in cell order; `None` for cells off the grid.
    fn visible_blocks(&self, pan: usize, tilt: usize) -> PyResult<Vec<Option<(usize, usize)>>> {
        let cells = self.0.visible_blocks(core::Block::new(pan, tilt)).map_err(to_py_err)?;
        Ok(cells.iter().map(|c| c.block.map(|b| (b.pan, b.tilt))).collect())
    }

    fn __repr__(&self) -> String {
        let g = self.0;
        format!(
            "GridSpec({}, {}, {}, {})",
            g.pan_blocks(),
            g.tilt_blocks(),
            g.fov_width(),
            g.fov_height()
        )
    }
}

#[pyclass(name = "SensorModel", module = "saccade", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PySensorModel(core::SensorModel);

#[pymethods]
impl PySensorModel {
    #[new]
    #[pyo3(signature = (p_hit = 0.9, p_fa = 0.02))]
    fn new(p_hit: f64, p_fa: f64) -> PyResult<Self> {
        core::SensorModel::new(p_hit, p_fa).map(Self).map_err(to_py_err)
    }

    #[staticmethod]
    fn deterministic() -> Self {
        Self(core::SensorModel::deterministic())
    }

    #[getter]
    fn p_hit(&self) -> f64 {
        self.0.p_hit()
    }

    #[getter]
    fn p_fa(&self) -> f64 {
        self.0.p_fa()
    }

    fn __repr__(&self) -> String {
        format!("SensorModel(p_hit={}, p_fa={})", self.0.p_hit(), self.0.p_fa())
    }
}

/// The perceive-plan loop for one camera.
#[pyclass(name = "Agent", module = "saccade")]
struct PyAgent(core::Agent);

#[pymethods]
impl PyAgent {
    /// Builds an agent from a planner config (or scenario) JSON string.
    #[new]
    fn new(config_json: &str) -> PyResult<Self> {
        let value: serde_json::Value =
            serde_json::from_str(config_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let config = if value.get("planner").is_some() {
            core::Scenario::from_json(config_json).map_err(to_py_err)?.planner
        } else {
            core::PlannerConfig::from_json(config_json).map_err(to_py_err)?
        };
        core::Agent::new(config).map(Self).map_err(to_py_err)
    }

    #[getter]
    fn grid(&self) -> PyGridSpec {
        PyGridSpec(*self.0.grid())
    }

    #[getter]
    fn fixation(&self) -> (usize, usize) {
        let f = self.0.belief().fixation;
        (f.pan, f.tilt)
    }

    /// Presence probabilities, row-major by pan then tilt.
    fn beliefs(&self) -> Vec<f64> {
        self.0.belief().probabilities().to_vec()
    }

    fn coverage(&self) -> f64 {
        self.0.belief().coverage()
    }

    fn total_entropy(&self) -> f64 {
        self.0.belief().total_entropy()
    }

    /// Next fixation from the current belief.
    fn plan(&mut self) -> PyResult<(usize, usize)> {
        let (f, _) = self.0.plan().map_err(to_py_err)?;
        Ok((f.pan, f.tilt))
    }

    /// Expected free energy of every fixation as `(pan, tilt, info_gain, utility, efe)`.
    fn evaluate(&mut self) -> PyResult<Vec<EvaluationRow>> {
        let (_, evals) = self.0.plan().map_err(to_py_err)?;
        Ok(evals
            .iter()
            .map(|e| (e.fixation.pan, e.fixation.tilt, e.info_gain, e.utility, e.efe))
            .collect())
    }

    /// Observes one frame record and returns the action record, without newline.
    fn handle_frame(&mut self, line: &Bound<'_, PyAny>) -> PyResult<String> {
        let msg = core::parse_frame_message(&line_bytes(line)?).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let action = self.0.handle_frame(&msg).map_err(to_py_err)?;
        Ok(String::from_utf8(core::encode_action_message(action.t, action.fixation)).expect("JSON is UTF-8"))
    }

    /// Observes one frame record without planning.
    fn observe_frame(&mut self, line: &Bound<'_, PyAny>) -> PyResult<()> {
        let msg = core::parse_frame_message(&line_bytes(line)?).map_err(|e| PyValueError::new_err(e.to_string()))?;
        self.0.ingest_message(&msg).map(|_| ()).map_err(to_py_err)
    }
}

#[pyfunction]
fn block_info_gain(q: f64, sensor: PySensorModel) -> f64 {
    core::block_info_gain(q, &sensor.0)
}

/// Posterior presence after one soft observation of a single block.
#[pyfunction]
fn posterior_presence(prior: f64, evidence: f64, sensor: PySensorModel) -> f64 {
    core::posterior_presence(prior, evidence, &sensor.0)
}

/// Parses a frame record into a dict; raises `ValueError` when malformed.
#[pyfunction]
fn parse_frame_message<'py>(py: Python<'py>, line: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let msg = core::parse_frame_message(&line_bytes(line)?).map_err(|e| PyValueError::new_err(e.to_string()))?;
    json_to_py(py, &core::Message::Frame(msg))
}

/// Runs a scenario and returns `(trace_ndjson, summary)`.
#[pyfunction]
#[pyo3(signature = (scenario_json, steps, record_latency = false))]
fn run_episode<'py>(
    py: Python<'py>,
    scenario_json: &str,
    steps: usize,
    record_latency: bool,
) -> PyResult<(String, Bound<'py, PyAny>)> {
    let scenario = core::Scenario::from_json(scenario_json).map_err(to_py_err)?;
    let options = core::EpisodeOptions {
        record_latency,
        snapshots: true,
    };
    let trace = py
        .detach(|| core::run_episode(&scenario, steps, options))
        .map_err(to_py_err)?;
    Ok((trace.to_ndjson(), json_to_py(py, &trace.summary)?))
}

/// Times update plus planning on one grid; returns the report row as a dict.
#[pyfunction]
#[pyo3(signature = (grid, repetitions = 1000, seed = 0))]
fn bench_grid<'py>(py: Python<'py>, grid: PyGridSpec, repetitions: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let row = py
        .detach(|| core::bench::bench_grid(grid.0, repetitions, seed))
        .map_err(to_py_err)?;
    json_to_py(py, &row)
}

/// Active-inference saccade planning.
#[pymodule]
fn saccade(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGridSpec>()?;
    m.add_class::<PySensorModel>()?;
    m.add_class::<PyAgent>()?;
    m.add_function(wrap_pyfunction!(block_info_gain, m)?)?;
    m.add_function(wrap_pyfunction!(posterior_presence, m)?)?;
    m.add_function(wrap_pyfunction!(parse_frame_message, m)?)?;
    m.add_function(wrap_pyfunction!(run_episode, m)?)?;
    m.add_function(wrap_pyfunction!(bench_grid, m)?)?;
    Ok(())
}
