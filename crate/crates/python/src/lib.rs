//! Python bindings for `pi2lab`.
//!
//! Times are seconds and rates packets per second, as in the Rust crate.
//! Structured results (reports, simulation statistics) come back as JSON
//! strings.

use std::collections::HashMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use pi2lab::aqm::{classic_drop_prob, pi2_update, Pi2Config, Pi2State};
use pi2lab::cc_models::{self, CcMode, CcParams};
use pi2lab::dataset::{weighted_summary, DatasetSource};
use pi2lab::geometry::{self, RttKind};
use pi2lab::sim::{measure_cycles, sim_run, SimScenario};
use pi2lab::target::{self, MixEntry, Rounding, RtypProvenance, TargetInputs};

fn to_py(e: pi2lab::Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn json<T: serde::Serialize>(value: &T) -> PyResult<String> {
    serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Controller constants. Build with `Controller("creno")` or give explicit
/// `a`, `b`, `c`.
#[pyclass(name = "Controller", module = "pi2lab_py")]
struct PyController {
    inner: CcParams,
}

#[pymethods]
impl PyController {
    #[new]
    #[pyo3(signature = (cc, a=None, b=None, c=None, hybrid=false))]
    fn new(cc: &str, a: Option<f64>, b: Option<f64>, c: Option<f64>, hybrid: bool) -> PyResult<Self> {
        let mode: CcMode = cc.parse().map_err(to_py)?;
        let d = CcParams::for_mode(mode);
        let mut inner =
            CcParams::new(mode, a.unwrap_or(d.a), b.unwrap_or(d.b), c.unwrap_or(d.c)).map_err(to_py)?;
        inner.hybrid = hybrid;
        inner.validate().map_err(to_py)?;
        Ok(PyController { inner })
    }

    #[getter]
    fn cc(&self) -> &'static str {
        self.inner.mode.name()
    }

    #[getter]
    fn a(&self) -> f64 {
        self.inner.a
    }

    #[getter]
    fn b(&self) -> f64 {
        self.inner.b
    }

    #[getter]
    fn c(&self) -> f64 {
        self.inner.c
    }

    #[getter]
    fn hybrid(&self) -> bool {
        self.inner.hybrid
    }

    /// Mean excess delay as a fraction of the sawtooth amplitude.
    fn lambda0(&self) -> PyResult<f64> {
        geometry::lambda0_for(&self.inner).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!("Controller('{}', a={}, b={}, c={}, hybrid={})", p.mode, p.a, p.b, p.c, p.hybrid)
    }
}

/// PI2 controller configuration plus its running state.
#[pyclass(name = "Pi2", module = "pi2lab_py")]
struct PyPi2 {
    cfg: Pi2Config,
    state: Pi2State,
}

#[pymethods]
impl PyPi2 {
    #[new]
    #[pyo3(signature = (target=0.015, tupdate=0.016, rmax=0.1))]
    fn new(target: f64, tupdate: f64, rmax: f64) -> PyResult<Self> {
        let cfg = Pi2Config::new(target, tupdate, rmax).map_err(to_py)?;
        Ok(PyPi2 { cfg, state: Pi2State::default() })
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.cfg.alpha
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.cfg.beta
    }

    #[getter]
    fn p_base(&self) -> f64 {
        self.state.p_base
    }

    /// Feeds one queue-delay sample and returns the Classic drop probability.
    fn update(&mut self, qdelay: f64) -> PyResult<f64> {
        self.state = pi2_update(self.state, qdelay, &self.cfg).map_err(to_py)?;
        Ok(classic_drop_prob(&self.state))
    }

    fn reset(&mut self) {
        self.state = Pi2State::default();
    }
}

fn params_or(cc: Option<&PyController>, mode: CcMode) -> CcParams {
    cc.map_or_else(|| CcParams::for_mode(mode), |c| c.inner)
}

#[pyfunction]
fn rate_creno(p: f64, rtt: f64) -> PyResult<f64> {
    cc_models::rate_creno(p, rtt).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (p, rtt, cc=None))]
fn rate_cubic(p: f64, rtt: f64, cc: Option<PyRef<'_, PyController>>) -> PyResult<f64> {
    cc_models::rate_cubic(p, rtt, &params_or(cc.as_deref(), CcMode::Cubic)).map_err(to_py)
}

/// RTT at which CReno and Cubic reach `rate` at the same loss probability.
#[pyfunction]
#[pyo3(signature = (rate, cc=None, approx=false))]
fn switchover_rtt(rate: f64, cc: Option<PyRef<'_, PyController>>, approx: bool) -> PyResult<f64> {
    if approx {
        return cc_models::switchover_rtt_approx(rate).map_err(to_py);
    }
    cc_models::switchover_rtt(rate, &params_or(cc.as_deref(), CcMode::Cubic)).map_err(to_py)
}

#[pyfunction]
fn lambda0(cc: &str) -> PyResult<f64> {
    let mode: CcMode = cc.parse().map_err(to_py)?;
    geometry::lambda0_for(&CcParams::for_mode(mode)).map_err(to_py)
}

/// Sawtooth recovery time; `kind` names which RTT `rtt` is (min, max, avg).
#[pyfunction]
#[pyo3(signature = (rate, rtt, cc, kind="avg"))]
fn recovery_time(rate: f64, rtt: f64, cc: PyRef<'_, PyController>, kind: &str) -> PyResult<f64> {
    let kind: RttKind = kind.parse().map_err(to_py)?;
    geometry::recovery_time(rate, rtt, kind, &cc.inner).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (rate, cc, target=0.015, tupdate=0.016, rmax=0.1))]
fn transition_region(
    rate: f64,
    cc: PyRef<'_, PyController>,
    target: f64,
    tupdate: f64,
    rmax: f64,
) -> PyResult<(f64, f64)> {
    let cfg = Pi2Config::new(target, tupdate, rmax).map_err(to_py)?;
    let t = geometry::transition_region(rate, &cfg, &cc.inner).map_err(to_py)?;
    Ok((t.rtt_floor, t.rtt_center))
}

#[pyfunction]
fn geometry_factor(lam: f64, b: f64) -> PyResult<f64> {
    target::geometry_factor(lam, b).map_err(to_py)
}

fn inputs(r_typ: f64, f: f64, weights: Option<HashMap<String, f64>>) -> PyResult<TargetInputs> {
    let mut inputs = TargetInputs { r_typ, f, ..TargetInputs::default() };
    if let Some(w) = weights {
        let mut mix = Vec::new();
        for (name, weight) in w {
            let mode: CcMode = name.parse().map_err(to_py)?;
            mix.push(MixEntry::for_controller(mode, weight));
        }
        mix.sort_by_key(|e| e.controller.name());
        inputs.mix = mix;
    }
    Ok(inputs)
}

/// Recommended PI2 target in seconds for a typical base RTT `r_typ`.
#[pyfunction]
#[pyo3(signature = (r_typ, f=2.0, weights=None))]
fn recommend_target(r_typ: f64, f: f64, weights: Option<HashMap<String, f64>>) -> PyResult<f64> {
    target::recommend_target(&inputs(r_typ, f, weights)?).map_err(to_py)
}

/// Full target report as JSON.
#[pyfunction]
#[pyo3(signature = (r_typ, f=2.0, weights=None, staged_rounding=false))]
fn target_report(
    r_typ: f64,
    f: f64,
    weights: Option<HashMap<String, f64>>,
    staged_rounding: bool,
) -> PyResult<String> {
    let rounding = if staged_rounding { Rounding::Staged } else { Rounding::Full };
    let report = target::build_report(&inputs(r_typ, f, weights)?, rounding, RtypProvenance::Explicit)
        .map_err(to_py)?;
    json(&report)
}

/// User-weighted RTT (ms) and bandwidth (Mb/s) of the bundled or given dataset.
#[pyfunction]
#[pyo3(signature = (path=None, exclude=vec!["China".to_string()]))]
fn dataset_summary(path: Option<PathBuf>, exclude: Vec<String>) -> PyResult<HashMap<String, f64>> {
    let records = DatasetSource::resolve(path.as_deref()).and_then(|s| s.records()).map_err(to_py)?;
    let s = weighted_summary(&records, &exclude).map_err(to_py)?;
    Ok(HashMap::from([
        ("weighted_rtt_ms".to_string(), s.weighted_rtt_ms),
        ("weighted_bw_mbps".to_string(), s.weighted_bw_mbps),
        ("total_users".to_string(), s.total_users as f64),
    ]))
}

/// Runs a scenario given in the `key = value` format and returns the cycle
/// statistics as JSON. `overrides` are applied as with `pi2lab sim --set`.
#[pyfunction]
#[pyo3(signature = (scenario, overrides=None))]
fn simulate(py: Python<'_>, scenario: &str, overrides: Option<HashMap<String, String>>) -> PyResult<String> {
    let mut pairs: Vec<(String, String)> = overrides.unwrap_or_default().into_iter().collect();
    pairs.sort();
    let s = SimScenario::parse_with_overrides(scenario, &pairs).map_err(to_py)?;
    let stats = py
        .detach(|| sim_run(&s).and_then(|trace| measure_cycles(&trace)))
        .map_err(to_py)?;
    json(&stats)
}

#[pymodule]
fn pi2lab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyController>()?;
    m.add_class::<PyPi2>()?;
    m.add_function(wrap_pyfunction!(rate_creno, m)?)?;
    m.add_function(wrap_pyfunction!(rate_cubic, m)?)?;
    m.add_function(wrap_pyfunction!(switchover_rtt, m)?)?;
    m.add_function(wrap_pyfunction!(lambda0, m)?)?;
    m.add_function(wrap_pyfunction!(recovery_time, m)?)?;
    m.add_function(wrap_pyfunction!(transition_region, m)?)?;
    m.add_function(wrap_pyfunction!(geometry_factor, m)?)?;
    m.add_function(wrap_pyfunction!(recommend_target, m)?)?;
    m.add_function(wrap_pyfunction!(target_report, m)?)?;
    m.add_function(wrap_pyfunction!(dataset_summary, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
