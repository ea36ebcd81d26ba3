//! Python bindings for `hmm-core`.
//!
//! Configuration mistakes raise `ValueError`; numerical failures (blow-ups,
//! off-grid reference lookups, degenerate sweeps) raise `ArithmeticError`.

use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;

use hmm_core as core;
use hmm_core::MultiscaleSystem;

fn to_py(e: core::HmmError) -> PyErr {
    if e.is_config_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyArithmeticError::new_err(e.to_string())
    }
}

fn parse<T: std::str::FromStr<Err = core::HmmError>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

/// Chain-form explicit Runge-Kutta tableau.
#[pyclass(name = "Tableau", module = "hmm_multiscale", from_py_object)]
#[derive(Clone)]
pub struct PyTableau {
    inner: core::ChainTableau,
}

#[pymethods]
impl PyTableau {
    #[new]
    fn new(order: u32, nodes: Vec<f64>, weights: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: core::ChainTableau::new(order, nodes, weights).map_err(to_py)?,
        })
    }

    /// `euler`, `rk2` or `rk4`.
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        Ok(Self {
            inner: parse::<core::BuiltinTableau>(name)?.tableau(),
        })
    }

    #[getter]
    fn order(&self) -> u32 {
        self.inner.order()
    }

    #[getter]
    fn nodes(&self) -> Vec<f64> {
        self.inner.nodes().to_vec()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    #[getter]
    fn stages(&self) -> usize {
        self.inner.stages()
    }

    /// One step of size `h` on `u' = f(u)` with a Python callable `f`.
    fn step(&self, u: f64, h: f64, f: &Bound<'_, PyAny>) -> PyResult<f64> {
        let mut err = None;
        let out = self.inner.step(u, h, |v| {
            match f.call1((v,)).and_then(|r| r.extract::<f64>()) {
                Ok(r) => r,
                Err(e) => {
                    err.get_or_insert(e);
                    f64::NAN
                }
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "Tableau(order={}, nodes={:?}, weights={:?})",
            self.inner.order(),
            self.inner.nodes(),
            self.inner.weights()
        )
    }
}

/// One of the built-in slow/fast systems.
#[pyclass(name = "System", module = "hmm_multiscale", from_py_object)]
#[derive(Clone)]
pub struct PySystem {
    inner: core::BuiltinSystem,
}

#[pymethods]
impl PySystem {
    /// `kind` is `linear_toy` or `michaelis_menten`.
    #[new]
    fn new(kind: &str, epsilon: f64) -> PyResult<Self> {
        Ok(Self {
            inner: core::builtin_system(parse(kind)?, epsilon).map_err(to_py)?,
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon()
    }

    #[getter]
    fn domain(&self) -> (f64, f64) {
        self.inner.domain()
    }

    fn slow_field(&self, x: f64, y: f64) -> f64 {
        self.inner.slow_field(x, y)
    }

    fn fast_field(&self, x: f64, y: f64) -> f64 {
        self.inner.fast_field(x, y)
    }

    fn h0(&self, x: f64) -> f64 {
        self.inner.manifold_h0(x)
    }

    fn h_eps(&self, x: f64) -> f64 {
        self.inner.manifold_h_eps(x)
    }

    /// `f(x, h(x))` with `manifold` either `h0` or `h_eps`.
    #[pyo3(signature = (x, manifold = "h_eps"))]
    fn reduced_field(&self, x: f64, manifold: &str) -> PyResult<f64> {
        core::reduced_field(&self.inner, x, parse(manifold)?).map_err(to_py)
    }

    fn default_initial_condition(&self) -> (f64, f64) {
        self.inner.default_initial_condition()
    }

    fn __repr__(&self) -> String {
        format!(
            "System({:?}, epsilon={:?})",
            self.inner.name(),
            self.inner.epsilon()
        )
    }
}

/// Macro tableau, micro solver and per-stage micro step counts.
#[pyclass(name = "Schedule", module = "hmm_multiscale", from_py_object)]
#[derive(Clone)]
pub struct PySchedule {
    inner: core::HmmSchedule,
}

#[pymethods]
impl PySchedule {
    /// A custom schedule; `stage_micro_steps[0]` must be at least 1.
    #[new]
    fn new(
        macro_tableau: &PyTableau,
        micro_tableau: &PyTableau,
        micro_step: f64,
        stage_micro_steps: Vec<usize>,
        macro_step: f64,
        n_steps: usize,
    ) -> PyResult<Self> {
        let micro =
            core::MicroSolver::new(micro_tableau.inner.clone(), micro_step).map_err(to_py)?;
        let inner = core::HmmSchedule::new(
            macro_tableau.inner.clone(),
            micro,
            stage_micro_steps,
            macro_step,
            n_steps,
            core::PresetLabel::Custom,
        )
        .map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn macro_step(&self) -> f64 {
        self.inner.macro_step()
    }

    #[getter]
    fn micro_step(&self) -> f64 {
        self.inner.micro().delta_t()
    }

    #[getter]
    fn n_steps(&self) -> usize {
        self.inner.n_steps()
    }

    #[getter]
    fn stage_micro_steps(&self) -> Vec<usize> {
        self.inner.stage_micro_steps().to_vec()
    }

    #[getter]
    fn final_time(&self) -> f64 {
        self.inner.final_time()
    }

    #[getter]
    fn label(&self) -> String {
        format!("{:?}", self.inner.label()).to_lowercase()
    }

    fn __repr__(&self) -> String {
        format!(
            "Schedule(label={:?}, stage_micro_steps={:?}, macro_step={:?}, n_steps={})",
            self.label(),
            self.inner.stage_micro_steps(),
            self.inner.macro_step(),
            self.inner.n_steps()
        )
    }
}

#[pyclass(
    name = "Trajectory",
    module = "hmm_multiscale",
    get_all,
    skip_from_py_object
)]
pub struct PyTrajectory {
    times: Vec<f64>,
    slow: Vec<f64>,
    fast: Vec<f64>,
    /// `(step, stage, d_before, d_after)` rows, or `None` without diagnostics.
    stage_distances: Option<Vec<(usize, usize, f64, f64)>>,
    slow_evals: u64,
    fast_evals: u64,
}

impl From<core::TrajectoryRecord> for PyTrajectory {
    fn from(r: core::TrajectoryRecord) -> Self {
        Self {
            stage_distances: r.stage_distances.map(|d| {
                d.into_iter()
                    .map(|s| (s.step, s.stage, s.before, s.after))
                    .collect()
            }),
            times: r.times,
            slow: r.slow,
            fast: r.fast,
            slow_evals: r.slow_evals,
            fast_evals: r.fast_evals,
        }
    }
}

#[pymethods]
impl PyTrajectory {
    fn __len__(&self) -> usize {
        self.times.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Trajectory({} points, final t={:?}, x={:?})",
            self.times.len(),
            self.times.last().unwrap_or(&0.0),
            self.slow.last().unwrap_or(&0.0)
        )
    }
}

#[pyclass(
    name = "BoundBreakdown",
    module = "hmm_multiscale",
    get_all,
    skip_from_py_object
)]
pub struct PyBound {
    term_macro: f64,
    term_relax: f64,
    term_eps: f64,
    dominant: String,
    within_hypothesis: bool,
}

impl From<core::BoundBreakdown> for PyBound {
    fn from(b: core::BoundBreakdown) -> Self {
        Self {
            term_macro: b.term_macro,
            term_relax: b.term_relax,
            term_eps: b.term_eps,
            dominant: b.dominant.name().to_string(),
            within_hypothesis: b.within_hypothesis,
        }
    }
}

#[pymethods]
impl PyBound {
    fn total(&self) -> f64 {
        self.term_macro + self.term_relax + self.term_eps
    }

    fn __repr__(&self) -> String {
        format!(
            "BoundBreakdown(term_macro={:?}, term_relax={:?}, term_eps={:?}, dominant={:?})",
            self.term_macro, self.term_relax, self.term_eps, self.dominant
        )
    }
}

#[pyclass(name = "Fit", module = "hmm_multiscale", get_all, skip_from_py_object)]
pub struct PyFit {
    slope: f64,
    intercept: f64,
    r_squared: f64,
}

#[pymethods]
impl PyFit {
    fn __repr__(&self) -> String {
        format!(
            "Fit(slope={:?}, intercept={:?}, r_squared={:?})",
            self.slope, self.intercept, self.r_squared
        )
    }
}

#[pyclass(
    name = "SweepResult",
    module = "hmm_multiscale",
    get_all,
    skip_from_py_object
)]
pub struct PySweep {
    method: String,
    parameters: Vec<f64>,
    errors: Vec<f64>,
    macro_steps: Vec<f64>,
    n_steps: Vec<usize>,
    slope: f64,
    intercept: f64,
    r_squared: f64,
    /// The sweep in the CLI's CSV format.
    csv: String,
}

#[pymethods]
impl PySweep {
    fn __repr__(&self) -> String {
        format!(
            "SweepResult(method={:?}, {} points, slope={:?})",
            self.method,
            self.parameters.len(),
            self.slope
        )
    }
}

/// `sum_{j<=p} z^j / j!`.
#[pyfunction]
fn rho_factor(p: u32, z: f64) -> f64 {
    core::rho_factor(p, z)
}

/// Smallest `M` with `|rho_factor(p, z)|^M <= target`.
#[pyfunction]
fn relaxation_steps_needed(p: u32, z: f64, target: f64) -> PyResult<u64> {
    core::relaxation_steps_needed(p, z, target).map_err(to_py)
}

/// Schedule for `ba`, `hmm1` or `hmm2` with HMM macro step `dt` up to `t_end`.
#[pyfunction]
#[pyo3(signature = (method, macro_tableau, micro_tableau, epsilon, dt_ratio, m, dt, t_end))]
#[allow(clippy::too_many_arguments)]
fn make_preset(
    method: &str,
    macro_tableau: &PyTableau,
    micro_tableau: &PyTableau,
    epsilon: f64,
    dt_ratio: f64,
    m: usize,
    dt: f64,
    t_end: f64,
) -> PyResult<PySchedule> {
    let inner = core::make_preset(
        parse(method)?,
        macro_tableau.inner.clone(),
        micro_tableau.inner.clone(),
        epsilon,
        dt_ratio,
        m,
        dt,
        t_end,
    )
    .map_err(to_py)?;
    Ok(PySchedule { inner })
}

/// The fast value after `steps` micro steps of size `micro_step` at frozen `x`.
#[pyfunction]
fn micro_flow(
    system: &PySystem,
    tableau: &PyTableau,
    micro_step: f64,
    steps: usize,
    x: f64,
    y0: f64,
) -> PyResult<f64> {
    let cfg = core::MicroConfig::new(tableau.inner.clone(), micro_step, steps).map_err(to_py)?;
    core::micro_flow(&system.inner, &cfg, x, y0).map_err(to_py)
}

/// One macro step; returns `(x_next, y_next)`.
#[pyfunction]
fn hmm_step(system: &PySystem, schedule: &PySchedule, x: f64, y: f64) -> PyResult<(f64, f64)> {
    let out = core::hmm_step(&system.inner, &schedule.inner, x, y, false).map_err(to_py)?;
    Ok((out.x, out.y))
}

#[pyfunction]
#[pyo3(signature = (system, schedule, x0, y0, diagnostics = false))]
fn integrate(
    py: Python<'_>,
    system: &PySystem,
    schedule: &PySchedule,
    x0: f64,
    y0: f64,
    diagnostics: bool,
) -> PyResult<PyTrajectory> {
    let (sys, sched) = (system.inner, schedule.inner.clone());
    py.detach(move || core::integrate(&sys, &sched, x0, y0, diagnostics))
        .map(Into::into)
        .map_err(to_py)
}

/// Boosting read as a time rescaling of the coupled system; see the Rust docs.
#[pyfunction]
fn integrate_rescaled(
    py: Python<'_>,
    system: &PySystem,
    schedule: &PySchedule,
    x0: f64,
    y0: f64,
) -> PyResult<PyTrajectory> {
    let (sys, sched) = (system.inner, schedule.inner.clone());
    py.detach(move || core::integrate_rescaled(&sys, &sched, x0, y0))
        .map(Into::into)
        .map_err(to_py)
}

/// RK4 solution of the reduced system on the grid `0, step, ..., t_end`.
#[pyfunction]
#[pyo3(signature = (system, x0, t_end, step, manifold = "h_eps"))]
fn reference_solution(
    system: &PySystem,
    x0: f64,
    t_end: f64,
    step: f64,
    manifold: &str,
) -> PyResult<Vec<f64>> {
    let cfg = core::ReferenceConfig {
        manifold: parse(manifold)?,
        ..core::ReferenceConfig::rk4(step)
    };
    let r = core::reference_solution(&system.inner, &cfg, x0, t_end).map_err(to_py)?;
    Ok(r.values().to_vec())
}

#[pyfunction]
#[pyo3(signature = (method, macro_order, micro_order, epsilon, dt_ratio, m, dt))]
fn predict_bound(
    method: &str,
    macro_order: u32,
    micro_order: u32,
    epsilon: f64,
    dt_ratio: f64,
    m: usize,
    dt: f64,
) -> PyResult<PyBound> {
    Ok(core::predict_bound(
        parse(method)?,
        macro_order,
        micro_order,
        epsilon,
        dt_ratio,
        m,
        dt,
    )
    .into())
}

/// Least-squares line through `(ln parameter, ln error)`.
#[pyfunction]
fn fit_loglog(points: Vec<(f64, f64)>) -> PyResult<PyFit> {
    let f = core::fit_loglog(&points).map_err(to_py)?;
    Ok(PyFit {
        slope: f.slope,
        intercept: f.intercept,
        r_squared: f.r_squared,
    })
}

/// Names of the built-in experiment presets.
#[pyfunction]
fn presets() -> Vec<&'static str> {
    core::Preset::ALL.iter().map(|p| p.name()).collect()
}

/// Config file text for a preset.
#[pyfunction]
fn preset_config(name: &str) -> PyResult<String> {
    Ok(core::emit_config(&parse::<core::Preset>(name)?.config()))
}

/// Parses and re-emits config text, validating it on the way.
#[pyfunction]
fn normalize_config(text: &str) -> PyResult<String> {
    Ok(core::emit_config(&core::parse_config(text).map_err(to_py)?))
}

fn experiment_from(config: &str) -> PyResult<core::ConfigFile> {
    match config.parse::<core::Preset>() {
        Ok(p) => Ok(p.config()),
        Err(_) => core::parse_config(config).map_err(to_py),
    }
}

/// Runs one experiment given a preset name or config text.
///
/// Returns a dict with `final_error`, `reference_final`, `reference_step`,
/// `trajectory` and `bound`.
#[pyfunction]
#[pyo3(signature = (config, method = None))]
fn run_experiment<'py>(
    py: Python<'py>,
    config: &str,
    method: Option<&str>,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let mut exp = experiment_from(config)?.experiment;
    if let Some(m) = method {
        exp.method = parse(m)?;
    }
    let r = py
        .detach(move || core::harness::run_experiment(&exp))
        .map_err(to_py)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("final_error", r.final_error)?;
    d.set_item("reference_final", r.reference_final)?;
    d.set_item("reference_step", r.reference_step)?;
    d.set_item("bound", Py::new(py, PyBound::from(r.bound))?)?;
    d.set_item("trajectory", Py::new(py, PyTrajectory::from(r.trajectory))?)?;
    Ok(d)
}

/// Runs the sweep of a preset name or config text for one method.
///
/// Without `values`, the preset's or config's `[sweep]` grid is used.
#[pyfunction]
#[pyo3(signature = (config, method, values = None, vary = None))]
fn run_sweep(
    py: Python<'_>,
    config: &str,
    method: &str,
    values: Option<Vec<f64>>,
    vary: Option<&str>,
) -> PyResult<PySweep> {
    let cfg = experiment_from(config)?;
    let mut base = cfg.experiment;
    base.method = parse(method)?;
    let vary = match (vary, &cfg.sweep) {
        (Some(v), _) => parse(v)?,
        (None, Some(s)) => s.vary,
        (None, None) => core::Vary::MacroStep,
    };
    let values = match (values, cfg.sweep) {
        (Some(v), _) => v,
        (None, Some(s)) => s.values,
        (None, None) => return Err(PyValueError::new_err("no sweep values given")),
    };
    let spec = core::SweepSpec { base, vary, values };
    let out = py.detach(move || core::run_sweep(&spec)).map_err(to_py)?;
    Ok(PySweep {
        method: method.to_string(),
        parameters: out.rows.iter().map(|r| r.parameter).collect(),
        errors: out.rows.iter().map(|r| r.error).collect(),
        macro_steps: out.rows.iter().map(|r| r.macro_step).collect(),
        n_steps: out.rows.iter().map(|r| r.n_steps).collect(),
        slope: out.fit.slope,
        intercept: out.fit.intercept,
        r_squared: out.fit.r_squared,
        csv: core::harness::sweep_csv(&out),
    })
}

/// Practical relaxation assumption; returns `(lhs, rhs, passed)`.
#[pyfunction]
#[pyo3(signature = (system, schedule, l_f, c_f, l_h, d0))]
fn check_practical_assumptions(
    system: &PySystem,
    schedule: &PySchedule,
    l_f: f64,
    c_f: f64,
    l_h: f64,
    d0: f64,
) -> PyResult<(f64, f64, bool)> {
    let lip = core::LipschitzData::new(l_f, c_f, l_h).map_err(to_py)?;
    let r = core::check_practical_assumptions(&system.inner, &schedule.inner, &lip, d0);
    Ok((r.lhs, r.rhs, r.pass))
}

#[pymodule]
mod hmm_multiscale {
    #[pymodule_export]
    use super::{
        check_practical_assumptions, fit_loglog, hmm_step, integrate, integrate_rescaled,
        make_preset, micro_flow, normalize_config, predict_bound, preset_config, presets,
        reference_solution, relaxation_steps_needed, rho_factor, run_experiment, run_sweep,
        PyBound, PyFit, PySchedule, PySweep, PySystem, PyTableau, PyTrajectory,
    };
}
