//! Python bindings. Build with `maturin develop` (see `pyproject.toml`).

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use nomamimo::experiments::config::ConfigFile;
use nomamimo::experiments::{svg, ExperimentKind, ExperimentSpec};
use nomamimo::rates::{self, Csi};
use nomamimo::rng::{substream, Purpose};
use nomamimo::scenario::{self as sc, SnrDistribution};
use nomamimo::{power, PlacementSpec, ScenarioParams, Scheme};

fn err(e: nomamimo::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn scheme(name: &str) -> PyResult<Scheme> {
    match name {
        "noma" => Ok(Scheme::Noma),
        "mmimo" => Ok(Scheme::MassiveMimo),
        other => Err(PyValueError::new_err(format!("scheme must be 'noma' or 'mmimo', got {other:?}"))),
    }
}

fn csi(name: &str) -> PyResult<Csi> {
    match name {
        "perfect_at_bs" => Ok(Csi::PerfectAtBs),
        "estimated" => Ok(Csi::Estimated),
        other => Err(PyValueError::new_err(format!("csi must be 'perfect_at_bs' or 'estimated', got {other:?}"))),
    }
}

fn kind(name: &str) -> PyResult<ExperimentKind> {
    ExperimentKind::ALL
        .into_iter()
        .find(|k| k.name() == name)
        .ok_or_else(|| PyValueError::new_err(format!("unknown experiment {name:?}")))
}

/// Validated simulation scenario.
#[pyclass(name = "Scenario", module = "nomamimo_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyScenario(nomamimo::Scenario);

#[pymethods]
impl PyScenario {
    #[new]
    #[pyo3(signature = (antennas, betas, coherence = 100, p_max = 1.0, seed = 1, trials = 10_000, pilot_powers = None))]
    fn new(
        antennas: usize,
        betas: Vec<f64>,
        coherence: usize,
        p_max: f64,
        seed: u64,
        trials: usize,
        pilot_powers: Option<Vec<f64>>,
    ) -> PyResult<Self> {
        let users = betas.len();
        ScenarioParams { antennas, users, coherence, p_max, pilot_powers, betas, seed, trials }
            .build()
            .map(PyScenario)
            .map_err(err)
    }

    #[getter]
    fn antennas(&self) -> usize {
        self.0.antennas()
    }
    #[getter]
    fn users(&self) -> usize {
        self.0.users()
    }
    #[getter]
    fn coherence(&self) -> usize {
        self.0.coherence()
    }
    #[getter]
    fn p_max(&self) -> f64 {
        self.0.p_max()
    }
    #[getter]
    fn betas(&self) -> Vec<f64> {
        self.0.betas().to_vec()
    }
    #[getter]
    fn pilot_powers(&self) -> Vec<f64> {
        self.0.pilot_powers().to_vec()
    }
    #[getter]
    fn seed(&self) -> u64 {
        self.0.seed()
    }
    #[getter]
    fn trials(&self) -> usize {
        self.0.trials()
    }
    /// Data fraction `1 - K/T`.
    #[getter]
    fn tau(&self) -> f64 {
        self.0.tau()
    }

    fn with_antennas(&self, antennas: usize) -> PyResult<Self> {
        self.0.with_antennas(antennas).map(PyScenario).map_err(err)
    }
    fn with_seed(&self, seed: u64) -> Self {
        PyScenario(self.0.with_seed(seed))
    }
    fn with_trials(&self, trials: usize) -> PyResult<Self> {
        self.0.with_trials(trials).map(PyScenario).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(antennas={}, users={}, coherence={}, p_max={}, seed={}, trials={})",
            self.0.antennas(),
            self.0.users(),
            self.0.coherence(),
            self.0.p_max(),
            self.0.seed(),
            self.0.trials()
        )
    }
}

/// Per-user rates in bit/symbol, already scaled by the data fraction.
#[pyclass(name = "RateReport", module = "nomamimo_py", frozen, get_all)]
struct PyRateReport {
    scheme: String,
    method: String,
    per_user_rates: Vec<f64>,
    sum_rate: f64,
    trials_used: usize,
    standard_error: Option<Vec<f64>>,
}

#[pymethods]
impl PyRateReport {
    fn __repr__(&self) -> String {
        format!("RateReport(scheme={:?}, method={:?}, sum_rate={})", self.scheme, self.method, self.sum_rate)
    }
}

impl From<rates::RateReport> for PyRateReport {
    fn from(r: rates::RateReport) -> Self {
        PyRateReport {
            scheme: r.scheme.as_str().to_string(),
            method: r.method.as_str().to_string(),
            per_user_rates: r.per_user_rates,
            sum_rate: r.sum_rate,
            trials_used: r.trials_used,
            standard_error: r.standard_error,
        }
    }
}

/// Closed-form antenna count above which massive MIMO beats NOMA (two users).
/// Returns `(value, ceil)`.
#[pyfunction]
fn m_star(beta1: f64, beta2: f64, p_max: f64) -> PyResult<(f64, usize)> {
    rates::m_star(beta1, beta2, p_max).map(|m| (m.value, m.ceil)).map_err(err)
}

/// Two-user closed-form sum rates `(noma, mmimo)` at the split `(p1, p_max - p1)`.
#[pyfunction]
fn two_user_sum_rates(scn: &PyScenario, p1: f64) -> PyResult<(f64, f64)> {
    rates::two_user_sum_rates(&scn.0, p1).map(|r| (r.noma, r.mmimo)).map_err(err)
}

#[pyfunction]
fn waterfill(gains: Vec<f64>, budget: f64) -> Vec<f64> {
    power::waterfill(&gains, budget)
}

/// Optimal sum-rate allocation; returns `(powers, report)`.
#[pyfunction]
fn solve_p1(scn: &PyScenario, scheme_name: &str) -> PyResult<(Vec<f64>, PyRateReport)> {
    let (alloc, report) = power::solve_p1(&scn.0, scheme(scheme_name)?).map_err(err)?;
    Ok((alloc.powers, report.into()))
}

#[pyfunction]
fn noma_bounds(scn: &PyScenario, powers: Vec<f64>) -> PyResult<PyRateReport> {
    rates::noma_bounds(&scn.0, &powers).map(Into::into).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (scn, powers, gammas = None))]
fn mmimo_rate_cf(scn: &PyScenario, powers: Vec<f64>, gammas: Option<Vec<f64>>) -> PyResult<PyRateReport> {
    let gammas = gammas.unwrap_or_else(|| vec![1.0; scn.0.users()]);
    rates::mmimo_rate_cf(&scn.0, &powers, &gammas).map(Into::into).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (scn, scheme_name, powers, csi_name = "perfect_at_bs"))]
fn ergodic_rates_mc(py: Python<'_>, scn: &PyScenario, scheme_name: &str, powers: Vec<f64>, csi_name: &str) -> PyResult<PyRateReport> {
    let (s, c) = (scheme(scheme_name)?, csi(csi_name)?);
    let scn = scn.0.clone();
    py.detach(move || rates::ergodic_rates_mc(&scn, s, &powers, c)).map(Into::into).map_err(err)
}

/// Per group: `(rate_at_center, rate_at_edge, margin, margin_std_error, feasible)`.
#[pyfunction]
#[pyo3(signature = (scn, powers, csi_name = "perfect_at_bs"))]
fn sic_feasible(py: Python<'_>, scn: &PyScenario, powers: Vec<f64>, csi_name: &str) -> PyResult<Vec<(f64, f64, f64, f64, bool)>> {
    let c = csi(csi_name)?;
    let scn = scn.0.clone();
    let checks = py.detach(move || rates::sic_feasible(&scn, &powers, c)).map_err(err)?;
    Ok(checks
        .into_iter()
        .map(|c| (c.rate_at_center, c.rate_at_edge, c.margin, c.margin_std_error, c.feasible))
        .collect())
}

/// Random ordered betas for `users` users; `(seed, index)` addresses the draw.
#[pyfunction]
#[pyo3(signature = (users, p_max, seed, index = 0, center_snr_db = (15.0, 26.0), edge_snr_db = (-5.0, 15.0), path_loss_exponent = None))]
fn sample_placement(
    users: usize,
    p_max: f64,
    seed: u64,
    index: u64,
    center_snr_db: (f64, f64),
    edge_snr_db: (f64, f64),
    path_loss_exponent: Option<f64>,
) -> PyResult<Vec<f64>> {
    let spec = PlacementSpec {
        center_snr_db,
        edge_snr_db,
        distribution: path_loss_exponent.map_or(SnrDistribution::UniformDb, |a| SnrDistribution::UniformArea { path_loss_exponent: a }),
    };
    sc::sample_placement(&spec, users, p_max, &mut substream(seed, Purpose::Placement, index)).map_err(err)
}

/// Run an experiment and return its CSV text. `config` is TOML text in the
/// same format the CLI reads.
#[pyfunction]
#[pyo3(signature = (name, config = None, seed = None, trials = None, placements = None))]
fn run_experiment(
    py: Python<'_>,
    name: &str,
    config: Option<&str>,
    seed: Option<u64>,
    trials: Option<usize>,
    placements: Option<usize>,
) -> PyResult<String> {
    let k = kind(name)?;
    let mut spec = match config {
        Some(text) => ConfigFile::parse(text).and_then(|c| c.experiment(k)).map_err(err)?,
        None => ExperimentSpec::default_for(k),
    };
    if let Some(s) = seed {
        spec.scenario = spec.scenario.with_seed(s);
    }
    if let Some(t) = trials {
        spec.scenario = spec.scenario.with_trials(t).map_err(err)?;
    }
    if let Some(p) = placements {
        spec.placements = p;
    }
    py.detach(move || spec.run()).map(|t| t.to_csv()).map_err(err)
}

#[pyfunction]
fn render_svg(name: &str, csv: &str) -> PyResult<String> {
    svg::render_svg(kind(name)?, csv).map_err(err)
}

#[pymodule]
pub fn nomamimo_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PyRateReport>()?;
    m.add_function(wrap_pyfunction!(m_star, m)?)?;
    m.add_function(wrap_pyfunction!(two_user_sum_rates, m)?)?;
    m.add_function(wrap_pyfunction!(waterfill, m)?)?;
    m.add_function(wrap_pyfunction!(solve_p1, m)?)?;
    m.add_function(wrap_pyfunction!(noma_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(mmimo_rate_cf, m)?)?;
    m.add_function(wrap_pyfunction!(ergodic_rates_mc, m)?)?;
    m.add_function(wrap_pyfunction!(sic_feasible, m)?)?;
    m.add_function(wrap_pyfunction!(sample_placement, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(render_svg, m)?)?;
    Ok(())
}
