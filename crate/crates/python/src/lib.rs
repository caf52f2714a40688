use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use nsbandit::confidence::{self, Setting};
use nsbandit::glm::{link_constants, Link};
use nsbandit::harness::{run_experiment, summarize, ExperimentConfig};
use nsbandit::{Error, NormKind};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(_)
        | Error::DimensionMismatch { .. }
        | Error::Config(_)
        | Error::Parse(_)
        | Error::EmptyArmSet => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Discounted design matrix `V` and response vector `b`.
#[pyclass(name = "DesignState")]
struct PyDesignState {
    inner: nsbandit::DesignState,
}

#[pymethods]
impl PyDesignState {
    #[new]
    #[pyo3(signature = (dim, lam, gamma, track_vtilde = false))]
    fn new(dim: usize, lam: f64, gamma: f64, track_vtilde: bool) -> PyResult<Self> {
        let inner = nsbandit::DesignState::new(dim, lam, gamma, track_vtilde).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn update(&mut self, x: Vec<f64>, r: f64) -> PyResult<()> {
        self.inner.update(&x, r).map_err(to_py)
    }

    #[getter]
    fn round(&self) -> usize {
        self.inner.round()
    }

    /// Rows of `V`.
    fn v(&self) -> Vec<Vec<f64>> {
        let v = self.inner.v();
        v.row_iter().map(|row| row.iter().copied().collect()).collect()
    }

    fn b(&self) -> Vec<f64> {
        self.inner.b().iter().copied().collect()
    }

    /// `V⁻¹b`.
    fn ridge_solve(&self) -> PyResult<Vec<f64>> {
        Ok(self.inner.ridge_solve().map_err(to_py)?.iter().copied().collect())
    }

    /// `‖x‖_{V⁻¹}`.
    fn mnorm(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.mnorm(&x, NormKind::V).map_err(to_py)
    }
}

/// Discount factor from the tuning rule of `setting` ("LB", "GLB", "SCB", "SCB-PW").
#[pyfunction]
#[pyo3(signature = (setting, horizon, d, measure, k_mu = 1.0, c_mu = 1.0))]
fn tune_gamma(setting: &str, horizon: usize, d: usize, measure: f64, k_mu: f64, c_mu: f64) -> PyResult<f64> {
    let setting: Setting = setting.parse().map_err(to_py)?;
    confidence::tune_gamma(setting, horizon, d, measure, k_mu, c_mu).map_err(to_py)
}

/// `(c_mu, k_mu)` of the logistic link on parameters of norm at most `s`.
#[pyfunction]
#[pyo3(signature = (s, l = 1.0))]
fn logistic_constants(s: f64, l: f64) -> PyResult<(f64, f64)> {
    let c = link_constants(Link::LOGISTIC, s, l, 0.5, 1.0).map_err(to_py)?;
    Ok((c.c_mu, c.k_mu))
}

/// Runs a TOML experiment in memory and returns
/// `[(policy, mean_final_regret, std_final_regret, final_regrets)]`.
#[pyfunction]
#[pyo3(signature = (config, trials = None, seed = None))]
fn run(
    py: Python<'_>,
    config: &str,
    trials: Option<usize>,
    seed: Option<u64>,
) -> PyResult<Vec<(String, f64, f64, Vec<f64>)>> {
    let mut cfg = ExperimentConfig::from_toml_str(config).map_err(to_py)?;
    if let Some(n) = trials {
        cfg.n_trials = n;
    }
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    cfg.record_timing = false;
    cfg.validate().map_err(to_py)?;
    let summary = py
        .detach(|| run_experiment(&cfg).map(|out| summarize(&cfg, &out)))
        .map_err(to_py)?;
    Ok(summary
        .policies
        .into_iter()
        .map(|p| (p.policy, p.mean_final_regret, p.std_final_regret, p.final_regrets))
        .collect())
}

#[pymodule]
fn pynsbandit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDesignState>()?;
    m.add_function(wrap_pyfunction!(tune_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(logistic_constants, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
