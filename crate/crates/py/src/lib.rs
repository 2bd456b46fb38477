//! Python bindings: the environments, replicator field, estimators, and
//! the simulate/diagnose pipeline, driven by the same JSON configs as the
//! CLI.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use marl_dyn::cli_io::config::RunConfig;
use marl_dyn::coupled_sim;
use marl_dyn::diagnostics;
use marl_dyn::error::Error;
use marl_dyn::game_env::{self, StateId};
use marl_dyn::learners;
use marl_dyn::matrix::Matrix;
use marl_dyn::replicator;

fn to_py_err(e: Error) -> PyErr {
    match e.exit_code() {
        1 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn matrix_from_rows(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    Matrix::from_rows(&rows).map_err(to_py_err)
}

fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.iter_rows().map(|r| r.to_vec()).collect()
}

/// A 2x2 normal-form game.
#[pyclass(name = "MatrixGame")]
struct PyMatrixGame {
    inner: game_env::MatrixGame,
}

#[pymethods]
impl PyMatrixGame {
    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn zero_sum(&self) -> bool {
        self.inner.zero_sum
    }

    /// payoffs[agent][a0][a1]
    #[getter]
    fn payoffs(&self) -> Vec<Vec<Vec<f64>>> {
        self.inner
            .payoffs
            .iter()
            .map(|agent| agent.iter().map(|row| row.to_vec()).collect())
            .collect()
    }

    /// One-shot play: returns ((r0, r1), terminal).
    fn step(&self, a0: usize, a1: usize) -> PyResult<((f64, f64), bool)> {
        let game = game_env::Game::Matrix(self.inner.clone());
        // Matrix games consume no randomness; any env-noise stream works.
        let mut streams = marl_dyn::rng::RngStreams::new(0);
        let (_, r, terminal) = game_env::step(&game, StateId(0), [a0, a1], &mut streams.env_noise)
            .map_err(to_py_err)?;
        Ok(((r[0], r[1]), terminal))
    }
}

#[pyfunction]
fn make_matrix_game(name: &str) -> PyResult<PyMatrixGame> {
    Ok(PyMatrixGame {
        inner: game_env::make_matrix_game(name).map_err(to_py_err)?,
    })
}

#[pyfunction]
fn boltzmann_probs(q_row: Vec<f64>, temperature: f64) -> PyResult<Vec<f64>> {
    learners::boltzmann_probs(&q_row, temperature).map_err(to_py_err)
}

#[pyfunction]
fn replicator_rhs(game: &str, x: f64, y: f64) -> PyResult<(f64, f64)> {
    let game = game_env::make_matrix_game(game).map_err(to_py_err)?;
    replicator::replicator_rhs(replicator::ReplicatorState::new(x, y), &game).map_err(to_py_err)
}

/// RK4 integration of the replicator field; returns [(x, y), ...].
#[pyfunction]
fn integrate_rk4(game: &str, x0: f64, y0: f64, dt: f64, n_steps: usize) -> PyResult<Vec<(f64, f64)>> {
    let game = game_env::make_matrix_game(game).map_err(to_py_err)?;
    let traj = replicator::integrate_rk4(
        &game,
        replicator::ReplicatorState::new(x0, y0),
        dt,
        n_steps,
    )
    .map_err(to_py_err)?;
    Ok(traj.into_iter().map(|s| (s.x, s.y)).collect())
}

/// Replicator field samples: [(x, y, dx, dy), ...].
#[pyfunction]
fn vector_field(game: &str, resolution: usize) -> PyResult<Vec<(f64, f64, f64, f64)>> {
    let game = game_env::make_matrix_game(game).map_err(to_py_err)?;
    Ok(replicator::vector_field(&game, resolution)
        .map_err(to_py_err)?
        .points)
}

#[pyfunction]
fn delay_embed(series: Vec<f64>, m: usize, tau: usize) -> PyResult<Vec<Vec<f64>>> {
    Ok(matrix_to_rows(
        &diagnostics::delay_embed(&series, m, tau).map_err(to_py_err)?,
    ))
}

/// Nearest-neighbour divergence estimate of the maximal Lyapunov exponent.
#[pyfunction]
#[pyo3(signature = (trace, theiler_w=20, z_min=1, z_max=30))]
fn max_lyapunov(
    py: Python<'_>,
    trace: Vec<Vec<f64>>,
    theiler_w: usize,
    z_min: usize,
    z_max: usize,
) -> PyResult<Py<PyDict>> {
    let fit = diagnostics::max_lyapunov(&matrix_from_rows(trace)?, theiler_w, z_min, z_max)
        .map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("lambda_max", fit.lambda_max)?;
    out.set_item("curve", fit.curve)?;
    out.set_item("z_min", fit.z_min)?;
    out.set_item("z_max", fit.z_max)?;
    out.set_item("r_squared", fit.r_squared)?;
    Ok(out.into())
}

/// Correlation-dimension fit over a log-spaced radius range.
#[pyfunction]
#[pyo3(signature = (points, n_radii=24, theiler_w=20))]
fn correlation_dimension(
    py: Python<'_>,
    points: Vec<Vec<f64>>,
    n_radii: usize,
    theiler_w: usize,
) -> PyResult<Py<PyDict>> {
    let fit = diagnostics::correlation_dimension(&matrix_from_rows(points)?, n_radii, theiler_w)
        .map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("d2", fit.d2)?;
    out.set_item("radii", fit.radii)?;
    out.set_item("correlation_sums", fit.correlation_sums)?;
    out.set_item("window", fit.window)?;
    out.set_item("r_squared", fit.r_squared)?;
    out.set_item("degenerate", fit.degenerate)?;
    Ok(out.into())
}

/// Recurrence matrix with threshold chosen for the target rate; the
/// matrix itself is returned as a list of 0/1 rows.
#[pyfunction]
#[pyo3(signature = (trace, target_rate=0.08, theiler_mask_width=20))]
fn recurrence_matrix(
    py: Python<'_>,
    trace: Vec<Vec<f64>>,
    target_rate: f64,
    theiler_mask_width: usize,
) -> PyResult<Py<PyDict>> {
    let r = diagnostics::recurrence_matrix(&matrix_from_rows(trace)?, target_rate, theiler_mask_width)
        .map_err(to_py_err)?;
    let rows: Vec<Vec<u8>> = (0..r.n())
        .map(|i| (0..r.n()).map(|j| u8::from(r.get(i, j))).collect())
        .collect();
    let out = PyDict::new(py);
    out.set_item("epsilon", r.epsilon)?;
    out.set_item("target_rate", r.target_rate)?;
    out.set_item("achieved_rate", r.achieved_rate)?;
    out.set_item("theiler_mask_width", r.theiler_mask_width)?;
    out.set_item("matrix", rows)?;
    Ok(out.into())
}

/// Unbiased sample covariance and its Frobenius norm.
#[pyfunction]
fn covariance_frobenius(samples: Vec<Vec<f64>>) -> PyResult<(Vec<Vec<f64>>, f64)> {
    let (sigma, norm) = diagnostics::covariance_frobenius(&matrix_from_rows(samples)?)
        .map_err(to_py_err)?;
    Ok((matrix_to_rows(&sigma), norm))
}

/// 1-D or 2-D histogram density of pooled samples.
#[pyfunction]
#[pyo3(signature = (samples, bins, range=None))]
fn stationary_distribution(
    py: Python<'_>,
    samples: Vec<Vec<f64>>,
    bins: Vec<usize>,
    range: Option<Vec<(f64, f64)>>,
) -> PyResult<Py<PyDict>> {
    let density = diagnostics::stationary_distribution(
        &matrix_from_rows(samples)?,
        &bins,
        range.as_deref(),
    )
    .map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("bin_edges", density.bin_edges.clone())?;
    out.set_item("counts", density.counts.clone())?;
    out.set_item("density", density.density.clone())?;
    out.set_item("n_samples", density.n_samples)?;
    out.set_item("total_mass", density.total_mass())?;
    Ok(out.into())
}

fn parse_config(config_json: &str) -> PyResult<RunConfig> {
    RunConfig::from_json(config_json, "config").map_err(to_py_err)
}

/// Run one training realization from a JSON run config; returns a dict
/// with the recorded update indices and the joint parameter rows.
#[pyfunction]
fn run_training(py: Python<'_>, config_json: &str, run_index: usize) -> PyResult<Py<PyDict>> {
    let config = parse_config(config_json)?;
    let sim = config.to_sim_config().map_err(to_py_err)?;
    let trace = coupled_sim::run_training(&sim, run_index).map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("run_index", trace.run_index)?;
    out.set_item("derived_seed", trace.derived_seed)?;
    out.set_item("steps", trace.steps.clone())?;
    out.set_item("joint", matrix_to_rows(&trace.joint))?;
    let agents = PyList::new(py, trace.per_agent.iter().map(matrix_to_rows))?;
    out.set_item("per_agent", agents)?;
    Ok(out.into())
}

/// Run the full ensemble and diagnostics for a JSON run config; returns
/// the scalar report as a dict.
#[pyfunction]
fn diagnose(py: Python<'_>, config_json: &str) -> PyResult<Py<PyDict>> {
    let config = parse_config(config_json)?;
    let sim = config.to_sim_config().map_err(to_py_err)?;
    let ensemble = coupled_sim::run_ensemble(&sim).map_err(to_py_err)?;
    let report = diagnostics::diagnose(
        &ensemble,
        config.n_burn,
        config.record_stride,
        &config.diagnostics,
    )
    .map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("config_hash", report.config_hash.clone())?;
    out.set_item("n_runs_analyzed", report.n_runs_analyzed)?;
    out.set_item("n_diverged", report.n_diverged)?;
    out.set_item("frobenius_pooled", report.frobenius_pooled)?;
    out.set_item("frobenius_mean", report.frobenius.mean)?;
    out.set_item("frobenius_sd", report.frobenius.sd)?;
    out.set_item("lambda_max_mean", report.lambda_max.mean)?;
    out.set_item("lambda_max_sd", report.lambda_max.sd)?;
    out.set_item("lambda_max_values", report.lambda_max.values.clone())?;
    out.set_item("d2_mean", report.d2.mean)?;
    out.set_item("d2_sd", report.d2.sd)?;
    out.set_item("d2_values", report.d2.values.clone())?;
    if let Some(rec) = &report.recurrence {
        out.set_item("recurrence_epsilon", rec.epsilon)?;
        out.set_item("recurrence_achieved_rate", rec.achieved_rate)?;
    }
    Ok(out.into())
}

/// Canonical config echo: parse, fill defaults, return (json, hash).
#[pyfunction]
fn describe_config(config_json: &str) -> PyResult<(String, String)> {
    let config = parse_config(config_json)?;
    Ok((config.canonical_json(), config.hash()))
}

#[pymodule]
fn marl_dyn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMatrixGame>()?;
    m.add_function(wrap_pyfunction!(make_matrix_game, m)?)?;
    m.add_function(wrap_pyfunction!(boltzmann_probs, m)?)?;
    m.add_function(wrap_pyfunction!(replicator_rhs, m)?)?;
    m.add_function(wrap_pyfunction!(integrate_rk4, m)?)?;
    m.add_function(wrap_pyfunction!(vector_field, m)?)?;
    m.add_function(wrap_pyfunction!(delay_embed, m)?)?;
    m.add_function(wrap_pyfunction!(max_lyapunov, m)?)?;
    m.add_function(wrap_pyfunction!(correlation_dimension, m)?)?;
    m.add_function(wrap_pyfunction!(recurrence_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(covariance_frobenius, m)?)?;
    m.add_function(wrap_pyfunction!(stationary_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(run_training, m)?)?;
    m.add_function(wrap_pyfunction!(diagnose, m)?)?;
    m.add_function(wrap_pyfunction!(describe_config, m)?)?;
    Ok(())
}
