//! Python bindings for the survival engine: curve algebra, event-time
//! prediction, metrics, synthetic cohorts, and train/predict round trips.
//!
//! Everything crosses the boundary as plain lists, dicts, strings, and file
//! paths so the module works without any array dependency.

use std::collections::HashMap;
use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ttesurv::data::{apply_scaler, fit_scaler, load_longitudinal_csv, split_cohort, SplitSpec};
use ttesurv::metrics::{evaluate_all, RecordEval};
use ttesurv::model::{Checkpoint, ModelConfig};
use ttesurv::predict::{PredictorSpec, TtePrediction};
use ttesurv::survival::{HazardSequence, SurvivalCurve, TimeGrid};
use ttesurv::synthetic::SyntheticSpec;

fn err(e: ttesurv::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn curve(values: Vec<f64>) -> PyResult<SurvivalCurve> {
    SurvivalCurve::new(values).map_err(err)
}

/// Survival curve S(1..Θ) from per-interval hazards.
#[pyfunction]
fn hazard_to_survival(hazards: Vec<f64>) -> PyResult<Vec<f64>> {
    let h = HazardSequence::new(hazards).map_err(err)?;
    Ok(ttesurv::survival::hazard_to_survival(&h).values().to_vec())
}

/// Per-interval hazards recovered from a survival curve.
#[pyfunction]
fn survival_to_hazard(survival: Vec<f64>) -> PyResult<Vec<f64>> {
    let s = curve(survival)?;
    Ok(ttesurv::survival::survival_to_hazard(&s).values().to_vec())
}

/// First-hitting-time probability mass for each interval.
#[pyfunction]
fn event_time_pmf(hazards: Vec<f64>) -> PyResult<Vec<f64>> {
    let h = HazardSequence::new(hazards).map_err(err)?;
    Ok(ttesurv::survival::event_time_pmf(&h))
}

/// The (e_row, c_row) training target for an outcome at `t`.
#[pyfunction]
fn build_label_matrix(t: usize, event: bool, horizon: usize) -> PyResult<(Vec<u8>, Vec<u8>)> {
    let grid = TimeGrid::with_horizon(horizon).map_err(err)?;
    let label = ttesurv::survival::build_label_matrix(t, event, &grid).map_err(err)?;
    Ok((label.e_row().to_vec(), label.c_row().to_vec()))
}

fn prediction_dict(py: Python<'_>, p: &TtePrediction) -> PyResult<Py<PyDict>> {
    let d = PyDict::new_bound(py);
    d.set_item("t_hat", p.t_hat)?;
    d.set_item("beyond_horizon", p.beyond_horizon)?;
    d.set_item("method", p.method.to_string())?;
    d.set_item("spread", p.spread)?;
    Ok(d.into())
}

/// Event time at the curve's concave-to-convex crossing.
#[pyfunction]
#[pyo3(signature = (survival, smoothing_window = 3))]
fn inflection_time(
    py: Python<'_>,
    survival: Vec<f64>,
    smoothing_window: usize,
) -> PyResult<Py<PyDict>> {
    let p = ttesurv::predict::inflection_time(&curve(survival)?, smoothing_window).map_err(err)?;
    prediction_dict(py, &p)
}

/// Earliest interval where the curve drops below `theta`.
#[pyfunction]
fn threshold_time(py: Python<'_>, survival: Vec<f64>, theta: f64) -> PyResult<Py<PyDict>> {
    let p = ttesurv::predict::threshold_time(&curve(survival)?, theta).map_err(err)?;
    prediction_dict(py, &p)
}

/// Probability threshold minimizing mean |T̂ − T| over the given curves.
#[pyfunction]
fn fit_threshold(curves: Vec<Vec<f64>>, times: Vec<usize>, events: Vec<bool>) -> PyResult<f64> {
    let curves: Vec<SurvivalCurve> = curves.into_iter().map(curve).collect::<PyResult<_>>()?;
    Ok(ttesurv::predict::fit_threshold(&curves, &times, &events)
        .map_err(err)?
        .theta())
}

/// Harrell's concordance index over comparable pairs.
#[pyfunction]
fn concordance_index(
    curves: Vec<Vec<f64>>,
    times: Vec<usize>,
    events: Vec<bool>,
) -> PyResult<f64> {
    let curves: Vec<SurvivalCurve> = curves.into_iter().map(curve).collect::<PyResult<_>>()?;
    ttesurv::metrics::concordance_index(&curves, &times, &events).map_err(err)
}

/// Pooled per-step AUROC with midrank tie handling.
#[pyfunction]
fn auroc_pooled(curves: Vec<Vec<f64>>, times: Vec<usize>, events: Vec<bool>) -> PyResult<f64> {
    let curves: Vec<SurvivalCurve> = curves.into_iter().map(curve).collect::<PyResult<_>>()?;
    let horizon = curves.first().map_or(0, |c| c.len());
    let grid = TimeGrid::with_horizon(horizon).map_err(err)?;
    let labels = times
        .iter()
        .zip(&events)
        .map(|(&t, &e)| ttesurv::survival::build_label_matrix(t, e, &grid))
        .collect::<ttesurv::Result<Vec<_>>>()
        .map_err(err)?;
    ttesurv::metrics::auroc_pooled(&curves, &labels).map_err(err)
}

/// Writes a synthetic cohort CSV and its true-hazard oracle CSV.
#[pyfunction]
#[pyo3(signature = (cohort_path, oracle_path, n = 1000, horizon = 20, d = 5, censor_hazard = 0.02, base_logit = -2.5, gamma = 0.05, seed = 42))]
#[allow(clippy::too_many_arguments)]
fn generate_cohort(
    cohort_path: PathBuf,
    oracle_path: PathBuf,
    n: usize,
    horizon: usize,
    d: usize,
    censor_hazard: f64,
    base_logit: f64,
    gamma: f64,
    seed: u64,
) -> PyResult<()> {
    const PATTERN: [f64; 5] = [0.5, -0.5, 0.25, -0.25, 0.1];
    let spec = SyntheticSpec {
        n,
        horizon,
        d,
        beta: (0..d).map(|k| PATTERN[k % PATTERN.len()]).collect(),
        censor_hazard,
        base_logit,
        gamma,
        seed,
        ..SyntheticSpec::default()
    };
    let (cohort, oracle) = ttesurv::synthetic::generate_cohort(&spec).map_err(err)?;
    let mut buf = Vec::new();
    ttesurv::data::write_longitudinal_csv(&cohort, &mut buf).map_err(err)?;
    std::fs::write(cohort_path, buf)?;
    let mut buf = Vec::new();
    ttesurv::synthetic::write_oracle_csv(&oracle, &mut buf).map_err(err)?;
    std::fs::write(oracle_path, buf)?;
    Ok(())
}

/// Trains on a longitudinal CSV and returns the checkpoint as a JSON string.
#[pyfunction]
#[pyo3(signature = (data_path, epochs = 30, hidden_size = 32, heads = 1, variant = "survival", seed = 0, validation_fraction = 0.2))]
fn train_model(
    data_path: PathBuf,
    epochs: usize,
    hidden_size: usize,
    heads: usize,
    variant: &str,
    seed: u64,
    validation_fraction: f64,
) -> PyResult<String> {
    let cohort = load_longitudinal_csv(&data_path, None).map_err(err)?;
    let config = ModelConfig {
        epochs,
        hidden_size,
        heads,
        variant: variant.parse().map_err(err)?,
        seed,
        ..ModelConfig::default()
    };
    config.validate().map_err(err)?;

    let remainder = 1.0 - validation_fraction;
    let split = SplitSpec::new(remainder / 2.0, validation_fraction, remainder / 2.0, seed)
        .map_err(err)?;
    // fold the test share back into training; callers hold out data themselves
    let (mut tr, va, te) = split_cohort(&cohort, &split).map_err(err)?;
    tr.records.extend(te.records);

    let scaler = fit_scaler(&tr).map_err(err)?;
    let tr = apply_scaler(&scaler, &tr).map_err(err)?;
    let va = apply_scaler(&scaler, &va).map_err(err)?;
    let (params, _report) = ttesurv::model::train(&config, &tr, &va).map_err(err)?;

    let ckpt = Checkpoint::new(
        config,
        &params,
        cohort.num_covariates(),
        cohort.grid.horizon(),
        cohort.covariate_names.clone(),
        Some(scaler),
        None,
    );
    ckpt.to_json().map_err(err)
}

/// Predicts ensembles for a cohort: `{id: {"mean": [...], "std": [...]}}`.
#[pyfunction]
#[pyo3(signature = (checkpoint_json, data_path, seed = 0))]
fn predict_cohort(
    py: Python<'_>,
    checkpoint_json: &str,
    data_path: PathBuf,
    seed: u64,
) -> PyResult<Py<PyDict>> {
    let ckpt = Checkpoint::from_json(checkpoint_json).map_err(err)?;
    let cohort = load_longitudinal_csv(&data_path, Some(&ckpt.covariate_names)).map_err(err)?;
    let cohort = match &ckpt.scaler {
        Some(s) => apply_scaler(s, &cohort).map_err(err)?,
        None => cohort,
    };
    let params = ckpt.params().map_err(err)?;
    let ensembles =
        ttesurv::model::predict_curves(&params, &ckpt.config, &cohort, seed).map_err(err)?;

    let out = PyDict::new_bound(py);
    for ens in ensembles {
        let entry = PyDict::new_bound(py);
        entry.set_item("mean", ens.mean.values().to_vec())?;
        entry.set_item("std", ens.std.clone())?;
        out.set_item(ens.id, entry)?;
    }
    Ok(out.into())
}

/// Full metric report as a JSON string; `curves` maps id -> mean survival,
/// `predictions` maps id -> (t_hat, spread), `outcomes` maps id -> (t, event).
#[pyfunction]
fn evaluate(
    curves: HashMap<String, Vec<f64>>,
    predictions: HashMap<String, (usize, f64)>,
    outcomes: Vec<(String, usize, bool)>,
) -> PyResult<String> {
    let mut records = Vec::with_capacity(outcomes.len());
    let mut times = Vec::with_capacity(outcomes.len());
    let mut events = Vec::with_capacity(outcomes.len());
    let mut horizon = 0usize;
    for (id, t, event) in &outcomes {
        let mean = curves
            .get(id)
            .ok_or_else(|| PyValueError::new_err(format!("id `{id}` missing from curves")))?;
        let &(t_hat, spread) = predictions
            .get(id)
            .ok_or_else(|| PyValueError::new_err(format!("id `{id}` missing from predictions")))?;
        horizon = horizon.max(mean.len());
        records.push(RecordEval {
            id: id.clone(),
            mean_curve: curve(mean.clone())?,
            t_hat,
            spread,
        });
        times.push(*t);
        events.push(*event);
    }
    let report = evaluate_all(&records, &times, &events, horizon).map_err(err)?;
    serde_json::to_string_pretty(&report).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Applies a prediction method to every curve in an id -> curve mapping.
#[pyfunction]
#[pyo3(signature = (curves, method = "inflection", theta = 0.5, smoothing_window = 3))]
fn predict_times(
    py: Python<'_>,
    curves: HashMap<String, Vec<f64>>,
    method: &str,
    theta: f64,
    smoothing_window: usize,
) -> PyResult<Py<PyDict>> {
    let spec = match method {
        "inflection" => PredictorSpec::Inflection { smoothing_window },
        "threshold" => PredictorSpec::Threshold { theta },
        other => return Err(PyValueError::new_err(format!("unknown method `{other}`"))),
    };
    let out = PyDict::new_bound(py);
    let mut ids: Vec<&String> = curves.keys().collect();
    ids.sort();
    for id in ids {
        let p = spec.apply(&curve(curves[id].clone())?).map_err(err)?;
        out.set_item(id, prediction_dict(py, &p)?)?;
    }
    Ok(out.into())
}

#[pymodule]
fn ttesurv_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(hazard_to_survival, m)?)?;
    m.add_function(wrap_pyfunction!(survival_to_hazard, m)?)?;
    m.add_function(wrap_pyfunction!(event_time_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(build_label_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(inflection_time, m)?)?;
    m.add_function(wrap_pyfunction!(threshold_time, m)?)?;
    m.add_function(wrap_pyfunction!(fit_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(concordance_index, m)?)?;
    m.add_function(wrap_pyfunction!(auroc_pooled, m)?)?;
    m.add_function(wrap_pyfunction!(generate_cohort, m)?)?;
    m.add_function(wrap_pyfunction!(train_model, m)?)?;
    m.add_function(wrap_pyfunction!(predict_cohort, m)?)?;
    m.add_function(wrap_pyfunction!(predict_times, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
