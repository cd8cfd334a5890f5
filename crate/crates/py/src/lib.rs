//! Python bindings for the readmission pipeline, importable as `readmit`.
//!
//! Structured results (reports, abstractions, pipeline output) are returned
//! as plain dicts and lists decoded from their JSON form.

use std::path::PathBuf;

use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use readmit_core::abstraction::{AbstractionOptions, GradientMode, Interpolation};
use readmit_core::eval::{FoldAggregate, MetricsReport, ScoredSet};
use readmit_core::series::StayRecord;
use readmit_core::{PipelineConfig, SynthConfig, Variant};

fn err(e: readmit_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj
        .py()
        .import("json")?
        .call_method1("dumps", (obj,))?
        .extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn scored(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<ScoredSet> {
    ScoredSet::new(scores, labels).map_err(err)
}

fn gradient_mode(name: &str) -> PyResult<GradientMode> {
    match name {
        "simple" => Ok(GradientMode::Simple),
        "thresholded" => Ok(GradientMode::Thresholded),
        _ => Err(PyValueError::new_err(format!(
            "gradient mode must be `simple` or `thresholded`, got `{name}`"
        ))),
    }
}

/// Concept definitions with their value-to-state cutoffs.
#[pyclass(frozen, module = "readmit")]
struct KnowledgeBase {
    inner: readmit_core::KnowledgeBase,
}

#[pymethods]
impl KnowledgeBase {
    /// The bundled readmission knowledge base.
    #[staticmethod]
    fn builtin() -> Self {
        KnowledgeBase {
            inner: readmit_core::builtin_readmission_kb(),
        }
    }

    #[staticmethod]
    fn from_json(doc: &str) -> PyResult<Self> {
        Ok(KnowledgeBase {
            inner: readmit_core::KnowledgeBase::from_json(doc).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(KnowledgeBase {
            inner: readmit_core::KnowledgeBase::from_path(path).map_err(err)?,
        })
    }

    #[getter]
    fn version(&self) -> &str {
        self.inner.version()
    }

    fn concept_ids(&self) -> Vec<String> {
        self.inner.concepts().iter().map(|c| c.concept_id.clone()).collect()
    }

    /// State label of `value` for the concept `concept_id`.
    fn state_of(&self, concept_id: &str, value: f64) -> PyResult<String> {
        let c = self
            .inner
            .get(concept_id)
            .ok_or_else(|| PyKeyError::new_err(concept_id.to_string()))?;
        Ok(c.state_of(value).to_string())
    }

    /// State labels of a concept, in cutoff order.
    fn states(&self, concept_id: &str) -> PyResult<Vec<String>> {
        let c = self
            .inner
            .get(concept_id)
            .ok_or_else(|| PyKeyError::new_err(concept_id.to_string()))?;
        Ok(c.state_labels().map(str::to_string).collect())
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "KnowledgeBase(version={:?}, concepts={})",
            self.inner.version(),
            self.inner.len()
        )
    }
}

/// Linear interpolation at `t` strictly between `prev` and `next`.
#[pyfunction]
#[pyo3(signature = (prev, next, t, swapped_weights = false))]
fn interpolate_at(prev: (i64, f64), next: (i64, f64), t: i64, swapped_weights: bool) -> PyResult<f64> {
    let mode = if swapped_weights {
        Interpolation::SwappedWeights
    } else {
        Interpolation::Linear
    };
    readmit_core::abstraction::interpolate_with(prev, next, t, mode).map_err(err)
}

/// Trend label at the later timestamp of every consecutive pair.
#[pyfunction]
#[pyo3(signature = (series, mode = "simple", sig_delta = 0.0))]
fn gradient_labels(series: Vec<(i64, f64)>, mode: &str, sig_delta: f64) -> PyResult<Vec<(i64, String)>> {
    let mode = gradient_mode(mode)?;
    Ok(readmit_core::gradient_labels(&series, mode, sig_delta)
        .into_iter()
        .map(|(t, g)| (t, g.as_str().to_string()))
        .collect())
}

#[pyfunction]
fn auroc(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    readmit_core::auroc(&scored(scores, labels)?).map_err(err)
}

#[pyfunction]
fn auprc(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    readmit_core::auprc(&scored(scores, labels)?).map_err(err)
}

/// F1-optimal decision threshold on a validation set.
#[pyfunction]
fn best_threshold(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    readmit_core::eval::best_threshold(&scored(scores, labels)?).map_err(err)
}

/// Metrics report for a test set at a fixed threshold.
#[pyfunction]
fn evaluate<'py>(
    py: Python<'py>,
    scores: Vec<f64>,
    labels: Vec<bool>,
    threshold: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let r = readmit_core::evaluate(&scored(scores, labels)?, threshold).map_err(err)?;
    to_py(py, &r)
}

/// Mean and population std of each metric over fold reports.
#[pyfunction]
fn aggregate_folds<'py>(py: Python<'py>, reports: Vec<Bound<'py, PyAny>>) -> PyResult<Bound<'py, PyAny>> {
    let reports: Vec<MetricsReport> = reports.iter().map(from_py).collect::<PyResult<_>>()?;
    let agg: FoldAggregate = readmit_core::eval::aggregate_folds(&reports).map_err(err)?;
    to_py(py, &agg)
}

/// `"A"`, `"B"` or `"inconclusive"` for two metric reports.
#[pyfunction]
fn conclusively_better(a: &Bound<'_, PyAny>, b: &Bound<'_, PyAny>) -> PyResult<&'static str> {
    let a: MetricsReport = from_py(a)?;
    let b: MetricsReport = from_py(b)?;
    Ok(readmit_core::eval::conclusively_better(&a, &b).as_str())
}

/// Combine chunk-level probabilities of one note into a single score.
#[pyfunction]
fn aggregate_note_scores(chunk_probs: Vec<f64>) -> PyResult<f64> {
    readmit_core::eval::aggregate_note_scores(&chunk_probs).map_err(err)
}

/// Write a synthetic cohort (`stays.csv`, `events.csv`, `icd9.csv`,
/// `labels.csv`) into `out_dir`; returns the number of stays.
#[pyfunction]
#[pyo3(signature = (out_dir, n_patients = 2000, positive_rate = 0.113, theta = 1.0, seed = 0, exclusion_rate = 0.03))]
fn synth(
    out_dir: PathBuf,
    n_patients: usize,
    positive_rate: f64,
    theta: f64,
    seed: u64,
    exclusion_rate: f64,
) -> PyResult<usize> {
    let cfg = SynthConfig {
        n_patients,
        positive_rate,
        theta,
        seed,
        exclusion_rate,
    };
    let kb = readmit_core::builtin_readmission_kb();
    let data = readmit_core::generate(&cfg, &kb).map_err(err)?;
    std::fs::create_dir_all(&out_dir).map_err(|e| PyValueError::new_err(e.to_string()))?;
    data.write_csvs(&out_dir).map_err(err)?;
    Ok(data.stays.len())
}

fn load_stays(stays: PathBuf, events: PathBuf, icd9: Option<PathBuf>) -> PyResult<Vec<StayRecord>> {
    let ing = readmit_core::series::ingest_paths(events, stays, icd9.as_deref()).map_err(err)?;
    Ok(ing.stays.into_iter().map(readmit_core::normalize).collect())
}

/// Ingest, normalize and abstract every stay; returns one dict per stay.
#[pyfunction]
#[pyo3(signature = (stays, events, kb = None, gradient_mode = "simple", interpolate = false))]
fn abstract_stays<'py>(
    py: Python<'py>,
    stays: PathBuf,
    events: PathBuf,
    kb: Option<&KnowledgeBase>,
    gradient_mode: &str,
    interpolate: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let builtin;
    let kb = match kb {
        Some(k) => &k.inner,
        None => {
            builtin = readmit_core::builtin_readmission_kb();
            &builtin
        }
    };
    let opts = AbstractionOptions {
        gradient_mode: self::gradient_mode(gradient_mode)?,
        interpolate,
        ..AbstractionOptions::default()
    };
    let records = load_stays(stays, events, None)?;
    let sets = py
        .detach(|| {
            records
                .iter()
                .map(|s| readmit_core::abstract_stay(s, kb, &opts))
                .collect::<readmit_core::Result<Vec<_>>>()
        })
        .map_err(err)?;
    to_py(py, &sets)
}

/// Cohort selection, k-fold training and evaluation end to end. Returns
/// per-fold reports and thresholds plus the aggregate.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (stays, events, icd9 = None, variant = "charts_1hot_gradients", k = 5, seed = 0, kb = None))]
fn run_pipeline<'py>(
    py: Python<'py>,
    stays: PathBuf,
    events: PathBuf,
    icd9: Option<PathBuf>,
    variant: &str,
    k: usize,
    seed: u64,
    kb: Option<&KnowledgeBase>,
) -> PyResult<Bound<'py, PyAny>> {
    let variant: Variant = variant
        .parse()
        .map_err(|e: readmit_core::Error| PyValueError::new_err(e.to_string()))?;
    let kb = kb
        .map(|k| k.inner.clone())
        .unwrap_or_else(readmit_core::builtin_readmission_kb);
    let cfg = PipelineConfig {
        variant,
        k,
        seed,
        ..PipelineConfig::default()
    };
    let records = load_stays(stays, events, icd9)?;
    let res = py
        .detach(|| readmit_core::run_pipeline(&records, &kb, &cfg))
        .map_err(err)?;
    let folds: Vec<serde_json::Value> = res
        .fold_results
        .iter()
        .map(|f| serde_json::json!({"fold": f.fold, "threshold": f.threshold, "report": f.report}))
        .collect();
    to_py(
        py,
        &serde_json::json!({
            "folds": folds,
            "aggregate": res.aggregate,
            "included": res.decisions.iter().filter(|d| d.included).count(),
        }),
    )
}

#[pymodule]
#[pyo3(name = "readmit")]
fn readmit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<KnowledgeBase>()?;
    m.add_function(wrap_pyfunction!(interpolate_at, m)?)?;
    m.add_function(wrap_pyfunction!(gradient_labels, m)?)?;
    m.add_function(wrap_pyfunction!(auroc, m)?)?;
    m.add_function(wrap_pyfunction!(auprc, m)?)?;
    m.add_function(wrap_pyfunction!(best_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate_folds, m)?)?;
    m.add_function(wrap_pyfunction!(conclusively_better, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate_note_scores, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(abstract_stays, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}
