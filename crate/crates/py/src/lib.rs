//! Python bindings. Reports cross the boundary as JSON text or plain
//! Python values; the Rust types stay on this side.

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyFloat, PyInt, PyString};

use lbee::pipeline::{execute, run_sweep_on};
use lbee::{EmbeddingTable, LbeeError, Method, PartitionEvalInput, PipelineReport, RunConfig, SweepParam};

fn to_py(e: LbeeError) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

/// Builds a config from keyword arguments using the same keys as the JSON
/// config file.
fn config_from(overrides: Option<&Bound<'_, PyDict>>) -> PyResult<RunConfig> {
    let mut map = serde_json::Map::new();
    if let Some(kw) = overrides {
        for (key, value) in kw.iter() {
            let key: String = key.extract()?;
            let json = if value.is_none() {
                serde_json::Value::Null
            } else if value.is_instance_of::<PyBool>() {
                return Err(PyValueError::new_err(format!("config key '{key}' does not take a bool")));
            } else if value.is_instance_of::<PyInt>() {
                serde_json::Value::from(value.extract::<i64>()?)
            } else if value.is_instance_of::<PyFloat>() {
                serde_json::Value::from(value.extract::<f64>()?)
            } else if value.is_instance_of::<PyString>() {
                serde_json::Value::from(value.extract::<String>()?)
            } else {
                return Err(PyValueError::new_err(format!("unsupported value for config key '{key}'")));
            };
            map.insert(key, json);
        }
    }
    RunConfig::from_json(&serde_json::Value::Object(map).to_string()).map_err(to_py)
}

#[pyclass(name = "Bundle", frozen)]
struct PyBundle {
    inner: lbee::Bundle,
}

#[pymethods]
impl PyBundle {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        lbee::Bundle::load(&path).map(|inner| Self { inner }).map_err(to_py)
    }

    #[getter]
    fn image_ids(&self) -> Vec<String> {
        self.inner.images().ids().to_vec()
    }

    #[getter]
    fn sentence_ids(&self) -> Vec<String> {
        self.inner.sentences().ids().to_vec()
    }

    #[getter]
    fn texts(&self) -> Vec<String> {
        self.inner.catalog().texts().to_vec()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.images().dim()
    }

    /// Runs the pipeline; keyword arguments override the defaults.
    #[pyo3(signature = (**config))]
    fn run(&self, config: Option<&Bound<'_, PyDict>>) -> PyResult<Report> {
        let cfg = config_from(config)?;
        let run = execute(&self.inner, &cfg).map_err(to_py)?;
        Ok(Report { inner: run.report })
    }

    /// One report per value of `param`.
    #[pyo3(signature = (param, values, **config))]
    fn sweep(&self, param: &str, values: Vec<String>, config: Option<&Bound<'_, PyDict>>) -> PyResult<Vec<Report>> {
        let base = config_from(config)?;
        let param: SweepParam = param.parse().map_err(to_py)?;
        let reports = run_sweep_on(&self.inner, &base, param, &values).map_err(to_py)?;
        Ok(reports.into_iter().map(|inner| Report { inner }).collect())
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        std::fs::create_dir_all(&path).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        self.inner.write(&path).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.images().len()
    }
}

#[pyclass(name = "Report", frozen)]
struct Report {
    inner: PipelineReport,
}

#[pymethods]
impl Report {
    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py)
    }

    #[getter]
    fn explanation(&self) -> Vec<String> {
        self.inner.explanation.clone()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings.clone()
    }

    /// `(easy, hard, neutral)` sample counts.
    #[getter]
    fn split_sizes(&self) -> (usize, usize, usize) {
        let s = &self.inner.split;
        (s.easy, s.hard, s.neutral)
    }

    /// Retained sentence ids per hard cluster.
    #[getter]
    fn selections(&self) -> Vec<Vec<String>> {
        self.inner
            .hard_clusters
            .iter()
            .map(|hc| hc.retained.iter().map(|r| r.sentence_id.clone()).collect())
            .collect()
    }

    #[getter]
    fn ground_truth(&self) -> Option<Vec<String>> {
        self.inner.ground_truth.as_ref().map(|g| g.members.clone())
    }

    #[getter]
    fn ahr(&self) -> Option<f64> {
        self.inner.metrics.as_ref().and_then(|m| m.ahr)
    }

    #[getter]
    fn acr(&self) -> Option<f64> {
        self.inner.metrics.as_ref().and_then(|m| m.acr)
    }

    #[getter]
    fn tpr(&self) -> Option<f64> {
        self.inner.metrics.as_ref().and_then(|m| m.tpr)
    }

    #[getter]
    fn ji(&self) -> Option<f64> {
        self.inner.metrics.as_ref().and_then(|m| m.ji)
    }

    fn __repr__(&self) -> String {
        format!(
            "Report(method={}, explanation={}, tpr={:?})",
            self.inner.config.method,
            self.inner.explanation.len(),
            self.tpr()
        )
    }
}

#[pyfunction]
#[pyo3(signature = (bundle_dir, **config))]
fn run_pipeline(bundle_dir: PathBuf, config: Option<&Bound<'_, PyDict>>) -> PyResult<Report> {
    let cfg = config_from(config)?;
    lbee::run_pipeline(&bundle_dir, &cfg).map(|inner| Report { inner }).map_err(to_py)
}

/// Generates a synthetic bundle. Returns it with the planted ground-truth
/// sentence ids; writes it to `out` when given.
#[pyfunction]
#[pyo3(signature = (seed=0, out=None, dim=None, groups=None, images_per_group=None, sentences_per_group=None, hard_groups=None))]
#[allow(clippy::too_many_arguments)]
fn synth(
    seed: u64,
    out: Option<PathBuf>,
    dim: Option<usize>,
    groups: Option<usize>,
    images_per_group: Option<usize>,
    sentences_per_group: Option<usize>,
    hard_groups: Option<Vec<usize>>,
) -> PyResult<(PyBundle, Vec<String>)> {
    let d = lbee::SynthParams::default();
    let params = lbee::SynthParams {
        seed,
        dim: dim.unwrap_or(d.dim),
        groups: groups.unwrap_or(d.groups),
        images_per_group: images_per_group.unwrap_or(d.images_per_group),
        sentences_per_group: sentences_per_group.unwrap_or(d.sentences_per_group),
        hard_groups: hard_groups.unwrap_or(d.hard_groups),
        ..d
    };
    let generated = lbee::generate_benchmark(&params).map_err(to_py)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(&dir).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        generated.write(&dir).map_err(to_py)?;
    }
    let planted = generated.planted_gt_ids().into_iter().map(str::to_string).collect();
    Ok((PyBundle { inner: generated.bundle }, planted))
}

type MergeTuple = (usize, usize, f64);

/// Ward clustering of the normalized rows. Returns the cluster index of
/// each row and the merge log as `(cluster_a, cluster_b, distance)`.
#[pyfunction]
fn ward_cluster(rows: Vec<Vec<f64>>, c: usize) -> PyResult<(Vec<usize>, Vec<MergeTuple>)> {
    let ids = (0..rows.len()).map(|i| i.to_string()).collect();
    let table = EmbeddingTable::from_rows(ids, &rows).map_err(to_py)?;
    let table = lbee::normalize_embeddings(&table).map_err(to_py)?;
    let model = lbee::ward_cluster(&table, c).map_err(to_py)?;
    let merges = model.merge_log.iter().map(|m| (m.cluster_a, m.cluster_b, m.distance)).collect();
    Ok((model.assignments, merges))
}

/// Sentence indices retained by `method` for one hard cluster.
#[pyfunction]
#[pyo3(signature = (method, v_h, v_e, k=lbee::config::DEFAULT_K, tau=lbee::config::DEFAULT_TAU))]
fn select(method: &str, v_h: Vec<f64>, v_e: Vec<f64>, k: usize, tau: f64) -> PyResult<Vec<usize>> {
    let method: Method = method.parse().map_err(to_py)?;
    lbee::select(method, 0, &v_h, &v_e, k, tau).map(|s| s.retained).map_err(to_py)
}

#[pyfunction]
fn precision_at_k(
    gt_partitions: BTreeMap<String, Vec<String>>,
    pred_rankings: Vec<Vec<String>>,
    evaluated_subset: Vec<String>,
    k: usize,
) -> PyResult<f64> {
    let input = PartitionEvalInput {
        gt_partitions: gt_partitions
            .into_iter()
            .map(|(name, ids)| (name, ids.into_iter().collect::<HashSet<_>>()))
            .collect(),
        pred_rankings,
        evaluated_subset,
    };
    lbee::precision_at_k(&input, k).map_err(to_py)
}

#[pymodule]
#[pyo3(name = "lbee")]
fn lbee_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBundle>()?;
    m.add_class::<Report>()?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(ward_cluster, m)?)?;
    m.add_function(wrap_pyfunction!(select, m)?)?;
    m.add_function(wrap_pyfunction!(precision_at_k, m)?)?;
    Ok(())
}
