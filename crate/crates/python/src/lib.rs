//! Python bindings for `metric-dcov`.
//!
//! Samples are lists of floats, lists of equal-length float vectors or lists
//! of string labels; anything with a `tolist()` method (numpy arrays) is
//! converted first. Metrics are spelled as on the command line
//! (`euclidean`, `minkowski:1.5`, `chebyshev`, `discrete`, `precomputed:path`)
//! or passed as a [`Metric`]. Structured results come back as dicts whose
//! keys match the JSON reports of the CLI.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use metric_dcov::centering::{double_center, CenteredMatrix};
use metric_dcov::inference::{categorical_dcov as cat_dcov, pearson_chisq as cat_pearson, ContingencyTable};
use metric_dcov::io::parse_metric;
use metric_dcov::metric::{power_transform, DistanceMatrix as CoreMatrix, MetricSpec, SampleSet};
use metric_dcov::negtype::DEFAULT_TOL;

fn to_py_err(e: metric_dcov::Error) -> PyErr {
    match e {
        metric_dcov::Error::Io(e) => PyIOError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

/// Serializes through JSON so dict keys match the CLI reports exactly.
fn to_dict<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (s,))
}

fn sample_from(obj: &Bound<'_, PyAny>) -> PyResult<SampleSet> {
    let owned;
    let obj = if obj.hasattr("tolist")? {
        owned = obj.call_method0("tolist")?;
        &owned
    } else {
        obj
    };
    if obj.is_instance_of::<pyo3::types::PyString>() {
        return Err(PyValueError::new_err("a sample must be a sequence, not a string"));
    }
    let set = if let Ok(rows) = obj.extract::<Vec<Vec<f64>>>() {
        SampleSet::from_vectors(rows)
    } else if let Ok(values) = obj.extract::<Vec<f64>>() {
        SampleSet::from_scalars(&values)
    } else if let Ok(labels) = obj.extract::<Vec<String>>() {
        SampleSet::from_labels(&labels)
    } else {
        return Err(PyValueError::new_err(
            "a sample must be a list of floats, of float vectors or of string labels",
        ));
    };
    set.map_err(to_py_err)
}

/// A metric with an optional snowflake power `d^r`, `0 < r <= 1`.
#[pyclass(module = "metric_dcov", frozen, skip_from_py_object, name = "Metric")]
#[derive(Clone)]
pub struct Metric {
    spec: MetricSpec,
    name: String,
}

#[pymethods]
impl Metric {
    #[new]
    #[pyo3(signature = (name = "euclidean", power = 1.0))]
    fn new(name: &str, power: f64) -> PyResult<Self> {
        let base = parse_metric(name).map_err(to_py_err)?;
        let spec = if power == 1.0 { base } else { power_transform(&base, power).map_err(to_py_err)? };
        Ok(Self { spec, name: name.to_string() })
    }

    #[getter]
    fn name(&self) -> &str {
        &self.name
    }

    #[getter]
    fn power(&self) -> f64 {
        self.spec.power()
    }

    /// Pairwise distances of `points`.
    fn distance_matrix(&self, py: Python<'_>, points: &Bound<'_, PyAny>) -> PyResult<DistanceMatrix> {
        let s = sample_from(points)?;
        let d = py.detach(|| metric_dcov::distance_matrix(&self.spec, &s)).map_err(to_py_err)?;
        Ok(DistanceMatrix { inner: d })
    }

    fn __repr__(&self) -> String {
        format!("Metric({:?}, power={})", self.name, self.spec.power())
    }
}

/// Symmetric matrix of pairwise distances with zero diagonal.
#[pyclass(module = "metric_dcov", frozen, skip_from_py_object, name = "DistanceMatrix")]
#[derive(Clone)]
pub struct DistanceMatrix {
    inner: CoreMatrix,
}

#[pymethods]
impl DistanceMatrix {
    #[new]
    fn new(rows: &Bound<'_, PyAny>) -> PyResult<Self> {
        let rows = if rows.hasattr("tolist")? { rows.call_method0("tolist")? } else { rows.clone() };
        let rows: Vec<Vec<f64>> = rows.extract()?;
        Ok(Self { inner: CoreMatrix::from_rows(rows).map_err(to_py_err)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn __getitem__(&self, ij: (usize, usize)) -> PyResult<f64> {
        let (i, j) = ij;
        let n = self.inner.n();
        if i >= n || j >= n {
            return Err(pyo3::exceptions::PyIndexError::new_err(format!("index ({i}, {j}) out of range for n = {n}")));
        }
        Ok(self.inner.get(i, j))
    }

    fn tolist(&self) -> Vec<Vec<f64>> {
        self.inner.to_rows()
    }

    /// Spectral negative-type diagnostic of this finite metric space.
    #[pyo3(signature = (tol = DEFAULT_TOL))]
    fn negtype_check<'py>(&self, py: Python<'py>, tol: f64) -> PyResult<Bound<'py, PyAny>> {
        let r = py.detach(|| metric_dcov::negtype_check(&self.inner, tol)).map_err(to_py_err)?;
        to_dict(py, &r)
    }

    /// Coordinates `φ(xᵢ)` with `‖φ(xᵢ) − φ(xⱼ)‖² = d(xᵢ, xⱼ)`; raises on a violation.
    #[pyo3(signature = (tol = DEFAULT_TOL))]
    fn embed(&self, py: Python<'_>, tol: f64) -> PyResult<Vec<Vec<f64>>> {
        let e = py.detach(|| metric_dcov::embed_sample(&self.inner, tol)).map_err(to_py_err)?;
        Ok((0..e.n()).map(|i| e.point(i).to_vec()).collect())
    }

    fn __repr__(&self) -> String {
        format!("DistanceMatrix(n={})", self.inner.n())
    }
}

fn metric_from(obj: &Bound<'_, PyAny>, power: f64) -> PyResult<MetricSpec> {
    if let Ok(m) = obj.cast::<Metric>() {
        let m = m.get();
        if power != 1.0 {
            return power_transform(&m.spec, power).map_err(to_py_err);
        }
        return Ok(m.spec.clone());
    }
    let name: String = obj.extract()?;
    Ok(Metric::new(&name, power)?.spec)
}

fn centered(metric: Option<&Bound<'_, PyAny>>, power: f64, sample: &Bound<'_, PyAny>) -> PyResult<(MetricSpec, SampleSet)> {
    Ok((metric_or_default(metric, power)?, sample_from(sample)?))
}

fn metric_or_default(metric: Option<&Bound<'_, PyAny>>, power: f64) -> PyResult<MetricSpec> {
    match metric {
        Some(m) => metric_from(m, power),
        None => Ok(Metric::new("euclidean", power)?.spec),
    }
}

fn center_pair(
    py: Python<'_>,
    x: &Bound<'_, PyAny>,
    y: &Bound<'_, PyAny>,
    metric_x: Option<&Bound<'_, PyAny>>,
    metric_y: Option<&Bound<'_, PyAny>>,
    power: f64,
) -> PyResult<(CenteredMatrix, CenteredMatrix)> {
    let (sx, x) = centered(metric_x, power, x)?;
    let (sy, y) = centered(metric_y, power, y)?;
    py.detach(|| {
        let dx = metric_dcov::distance_matrix(&sx, &x)?;
        let dy = metric_dcov::distance_matrix(&sy, &y)?;
        Ok((double_center(&dx), double_center(&dy)))
    })
    .map_err(to_py_err)
}

/// Pairwise distances of `points` under `metric`.
#[pyfunction]
#[pyo3(signature = (points, metric = None, power = 1.0))]
fn distance_matrix(
    py: Python<'_>,
    points: &Bound<'_, PyAny>,
    metric: Option<&Bound<'_, PyAny>>,
    power: f64,
) -> PyResult<DistanceMatrix> {
    let spec = metric_or_default(metric, power)?;
    let s = sample_from(points)?;
    let d = py.detach(|| metric_dcov::distance_matrix(&spec, &s)).map_err(to_py_err)?;
    Ok(DistanceMatrix { inner: d })
}

/// Sample distance covariance, variances and correlation.
#[pyfunction]
#[pyo3(signature = (x, y, metric_x = None, metric_y = None, power = 1.0))]
fn dcov<'py>(
    py: Python<'py>,
    x: &Bound<'py, PyAny>,
    y: &Bound<'py, PyAny>,
    metric_x: Option<&Bound<'py, PyAny>>,
    metric_y: Option<&Bound<'py, PyAny>>,
    power: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let (kc, lc) = center_pair(py, x, y, metric_x, metric_y, power)?;
    let r = py.detach(|| metric_dcov::dcov_result(&kc, &lc)).map_err(to_py_err)?;
    to_dict(py, &r)
}

/// Permutation test of independence with the `(1 + #)/(B + 1)` p-value.
#[pyfunction]
#[pyo3(signature = (x, y, metric_x = None, metric_y = None, power = 1.0, permutations = 999, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn permutation_test<'py>(
    py: Python<'py>,
    x: &Bound<'py, PyAny>,
    y: &Bound<'py, PyAny>,
    metric_x: Option<&Bound<'py, PyAny>>,
    metric_y: Option<&Bound<'py, PyAny>>,
    power: f64,
    permutations: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let (kc, lc) = center_pair(py, x, y, metric_x, metric_y, power)?;
    let r = py.detach(|| metric_dcov::permutation_test(&kc, &lc, permutations, seed)).map_err(to_py_err)?;
    to_dict(py, &r)
}

/// Test against the chi-square mixture null with product eigenvalues.
#[pyfunction]
#[pyo3(signature = (x, y, metric_x = None, metric_y = None, power = 1.0, mc_draws = 999, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn asymptotic_test<'py>(
    py: Python<'py>,
    x: &Bound<'py, PyAny>,
    y: &Bound<'py, PyAny>,
    metric_x: Option<&Bound<'py, PyAny>>,
    metric_y: Option<&Bound<'py, PyAny>>,
    power: f64,
    mc_draws: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let (kc, lc) = center_pair(py, x, y, metric_x, metric_y, power)?;
    let r = py.detach(|| metric_dcov::asymptotic_test(&kc, &lc, mc_draws, seed)).map_err(to_py_err)?;
    to_dict(py, &r)
}

/// Negative-type diagnostic of `points` under `metric`.
#[pyfunction]
#[pyo3(signature = (points, metric = None, power = 1.0, tol = DEFAULT_TOL))]
fn negtype_check<'py>(
    py: Python<'py>,
    points: &Bound<'py, PyAny>,
    metric: Option<&Bound<'py, PyAny>>,
    power: f64,
    tol: f64,
) -> PyResult<Bound<'py, PyAny>> {
    distance_matrix(py, points, metric, power)?.negtype_check(py, tol)
}

/// Hilbert-space coordinates of a sample whose metric is of negative type on it.
#[pyfunction]
#[pyo3(signature = (points, metric = None, power = 1.0, tol = DEFAULT_TOL))]
fn embed(
    py: Python<'_>,
    points: &Bound<'_, PyAny>,
    metric: Option<&Bound<'_, PyAny>>,
    power: f64,
    tol: f64,
) -> PyResult<Vec<Vec<f64>>> {
    distance_matrix(py, points, metric, power)?.embed(py, tol)
}

fn table(counts: Vec<Vec<u64>>) -> PyResult<ContingencyTable> {
    ContingencyTable::from_counts(counts).map_err(to_py_err)
}

/// Closed-form distance covariance of a contingency table under the discrete metric.
#[pyfunction]
fn categorical_dcov<'py>(py: Python<'py>, counts: Vec<Vec<u64>>) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &cat_dcov(&table(counts)?).map_err(to_py_err)?)
}

/// Pearson's chi-square statistic of a contingency table.
#[pyfunction]
fn pearson_chisq(counts: Vec<Vec<u64>>) -> PyResult<f64> {
    cat_pearson(&table(counts)?).map_err(to_py_err)
}

#[pymodule]
#[pyo3(name = "metric_dcov")]
fn py_metric_dcov(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("DEFAULT_TOL", DEFAULT_TOL)?;
    m.add_class::<Metric>()?;
    m.add_class::<DistanceMatrix>()?;
    m.add_function(wrap_pyfunction!(distance_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(dcov, m)?)?;
    m.add_function(wrap_pyfunction!(permutation_test, m)?)?;
    m.add_function(wrap_pyfunction!(asymptotic_test, m)?)?;
    m.add_function(wrap_pyfunction!(negtype_check, m)?)?;
    m.add_function(wrap_pyfunction!(embed, m)?)?;
    m.add_function(wrap_pyfunction!(categorical_dcov, m)?)?;
    m.add_function(wrap_pyfunction!(pearson_chisq, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use pyo3::types::PyList;

    #[test]
    fn samples_and_dicts_round_trip() {
        Python::initialize();
        Python::attach(|py| {
            let x = PyList::new(py, [0.0, 1.0, 3.0, 7.0]).unwrap();
            let y = PyList::new(py, [0.0, 2.0, 6.0, 14.0]).unwrap();
            let r = dcov(py, x.as_any(), y.as_any(), None, None, 1.0).unwrap();
            let dcor: f64 = r.get_item("dcor").unwrap().extract().unwrap();
            assert!((dcor - 1.0).abs() < 1e-12);

            let labels = PyList::new(py, ["a", "b", "a"]).unwrap();
            let d = distance_matrix(py, labels.as_any(), Some(&"discrete".into_pyobject(py).unwrap().into_any()), 1.0).unwrap();
            assert_eq!(d.tolist(), vec![vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]]);

            let text = "abc".into_pyobject(py).unwrap().into_any();
            assert!(sample_from(&text).is_err());
            assert!(Metric::new("minkowski:0.5", 1.0).is_err());
        });
    }
}
