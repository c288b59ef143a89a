//! Dataset ingestion and the machine-readable report schema.
//!
//! Input data is UTF-8 CSV with a header row, comma separated, `.` decimal
//! point; row `i` holds the pair `(xᵢ, yᵢ)`. Precomputed distance matrices are
//! square CSV files without a header.

use std::collections::HashSet;
use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dcov::DcovResult;
use crate::error::{Error, Result};
use crate::inference::{CalibrationReport, CategoricalDcov, ContingencyTable, CovDistReport, TestResult};
use crate::metric::{DistanceMatrix, MetricKind, MetricSpec, Point, SampleSet};
use crate::negtype::NegTypeReport;

pub const SCHEMA_VERSION: u32 = 1;

/// Parses `euclidean`, `minkowski:<p>`, `chebyshev`, `discrete` or
/// `precomputed:<path>` (the matrix is loaded immediately).
pub fn parse_metric(s: &str) -> Result<MetricSpec> {
    let s = s.trim();
    match s {
        "euclidean" => return Ok(MetricSpec::euclidean()),
        "chebyshev" => return Ok(MetricSpec::chebyshev()),
        "discrete" => return Ok(MetricSpec::discrete()),
        _ => {}
    }
    if let Some(p) = s.strip_prefix("minkowski:") {
        let p: f64 = p
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad minkowski exponent in `{s}`")))?;
        return MetricSpec::minkowski(p);
    }
    if let Some(path) = s.strip_prefix("precomputed:") {
        let m = read_matrix_csv(Path::new(path))?;
        return Ok(MetricSpec::precomputed(path, m));
    }
    Err(Error::InvalidArgument(format!(
        "unknown metric `{s}` (euclidean, minkowski:p, chebyshev, discrete, precomputed:path)"
    )))
}

/// Reads a square distance matrix: no header, one row per line.
pub fn read_matrix_csv(path: &Path) -> Result<DistanceMatrix> {
    let name = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(File::open(path).map_err(|e| Error::Dataset { path: name.clone(), message: e.to_string() })?);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(&name, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, tok)| parse_finite(tok).ok_or_else(|| Error::Parse {
                path: name.clone(),
                line,
                column: (j + 1).to_string(),
                message: format!("`{tok}` is not a finite number"),
            }))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    DistanceMatrix::from_rows(rows).map_err(|e| Error::Dataset { path: name, message: e.to_string() })
}

/// Reads a contingency table: the header holds the y labels after one
/// leading cell, each row an x label followed by non-negative integer counts.
pub fn read_contingency_csv(path: &Path) -> Result<ContingencyTable> {
    let name = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::Dataset { path: name.clone(), message: e.to_string() })?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let header = rdr.headers().map_err(|e| csv_error(&name, e))?.clone();
    let y_labels: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    if y_labels.is_empty() {
        return Err(Error::Dataset { path: name, message: "the header needs at least one y label".into() });
    }
    let (mut x_labels, mut counts) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(&name, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        x_labels.push(rec[0].to_owned());
        let row = rec
            .iter()
            .enumerate()
            .skip(1)
            .map(|(j, tok)| {
                tok.parse::<u64>().map_err(|_| Error::Parse {
                    path: name.clone(),
                    line,
                    column: y_labels[j - 1].clone(),
                    message: format!("`{tok}` is not a non-negative integer count"),
                })
            })
            .collect::<Result<Vec<u64>>>()?;
        counts.push(row);
    }
    ContingencyTable::new(x_labels, y_labels, counts)
}

fn parse_finite(tok: &str) -> Option<f64> {
    tok.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn csv_error(path: &str, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    let message = match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            format!("ragged row at line {line}: {len} fields, expected {expected_len}")
        }
        _ => e.to_string(),
    };
    Error::Dataset { path: path.to_owned(), message }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnType {
    Numeric,
    Categorical,
}

/// One side (x or y) of a dataset.
#[derive(Clone, Debug)]
pub struct SideSpec {
    pub columns: Vec<String>,
    pub metric: MetricSpec,
}

#[derive(Clone, Debug)]
pub struct DatasetSpec {
    /// Data file; optional only when both sides are precomputed.
    pub path: Option<PathBuf>,
    pub x: SideSpec,
    pub y: SideSpec,
    /// Names of categorical columns; all other columns are numeric.
    pub categorical: Vec<String>,
}

impl DatasetSpec {
    pub fn column_type(&self, name: &str) -> ColumnType {
        column_type(&self.categorical, name)
    }

    fn validate(&self) -> Result<()> {
        validate_side("x", &self.x, &self.categorical)?;
        validate_side("y", &self.y, &self.categorical)?;
        let xs: HashSet<&String> = self.x.columns.iter().collect();
        if let Some(c) = self.y.columns.iter().find(|c| xs.contains(c)) {
            return Err(Error::InvalidArgument(format!("column `{c}` is used for both x and y")));
        }
        Ok(())
    }
}

fn column_type(categorical: &[String], name: &str) -> ColumnType {
    if categorical.iter().any(|c| c == name) {
        ColumnType::Categorical
    } else {
        ColumnType::Numeric
    }
}

fn validate_side(name: &str, side: &SideSpec, categorical: &[String]) -> Result<()> {
    if side.metric.precomputed_matrix().is_some() {
        return Ok(());
    }
    if side.columns.is_empty() {
        return Err(Error::InvalidArgument(format!("no {name} columns given")));
    }
    let types: HashSet<ColumnType> = side.columns.iter().map(|c| column_type(categorical, c)).collect();
    if types.len() > 1 {
        return Err(Error::InvalidArgument(format!("{name} mixes numeric and categorical columns")));
    }
    if types.contains(&ColumnType::Categorical) && !matches!(side.metric.kind(), MetricKind::Discrete) {
        return Err(Error::InvalidArgument(format!(
            "{name} columns are categorical but the metric is `{}`; use discrete",
            side.metric
        )));
    }
    Ok(())
}

fn load_side(table: Option<&Table>, s: &SideSpec, categorical: &[String]) -> Result<SampleSet> {
    if let Some(m) = s.metric.precomputed_matrix() {
        if let Some(t) = table {
            if t.rows.len() != m.n() {
                return Err(Error::InvalidArgument(format!(
                    "precomputed matrix has {} points but the data has {} rows",
                    m.n(),
                    t.rows.len()
                )));
            }
        }
        return SampleSet::indices(m.n());
    }
    table
        .ok_or_else(|| Error::InvalidArgument("a data file is required for non-precomputed metrics".into()))?
        .sample(&s.columns, categorical)
}

/// Loads the aligned x and y samples described by `d`.
pub fn ingest(d: &DatasetSpec) -> Result<(SampleSet, SampleSet)> {
    d.validate()?;
    let table = d.path.as_deref().map(read_table).transpose()?;
    let x = load_side(table.as_ref(), &d.x, &d.categorical)?;
    let y = load_side(table.as_ref(), &d.y, &d.categorical)?;
    if x.len() != y.len() {
        return Err(Error::SizeMismatch { left: x.len(), right: y.len() });
    }
    Ok((x, y))
}

/// Loads a single sample, for diagnostics on one marginal.
pub fn ingest_single(path: Option<&Path>, side: &SideSpec, categorical: &[String]) -> Result<SampleSet> {
    validate_side("sample", side, categorical)?;
    let table = path.map(read_table).transpose()?;
    load_side(table.as_ref(), side, categorical)
}

struct Table {
    path: String,
    header: Vec<String>,
    rows: Vec<(u64, Vec<String>)>,
}

fn read_table(path: &Path) -> Result<Table> {
    let name = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::Dataset { path: name.clone(), message: e.to_string() })?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let header: Vec<String> = rdr.headers().map_err(|e| csv_error(&name, e))?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(&name, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push((line, rec.iter().map(str::to_owned).collect()));
    }
    if rows.is_empty() {
        return Err(Error::Dataset { path: name, message: "no data rows".into() });
    }
    Ok(Table { path: name, header, rows })
}

impl Table {
    fn column(&self, name: &str) -> Result<usize> {
        self.header.iter().position(|h| h == name).ok_or_else(|| Error::Dataset {
            path: self.path.clone(),
            message: format!("missing column `{name}` (have: {})", self.header.join(", ")),
        })
    }

    fn sample(&self, columns: &[String], categorical: &[String]) -> Result<SampleSet> {
        let idx = columns.iter().map(|c| self.column(c)).collect::<Result<Vec<_>>>()?;
        let categorical = column_type(categorical, &columns[0]) == ColumnType::Categorical;
        let mut points = Vec::with_capacity(self.rows.len());
        for (line, row) in &self.rows {
            if categorical {
                let label: Vec<&str> = idx.iter().map(|&k| row[k].as_str()).collect();
                points.push(Point::Label(label.join("|")));
            } else {
                let v = idx
                    .iter()
                    .zip(columns)
                    .map(|(&k, name)| {
                        parse_finite(&row[k]).ok_or_else(|| Error::Parse {
                            path: self.path.clone(),
                            line: *line,
                            column: name.clone(),
                            message: format!("`{}` is not a finite number", row[k]),
                        })
                    })
                    .collect::<Result<Vec<f64>>>()?;
                points.push(Point::Vector(v));
            }
        }
        SampleSet::new(points)
    }
}

/// Fully resolved run configuration, embedded in every report.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub x_columns: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub y_columns: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categorical: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric_x: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric_y: Option<String>,
    pub power: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permutations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_draws: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracles: Option<bool>,
}

/// Spectral verdict for one side of the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NegTypeEntry {
    pub side: String,
    pub metric: String,
    #[serde(flatten)]
    pub report: NegTypeReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_max_error: Option<f64>,
    /// Iteration of a violation search that produced `points`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search_iteration: Option<u64>,
    /// The diagnosed configuration, when it came from a search.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
}

/// Independent evaluation routes for the same `dcov` value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub trace: f64,
    pub definition: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel6: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tensor: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoricalSummary {
    pub n: u64,
    pub x_labels: Vec<String>,
    pub y_labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    #[serde(flatten)]
    pub dcov: CategoricalDcov,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pearson_chisq: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dcov: Option<DcovResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracles: Option<OracleSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tests: Vec<TestResult>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub negtype: Vec<NegTypeEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categorical: Option<CategoricalSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub calibration: Vec<CalibrationReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covdist: Option<CovDistReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    /// Wall-clock time; only recorded on request so that reports stay reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<f64>,
}

impl Report {
    pub fn new(command: &str, config: RunConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool: "metric-dcov".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            seed: None,
            dcov: None,
            oracles: None,
            tests: Vec::new(),
            negtype: Vec::new(),
            categorical: None,
            calibration: Vec::new(),
            covdist: None,
            warnings: Vec::new(),
            runtime_ms: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
        let p = dir.path().join(name);
        File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    fn spec(path: PathBuf, x: &[&str], y: &[&str], mx: MetricSpec, my: MetricSpec, cat: &[&str]) -> DatasetSpec {
        DatasetSpec {
            path: Some(path),
            x: SideSpec { columns: x.iter().map(|s| s.to_string()).collect(), metric: mx },
            y: SideSpec { columns: y.iter().map(|s| s.to_string()).collect(), metric: my },
            categorical: cat.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn numeric_columns() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "d.csv", "a,b\n1,2\n3,4.5\n");
        let (x, y) = ingest(&spec(p, &["a"], &["b"], MetricSpec::euclidean(), MetricSpec::euclidean(), &[]))
            .unwrap();
        assert_eq!(x.points(), &[Point::scalar(1.0), Point::scalar(3.0)]);
        assert_eq!(y.points(), &[Point::scalar(2.0), Point::scalar(4.5)]);
    }

    #[test]
    fn categorical_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "d.csv", "v,g\n1.5,a\n2.5,b\n0.1,a\n");
        let (_, y) = ingest(&spec(p.clone(), &["v"], &["g"], MetricSpec::euclidean(), MetricSpec::discrete(), &["g"]))
            .unwrap();
        assert_eq!(y.get(1), &Point::Label("b".into()));
        let bad = spec(p, &["v"], &["g"], MetricSpec::euclidean(), MetricSpec::euclidean(), &["g"]);
        assert!(matches!(ingest(&bad), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn nan_token_names_the_cell() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "d.csv", "a,b\n1,2\nNaN,3\n");
        let err = ingest(&spec(p, &["a"], &["b"], MetricSpec::euclidean(), MetricSpec::euclidean(), &[]))
            .unwrap_err();
        match err {
            Error::Parse { line, column, .. } => {
                assert_eq!(line, 3);
                assert_eq!(column, "a");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn missing_and_ragged() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "d.csv", "a,b\n1,2\n");
        let e = ingest(&spec(p, &["a"], &["zz"], MetricSpec::euclidean(), MetricSpec::euclidean(), &[]));
        assert!(matches!(e, Err(Error::Dataset { message, .. }) if message.contains("zz")));
        let p = write(&dir, "r.csv", "a,b\n1,2\n3\n");
        let e = ingest(&spec(p, &["a"], &["b"], MetricSpec::euclidean(), MetricSpec::euclidean(), &[]));
        assert!(matches!(e, Err(Error::Dataset { message, .. }) if message.contains("ragged")));
    }

    #[test]
    fn overlapping_columns_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "d.csv", "a,b\n1,2\n");
        let e = ingest(&spec(p, &["a", "b"], &["b"], MetricSpec::euclidean(), MetricSpec::euclidean(), &[]));
        assert!(matches!(e, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn precomputed_matrix_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "m.csv", "0,1,2\n1,0,1\n2,1,0\n");
        let m = parse_metric(&format!("precomputed:{}", p.display())).unwrap();
        assert_eq!(m.precomputed_matrix().unwrap().get(0, 2), 2.0);
        let p = write(&dir, "bad.csv", "0,1\n1,0,3\n");
        assert!(read_matrix_csv(&p).is_err());
        let p = write(&dir, "nan.csv", "0,x\nx,0\n");
        assert!(matches!(read_matrix_csv(&p), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn contingency_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "t.csv", "x\\y,u,v\na,30,20\nb,20,30\n");
        let t = read_contingency_csv(&p).unwrap();
        assert_eq!(t.y_labels(), &["u", "v"]);
        assert_eq!(t.counts(), &[vec![30, 20], vec![20, 30]]);
        let p = write(&dir, "bad.csv", "x,u,v\na,1,-2\n");
        assert!(matches!(read_contingency_csv(&p), Err(Error::Parse { line: 2, column, .. }) if column == "v"));
    }

    #[test]
    fn metric_strings() {
        assert!(matches!(parse_metric("minkowski:1.5").unwrap().kind(), MetricKind::Minkowski(p) if *p == 1.5));
        assert!(parse_metric("minkowski:0.5").is_err());
        assert!(parse_metric("cosine").is_err());
        assert_eq!(parse_metric("chebyshev").unwrap().to_string(), "chebyshev");
    }

    #[test]
    fn report_roundtrip() {
        let mut r = Report::new("dcov", RunConfig { power: 0.5, ..Default::default() });
        r.seed = Some(7);
        r.dcov = Some(DcovResult { n: 3, dcov: 0.1 + 0.2, dvar_x: 1.0 / 3.0, dvar_y: 2.0, dcor: None });
        let back = Report::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert!(r.to_json().contains("\"schema_version\": 1"));
    }
}
