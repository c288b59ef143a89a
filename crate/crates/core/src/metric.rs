//! Metrics, samples and distance matrices.
//!
//! A [`MetricSpec`] is a declarative description of a metric: a base kind
//! (euclidean, minkowski, chebyshev, discrete, a precomputed matrix, or the
//! sum of two metrics on pair-points) plus a snowflake power `d ↦ d^r` with
//! `r ∈ (0, 1]`. Powers above one are rejected because they break the
//! triangle inequality in general.

use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance used by the metric-axiom checks.
pub const AXIOM_TOL: f64 = 1e-12;

/// Rows at or above this count are evaluated on the rayon pool.
const PAR_MIN_ROWS: usize = 64;

/// A single observation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Point {
    Vector(Vec<f64>),
    Label(String),
    /// Index into a precomputed distance matrix.
    Index(usize),
    /// A point of a product space, for [`MetricKind::ProductSum`].
    Pair(Box<Point>, Box<Point>),
}

impl Point {
    pub fn scalar(v: f64) -> Self {
        Point::Vector(vec![v])
    }

    pub fn pair(a: Point, b: Point) -> Self {
        Point::Pair(Box::new(a), Box::new(b))
    }

    fn type_name(&self) -> &'static str {
        match self {
            Point::Vector(_) => "vector",
            Point::Label(_) => "label",
            Point::Index(_) => "index",
            Point::Pair(..) => "pair",
        }
    }

    fn representation(&self) -> Representation {
        match self {
            Point::Vector(v) => Representation::Vector(v.len()),
            Point::Label(_) => Representation::Label,
            Point::Index(_) => Representation::Index,
            Point::Pair(a, b) => {
                Representation::Pair(Box::new(a.representation()), Box::new(b.representation()))
            }
        }
    }

    fn is_finite(&self) -> bool {
        match self {
            Point::Vector(v) => v.iter().all(|x| x.is_finite()),
            Point::Pair(a, b) => a.is_finite() && b.is_finite(),
            _ => true,
        }
    }
}

impl Hash for Point {
    fn hash<H: Hasher>(&self, state: &mut H) {
        std::mem::discriminant(self).hash(state);
        match self {
            Point::Vector(v) => {
                v.len().hash(state);
                for x in v {
                    x.to_bits().hash(state);
                }
            }
            Point::Label(s) => s.hash(state),
            Point::Index(i) => i.hash(state),
            Point::Pair(a, b) => {
                a.hash(state);
                b.hash(state);
            }
        }
    }
}

/// Shared representation of every point in a [`SampleSet`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Representation {
    Vector(usize),
    Label,
    Index,
    Pair(Box<Representation>, Box<Representation>),
}

/// An ordered, immutable, non-empty sample `x₁, …, xₙ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    points: Vec<Point>,
    repr: Representation,
}

impl SampleSet {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::InvalidSample("a sample needs at least one point".into()))?;
        let repr = first.representation();
        for (i, p) in points.iter().enumerate() {
            let r = p.representation();
            if r != repr {
                return Err(Error::InvalidSample(format!(
                    "point {i} has representation {r:?}, expected {repr:?}"
                )));
            }
            if !p.is_finite() {
                return Err(Error::InvalidSample(format!("point {i} has a non-finite coordinate")));
            }
        }
        Ok(Self { points, repr })
    }

    pub fn from_vectors(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rows.into_iter().map(Point::Vector).collect())
    }

    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| Point::scalar(v)).collect())
    }

    pub fn from_labels<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        Self::new(labels.iter().map(|s| Point::Label(s.as_ref().to_owned())).collect())
    }

    /// Index points `0..n`, for use with a precomputed metric.
    pub fn indices(n: usize) -> Result<Self> {
        Self::new((0..n).map(Point::Index).collect())
    }

    /// Zips two aligned samples into pair-points `(xᵢ, yᵢ)`.
    pub fn zip(x: &SampleSet, y: &SampleSet) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::SizeMismatch { left: x.len(), right: y.len() });
        }
        Self::new(
            x.points
                .iter()
                .zip(&y.points)
                .map(|(a, b)| Point::pair(a.clone(), b.clone()))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn get(&self, i: usize) -> &Point {
        &self.points[i]
    }

    pub fn representation(&self) -> &Representation {
        &self.repr
    }

    /// Vector dimension, if the sample holds vectors.
    pub fn dim(&self) -> Option<usize> {
        match self.repr {
            Representation::Vector(d) => Some(d),
            _ => None,
        }
    }

    /// Reorders the sample: point `i` of the result is point `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.len() {
            return Err(Error::SizeMismatch { left: perm.len(), right: self.len() });
        }
        Self::new(perm.iter().map(|&i| self.points[i].clone()).collect())
    }

    /// Content hash of the sample; stable within a process.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.points.hash(&mut h);
        h.finish()
    }
}

/// A named distance matrix supplied from outside (graph, string, ... metrics).
#[derive(Clone, Debug)]
pub struct Precomputed {
    pub id: String,
    pub matrix: Arc<DistanceMatrix>,
}

#[derive(Clone, Debug)]
pub enum MetricKind {
    Euclidean,
    Minkowski(f64),
    Chebyshev,
    Discrete,
    Precomputed(Precomputed),
    /// `d_X(x, x') + d_Y(y, y')` on pair-points.
    ProductSum(Box<MetricSpec>, Box<MetricSpec>),
}

#[derive(Clone, Debug)]
pub struct MetricSpec {
    kind: MetricKind,
    power: f64,
}

impl MetricSpec {
    pub fn new(kind: MetricKind, power: f64) -> Result<Self> {
        validate_power(power)?;
        if let MetricKind::Minkowski(p) = kind {
            if !(p.is_finite() && p >= 1.0) {
                return Err(Error::InvalidMinkowski(p));
            }
        }
        Ok(Self { kind, power })
    }

    pub fn euclidean() -> Self {
        Self { kind: MetricKind::Euclidean, power: 1.0 }
    }

    pub fn chebyshev() -> Self {
        Self { kind: MetricKind::Chebyshev, power: 1.0 }
    }

    pub fn discrete() -> Self {
        Self { kind: MetricKind::Discrete, power: 1.0 }
    }

    pub fn minkowski(p: f64) -> Result<Self> {
        Self::new(MetricKind::Minkowski(p), 1.0)
    }

    pub fn precomputed(id: impl Into<String>, matrix: DistanceMatrix) -> Self {
        Self {
            kind: MetricKind::Precomputed(Precomputed { id: id.into(), matrix: Arc::new(matrix) }),
            power: 1.0,
        }
    }

    pub fn kind(&self) -> &MetricKind {
        &self.kind
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    /// The underlying precomputed matrix, if any.
    pub fn precomputed_matrix(&self) -> Option<&DistanceMatrix> {
        match &self.kind {
            MetricKind::Precomputed(p) => Some(&p.matrix),
            _ => None,
        }
    }

    fn eval_base(&self, a: &Point, b: &Point) -> Result<f64> {
        match &self.kind {
            MetricKind::Euclidean => {
                let (u, v) = vectors(self, a, b)?;
                Ok(u.iter().zip(v).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
            }
            MetricKind::Minkowski(p) => {
                let (u, v) = vectors(self, a, b)?;
                let s: f64 = u.iter().zip(v).map(|(x, y)| (x - y).abs().powf(*p)).sum();
                Ok(s.powf(1.0 / p))
            }
            MetricKind::Chebyshev => {
                let (u, v) = vectors(self, a, b)?;
                Ok(u.iter().zip(v).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
            }
            MetricKind::Discrete => {
                if a.representation() != b.representation() {
                    return Err(Error::IncompatiblePoint {
                        metric: self.to_string(),
                        point: "mixed",
                    });
                }
                Ok(if a == b { 0.0 } else { 1.0 })
            }
            MetricKind::Precomputed(pc) => match (a, b) {
                (Point::Index(i), Point::Index(j)) => {
                    let n = pc.matrix.n();
                    for &k in [i, j].iter() {
                        if *k >= n {
                            return Err(Error::IndexOutOfRange { index: *k, n });
                        }
                    }
                    Ok(pc.matrix.get(*i, *j))
                }
                _ => Err(Error::PrecomputedNeedsIndex(pc.id.clone())),
            },
            MetricKind::ProductSum(sx, sy) => match (a, b) {
                (Point::Pair(ax, ay), Point::Pair(bx, by)) => {
                    Ok(eval_metric(sx, ax, bx)? + eval_metric(sy, ay, by)?)
                }
                _ => Err(Error::IncompatiblePoint {
                    metric: self.to_string(),
                    point: if matches!(a, Point::Pair(..)) { b.type_name() } else { a.type_name() },
                }),
            },
        }
    }
}

impl fmt::Display for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            MetricKind::Euclidean => write!(f, "euclidean")?,
            MetricKind::Minkowski(p) => write!(f, "minkowski:{p}")?,
            MetricKind::Chebyshev => write!(f, "chebyshev")?,
            MetricKind::Discrete => write!(f, "discrete")?,
            MetricKind::Precomputed(pc) => write!(f, "precomputed:{}", pc.id)?,
            MetricKind::ProductSum(a, b) => write!(f, "sum({a},{b})")?,
        }
        if self.power != 1.0 {
            write!(f, "^{}", self.power)?;
        }
        Ok(())
    }
}

fn validate_power(r: f64) -> Result<()> {
    if r > 0.0 && r <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidPower(r))
    }
}

fn vectors<'a>(spec: &MetricSpec, a: &'a Point, b: &'a Point) -> Result<(&'a [f64], &'a [f64])> {
    match (a, b) {
        (Point::Vector(u), Point::Vector(v)) => {
            if u.len() != v.len() {
                return Err(Error::DimensionMismatch { left: u.len(), right: v.len() });
            }
            Ok((u, v))
        }
        (Point::Index(_), _) | (_, Point::Index(_)) => Err(Error::IncompatiblePoint {
            metric: spec.to_string(),
            point: "index",
        }),
        _ => Err(Error::IncompatiblePoint {
            metric: spec.to_string(),
            point: if matches!(a, Point::Vector(_)) { b.type_name() } else { a.type_name() },
        }),
    }
}

/// `d(a, b)` including the power transform. Exactly zero when `a == b`.
pub fn eval_metric(spec: &MetricSpec, a: &Point, b: &Point) -> Result<f64> {
    let d = spec.eval_base(a, b)?;
    Ok(if spec.power == 1.0 { d } else { d.powf(spec.power) })
}

/// Snowflake transform `d ↦ d^r`. Powers compose multiplicatively.
pub fn power_transform(spec: &MetricSpec, r: f64) -> Result<MetricSpec> {
    validate_power(r)?;
    let power = spec.power * r;
    validate_power(power)?;
    Ok(MetricSpec { kind: spec.kind.clone(), power })
}

/// `(d_X(x, x') + d_Y(y, y'))^r` on pair-points.
pub fn product_sum_metric(sx: &MetricSpec, sy: &MetricSpec, r: f64) -> Result<MetricSpec> {
    MetricSpec::new(MetricKind::ProductSum(Box::new(sx.clone()), Box::new(sy.clone())), r)
}

/// Symmetric `n × n` matrix of pairwise distances, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    /// Validates shape, finiteness, non-negativity, zero diagonal and
    /// symmetry (within [`AXIOM_TOL`]; the result is symmetrized exactly).
    /// The triangle inequality is not checked here, see [`check_metric_axioms`].
    pub fn new(n: usize, mut data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidMatrix("empty matrix".into()));
        }
        if data.len() != n * n {
            return Err(Error::InvalidMatrix(format!(
                "expected {} entries for n = {n}, got {}",
                n * n,
                data.len()
            )));
        }
        for i in 0..n {
            if data[i * n + i] != 0.0 {
                return Err(Error::InvalidMatrix(format!("diagonal entry {i} is not zero")));
            }
            for j in 0..n {
                let v = data[i * n + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidMatrix(format!("entry ({i}, {j}) = {v}")));
                }
            }
            for j in i + 1..n {
                let (u, l) = (data[i * n + j], data[j * n + i]);
                if (u - l).abs() > AXIOM_TOL {
                    return Err(Error::InvalidMatrix(format!(
                        "not symmetric at ({i}, {j}): {u} vs {l}"
                    )));
                }
                let m = 0.5 * (u + l);
                data[i * n + j] = m;
                data[j * n + i] = m;
            }
        }
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::InvalidMatrix(format!("row {i} has {} entries, expected {n}", r.len())));
        }
        Self::new(n, rows.into_iter().flatten().collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    /// Rescales every distance by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.n, self.data.iter().map(|d| d * c).collect())
    }

    /// Sub-matrix selected (and reordered) by `idx`.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(idx.len() * idx.len());
        for &i in idx {
            if i >= self.n {
                return Err(Error::IndexOutOfRange { index: i, n: self.n });
            }
            for &j in idx {
                data.push(self.get(i, j));
            }
        }
        Self::new(idx.len(), data)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(<[f64]>::to_vec).collect()
    }
}

/// Materializes `D[i][j] = d(sᵢ, sⱼ)`.
///
/// The upper triangle is evaluated row by row (on the rayon pool for larger
/// samples) and mirrored, so the result does not depend on the worker count.
pub fn distance_matrix(spec: &MetricSpec, s: &SampleSet) -> Result<DistanceMatrix> {
    let n = s.len();
    let pts = s.points();
    let row = |i: usize| -> Result<Vec<f64>> {
        (i + 1..n).map(|j| eval_metric(spec, &pts[i], &pts[j])).collect()
    };
    let upper: Vec<Vec<f64>> = if n >= PAR_MIN_ROWS {
        (0..n).into_par_iter().map(row).collect::<Result<_>>()?
    } else {
        (0..n).map(row).collect::<Result<_>>()?
    };
    let mut data = vec![0.0; n * n];
    for (i, r) in upper.iter().enumerate() {
        for (k, &v) in r.iter().enumerate() {
            let j = i + 1 + k;
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
    }
    // n = 1 evaluates no pair; still surface incompatible point types.
    if let Some(p) = pts.first() {
        eval_metric(spec, p, p)?;
    }
    DistanceMatrix::new(n, data)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub passed: bool,
    pub symmetric: bool,
    pub identity: bool,
    pub triangle: bool,
    /// Largest violation found, in distance units (0 when none).
    pub worst_violation: f64,
    /// `(i, j, k)` (0-based) with `d(i, k) > d(i, j) + d(j, k) + tol`.
    pub worst_triple: Option<(usize, usize, usize)>,
}

/// Checks symmetry, identity of indiscernibles and the triangle inequality on
/// every pair and triple of the sample.
pub fn check_metric_axioms(spec: &MetricSpec, s: &SampleSet, tol: f64) -> Result<AxiomReport> {
    let n = s.len();
    let pts = s.points();
    let mut m = vec![0.0; n * n];
    let mut symmetric = true;
    let mut identity = true;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = eval_metric(spec, &pts[i], &pts[j])?;
        }
    }
    for i in 0..n {
        if m[i * n + i].abs() > tol {
            identity = false;
            worst = worst.max(m[i * n + i].abs());
        }
        for j in i + 1..n {
            let (u, l) = (m[i * n + j], m[j * n + i]);
            if (u - l).abs() > tol {
                symmetric = false;
                worst = worst.max((u - l).abs());
            }
            if u < -tol {
                identity = false;
                worst = worst.max(-u);
            }
            if pts[i] != pts[j] && u <= tol {
                identity = false;
            }
        }
    }
    let mut triangle = true;
    let mut worst_triple = None;
    let mut worst_tri = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let excess = m[i * n + k] - m[i * n + j] - m[j * n + k];
                if excess > tol {
                    triangle = false;
                    if excess > worst_tri {
                        worst_tri = excess;
                        worst_triple = Some((i, j, k));
                    }
                }
            }
        }
    }
    let worst_violation = worst.max(worst_tri);
    Ok(AxiomReport {
        passed: symmetric && identity && triangle,
        symmetric,
        identity,
        triangle,
        worst_violation,
        worst_triple,
    })
}
