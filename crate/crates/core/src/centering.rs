//! Double centering and energy functionals of signed discrete measures.
//!
//! For a measure `μ` with weights `wᵢ` on `xᵢ`:
//!
//! ```text
//! a_μ(x)      = Σⱼ wⱼ d(x, xⱼ)
//! D(μ)        = Σᵢⱼ wᵢ wⱼ d(xᵢ, xⱼ)
//! d_μ(x, x')  = d(x, x') − a_μ(x) − a_μ(x') + D(μ)
//! ```
//!
//! With uniform weights `1/n` the matrix of `d_μ(xᵢ, xⱼ)` is `PKP`, where `P`
//! projects out the constant vector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{eval_metric, DistanceMatrix, MetricSpec, Point};
use crate::sum::exact_sum;

/// Doubly centered distance matrix with its cached row means `a` and grand
/// mean `D`. `weights` is `None` for the empirical measure (weights `1/n`).
#[derive(Clone, Debug, PartialEq)]
pub struct CenteredMatrix {
    n: usize,
    entries: Vec<f64>,
    row_means: Vec<f64>,
    grand_mean: f64,
    weights: Option<Vec<f64>>,
}

impl CenteredMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    /// `a_μ(xᵢ)` for every sample point.
    pub fn row_means(&self) -> &[f64] {
        &self.row_means
    }

    /// `D(μ)`.
    pub fn grand_mean(&self) -> f64 {
        self.grand_mean
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn is_uniform(&self) -> bool {
        self.weights.is_none()
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        match &self.weights {
            Some(w) => w[i],
            None => 1.0 / self.n as f64,
        }
    }

    /// Row sums `Σⱼ n wⱼ d_μ(xᵢ, xⱼ)` (plain row sums for uniform weights);
    /// zero up to rounding.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| exact_sum((0..self.n).map(|j| self.weight(j) * self.get(i, j))) * self.n as f64)
            .collect()
    }

    /// `(1/n²) Σᵢⱼ d_μ(xᵢ, xⱼ)²` under the sample weights, i.e. `‖d_μ‖²` in `L²(μ×μ)`.
    pub fn l2_norm_sq(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            let wi = self.weight(i);
            for j in 0..self.n {
                let v = self.get(i, j);
                s += wi * self.weight(j) * v * v;
            }
        }
        s
    }

    /// `K̄` as an nalgebra matrix.
    pub fn to_dmatrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.n, self.n, &self.entries)
    }

    /// Returns the matrix with rows and columns reordered by `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::SizeMismatch { left: perm.len(), right: self.n });
        }
        let n = self.n;
        let mut entries = Vec::with_capacity(n * n);
        for &i in perm {
            for &j in perm {
                entries.push(self.get(i, j));
            }
        }
        Ok(Self {
            n,
            entries,
            row_means: perm.iter().map(|&i| self.row_means[i]).collect(),
            grand_mean: self.grand_mean,
            weights: self.weights.as_ref().map(|w| perm.iter().map(|&i| w[i]).collect()),
        })
    }
}

/// Centers under the empirical measure of the sample.
pub fn double_center(d: &DistanceMatrix) -> CenteredMatrix {
    let n = d.n();
    let nf = n as f64;
    let row_means: Vec<f64> = (0..n).map(|i| exact_sum(d.row(i).iter().copied()) / nf).collect();
    let grand_mean = exact_sum(row_means.iter().copied()) / nf;
    finish(d, row_means, grand_mean, None)
}

/// Centers under a probability measure with the given weights on the sample
/// points. Weights must be finite, non-negative and sum to one (±1e-12).
pub fn double_center_weighted(d: &DistanceMatrix, weights: &[f64]) -> Result<CenteredMatrix> {
    let n = d.n();
    if weights.len() != n {
        return Err(Error::SizeMismatch { left: weights.len(), right: n });
    }
    validate_probability(weights)?;
    let row_means: Vec<f64> =
        (0..n).map(|i| exact_sum(d.row(i).iter().zip(weights).map(|(x, w)| x * w))).collect();
    let grand_mean = exact_sum(row_means.iter().zip(weights).map(|(a, w)| a * w));
    Ok(finish(d, row_means, grand_mean, Some(weights.to_vec())))
}

pub(crate) fn validate_probability(weights: &[f64]) -> Result<()> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidMeasure("weights must be finite and non-negative".into()));
    }
    let total = exact_sum(weights.iter().copied());
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidMeasure(format!("weights sum to {total}, expected 1")));
    }
    Ok(())
}

fn finish(d: &DistanceMatrix, row_means: Vec<f64>, grand_mean: f64, weights: Option<Vec<f64>>) -> CenteredMatrix {
    let n = d.n();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            // symmetric in (i, j) so that relabelling the sample relabels the entries exactly
            let v = (d.get(i, j) - (row_means[i] + row_means[j])) + grand_mean;
            entries[i * n + j] = v;
            entries[j * n + i] = v;
        }
    }
    CenteredMatrix { n, entries, row_means, grand_mean, weights }
}

/// Finitely supported signed measure `Σ wᵢ δ(xᵢ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignedDiscreteMeasure {
    points: Vec<Point>,
    weights: Vec<f64>,
}

impl SignedDiscreteMeasure {
    pub fn new(points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::SizeMismatch { left: points.len(), right: weights.len() });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidMeasure("weights must be finite".into()));
        }
        Ok(Self { points, weights })
    }

    pub fn point_mass(p: Point) -> Self {
        Self { points: vec![p], weights: vec![1.0] }
    }

    pub fn uniform(points: Vec<Point>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidMeasure("uniform measure needs at least one point".into()));
        }
        let w = 1.0 / points.len() as f64;
        let weights = vec![w; points.len()];
        Self::new(points, weights)
    }

    /// `self − other`, as one measure on the concatenated supports.
    pub fn minus(&self, other: &Self) -> Self {
        let mut points = self.points.clone();
        points.extend(other.points.iter().cloned());
        let mut weights = self.weights.clone();
        weights.extend(other.weights.iter().map(|w| -w));
        Self { points, weights }
    }

    /// `c · self`.
    pub fn scaled(&self, c: f64) -> Self {
        Self { points: self.points.clone(), weights: self.weights.iter().map(|w| c * w).collect() }
    }

    /// `self + other`.
    pub fn plus(&self, other: &Self) -> Self {
        self.minus(&other.scaled(-1.0))
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        exact_sum(self.weights.iter().copied())
    }

    pub fn is_probability(&self) -> bool {
        validate_probability(&self.weights).is_ok()
    }
}

/// `D(m) = Σᵢⱼ wᵢ wⱼ d(xᵢ, xⱼ)`.
pub fn energy(m: &SignedDiscreteMeasure, spec: &MetricSpec) -> Result<f64> {
    cross_energy(m, m, spec)
}

/// `∫∫ d(x, x') dm₁(x) dm₂(x')`.
pub fn cross_energy(m1: &SignedDiscreteMeasure, m2: &SignedDiscreteMeasure, spec: &MetricSpec) -> Result<f64> {
    let mut terms = Vec::with_capacity(m1.points.len() * m2.points.len());
    for (p, w) in m1.points.iter().zip(&m1.weights) {
        for (q, v) in m2.points.iter().zip(&m2.weights) {
            terms.push(w * v * eval_metric(spec, p, q)?);
        }
    }
    Ok(exact_sum(terms))
}

/// `a_m(x) = Σⱼ wⱼ d(x, xⱼ)`.
pub fn a_function(m: &SignedDiscreteMeasure, spec: &MetricSpec, x: &Point) -> Result<f64> {
    let terms = m
        .points
        .iter()
        .zip(&m.weights)
        .map(|(p, w)| eval_metric(spec, x, p).map(|d| w * d))
        .collect::<Result<Vec<_>>>()?;
    Ok(exact_sum(terms))
}
