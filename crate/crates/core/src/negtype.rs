//! Spectral diagnostics for negative type and finite-sample Hilbert embeddings.
//!
//! A metric has negative type when `Σᵢⱼ αᵢ αⱼ d(xᵢ, xⱼ) ≤ 0` for every
//! sum-zero `α`, i.e. when the doubly centered matrix `K̄ = PKP` is negative
//! semidefinite. [`negtype_check`] eigen-decomposes `K̄` for one sample:
//!
//! * a violation comes with a witness `α` and is a proof that the metric is
//!   not of negative type;
//! * a pass only certifies the given points. It is evidence, never a proof,
//!   that the whole space has negative type.
//!
//! Strict and strong negative type cannot be certified from finite samples.
//! The ℓ¹ metric on the plane is of negative type but not strict: the two
//! diagonals of the unit square carry measures with `D(μ₁ − μ₂) = 0`. Such
//! failures are only detectable on measure pairs supplied by the caller, see
//! [`crate::centering::energy`] and [`barycenter`].
//!
//! When `K̄ ≤ 0` the rows of `√(−K̄)/√2` embed the sample isometrically in the
//! sense `‖φᵢ − φⱼ‖² = d(xᵢ, xⱼ)`; [`embed_sample`] returns that embedding in
//! its spectral coordinates, one axis per nonzero eigenvalue.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::centering::{double_center, SignedDiscreteMeasure};
use crate::error::{Error, Result};
use crate::metric::{distance_matrix, DistanceMatrix, MetricSpec, Point, SampleSet};
use crate::rng::stream_rng;

/// Default relative eigenvalue tolerance (multiplies the spectral radius).
pub const DEFAULT_TOL: f64 = 1e-9;

/// Eigenvalues below this fraction of the spectral radius are numerically zero.
const RANK_FLOOR: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    NegativeTypeOnSample,
    Violation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NegTypeReport {
    pub n: usize,
    pub max_eigenvalue: f64,
    pub min_eigenvalue: f64,
    pub spectral_radius: f64,
    pub tol: f64,
    pub verdict: Verdict,
    /// Sum-zero weights with `Σ αᵢ αⱼ d(xᵢ, xⱼ) > 0`, present iff violation.
    pub witness: Option<Vec<f64>>,
    /// `Σ αᵢ αⱼ d(xᵢ, xⱼ)` for the witness, evaluated on the raw distances.
    pub witness_quadratic_form: Option<f64>,
}

pub(crate) fn symmetric_eigen(m: DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let n = m.nrows().max(1);
    SymmetricEigen::try_new(m, f64::EPSILON, 1000 * n).ok_or(Error::EigenFailure)
}

/// `Σᵢⱼ αᵢ αⱼ d(xᵢ, xⱼ)`.
pub fn quadratic_form(d: &DistanceMatrix, alpha: &[f64]) -> f64 {
    let n = d.n();
    let mut s = 0.0;
    for i in 0..n {
        let row = d.row(i);
        let inner: f64 = row.iter().zip(alpha).map(|(x, a)| x * a).sum();
        s += alpha[i] * inner;
    }
    s
}

/// Eigen-decomposes `K̄` and reports whether the sample is of negative type
/// at relative tolerance `tol`.
pub fn negtype_check(d: &DistanceMatrix, tol: f64) -> Result<NegTypeReport> {
    let n = d.n();
    if n < 2 {
        return Err(Error::InvalidArgument("negtype_check needs at least two points".into()));
    }
    let kc = double_center(d);
    let eig = symmetric_eigen(kc.to_dmatrix())?;
    let (mut imax, mut imin) = (0, 0);
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        if l > eig.eigenvalues[imax] {
            imax = k;
        }
        if l < eig.eigenvalues[imin] {
            imin = k;
        }
    }
    let max_eigenvalue = eig.eigenvalues[imax];
    let min_eigenvalue = eig.eigenvalues[imin];
    let spectral_radius = max_eigenvalue.abs().max(min_eigenvalue.abs());
    let violation = spectral_radius > 0.0 && max_eigenvalue > tol * spectral_radius;

    let (witness, witness_quadratic_form) = if violation {
        let mut alpha: Vec<f64> = eig.eigenvectors.column(imax).iter().copied().collect();
        // Eigenvectors of nonzero eigenvalues are orthogonal to the constants;
        // remove the rounding residue.
        let mean = alpha.iter().sum::<f64>() / n as f64;
        alpha.iter_mut().for_each(|a| *a -= mean);
        let norm = alpha.iter().map(|a| a * a).sum::<f64>().sqrt();
        alpha.iter_mut().for_each(|a| *a /= norm);
        let q = quadratic_form(d, &alpha);
        (Some(alpha), Some(q))
    } else {
        (None, None)
    };

    Ok(NegTypeReport {
        n,
        max_eigenvalue,
        min_eigenvalue,
        spectral_radius,
        tol,
        verdict: if violation { Verdict::Violation } else { Verdict::NegativeTypeOnSample },
        witness,
        witness_quadratic_form,
    })
}

/// Points `φ(x₁), …, φ(xₙ)` of a Hilbert space with `‖φᵢ − φⱼ‖² = d(xᵢ, xⱼ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    n: usize,
    dim: usize,
    coords: Vec<f64>,
}

impl Embedding {
    pub fn new(n: usize, dim: usize, coords: Vec<f64>) -> Result<Self> {
        if coords.len() != n * dim {
            return Err(Error::SizeMismatch { left: coords.len(), right: n * dim });
        }
        Ok(Self { n, dim, coords })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn sq_dist(&self, i: usize, j: usize) -> f64 {
        self.point(i).iter().zip(self.point(j)).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    pub fn inner(&self, i: usize, j: usize) -> f64 {
        dot(self.point(i), self.point(j))
    }

    /// Largest `|‖φᵢ − φⱼ‖² − d(xᵢ, xⱼ)|` over all pairs.
    pub fn max_roundtrip_error(&self, d: &DistanceMatrix) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in i + 1..self.n {
                worst = worst.max((self.sq_dist(i, j) - d.get(i, j)).abs());
            }
        }
        worst
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Spectral embedding of a sample of negative type.
///
/// Eigenvalues of `K̄` in `(0, tol·radius]` are clamped to zero; a larger
/// positive eigenvalue is an error carrying the [`NegTypeReport`].
pub fn embed_sample(d: &DistanceMatrix, tol: f64) -> Result<Embedding> {
    let n = d.n();
    if n == 1 {
        return Embedding::new(1, 0, vec![]);
    }
    let report = negtype_check(d, tol)?;
    if report.verdict == Verdict::Violation {
        return Err(Error::NotNegativeType(Box::new(report)));
    }
    let kc = double_center(d);
    let eig = symmetric_eigen(kc.to_dmatrix())?;
    let floor = RANK_FLOOR * report.spectral_radius;
    let axes: Vec<usize> = (0..n).filter(|&k| -eig.eigenvalues[k] > floor).collect();
    let dim = axes.len();
    let mut coords = vec![0.0; n * dim];
    for (c, &k) in axes.iter().enumerate() {
        let scale = (-eig.eigenvalues[k] / 2.0).sqrt();
        for i in 0..n {
            coords[i * dim + c] = eig.eigenvectors[(i, k)] * scale;
        }
    }
    Embedding::new(n, dim, coords)
}

/// `β(m) = Σᵢ wᵢ φ(xᵢ)` for a measure whose points are indices into the
/// embedded sample.
pub fn barycenter(e: &Embedding, m: &SignedDiscreteMeasure) -> Result<Vec<f64>> {
    let mut out = vec![0.0; e.dim];
    for (p, w) in m.points().iter().zip(m.weights()) {
        let i = match p {
            Point::Index(i) if *i < e.n => *i,
            Point::Index(i) => return Err(Error::IndexOutOfRange { index: *i, n: e.n }),
            _ => return Err(Error::InvalidMeasure("barycenter needs index points".into())),
        };
        for (o, x) in out.iter_mut().zip(e.point(i)) {
            *o += w * x;
        }
    }
    Ok(out)
}

/// Maximum deviations of the three variance identities for the empirical
/// measure `μ` of an embedded sample, with `β = β(μ)`:
///
/// * `a_μ(xᵢ) = ‖φᵢ − β‖² + D(μ)/2`
/// * `D(μ) = 2 Var(φ(X))`
/// * `d_μ(xᵢ, xⱼ) = −2 ⟨φᵢ − β, φⱼ − β⟩`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarIdentityReport {
    pub a_function_dev: f64,
    pub energy_variance_dev: f64,
    pub centered_inner_dev: f64,
}

impl VarIdentityReport {
    pub fn max_dev(&self) -> f64 {
        self.a_function_dev.max(self.energy_variance_dev).max(self.centered_inner_dev)
    }
}

pub fn varx_identities_check(e: &Embedding, d: &DistanceMatrix) -> Result<VarIdentityReport> {
    let n = d.n();
    if e.n != n {
        return Err(Error::SizeMismatch { left: e.n, right: n });
    }
    let kc = double_center(d);
    let beta = barycenter(e, &SignedDiscreteMeasure::uniform((0..n).map(Point::Index).collect())?)?;
    let centered: Vec<Vec<f64>> =
        (0..n).map(|i| e.point(i).iter().zip(&beta).map(|(x, b)| x - b).collect()).collect();
    let sq: Vec<f64> = centered.iter().map(|c| dot(c, c)).collect();
    let big = kc.grand_mean();

    let a_function_dev = (0..n)
        .map(|i| (kc.row_means()[i] - (sq[i] + big / 2.0)).abs())
        .fold(0.0, f64::max);
    let variance = sq.iter().sum::<f64>() / n as f64;
    let energy_variance_dev = (big - 2.0 * variance).abs();
    let mut centered_inner_dev: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let v = kc.get(i, j) + 2.0 * dot(&centered[i], &centered[j]);
            centered_inner_dev = centered_inner_dev.max(v.abs());
        }
    }
    Ok(VarIdentityReport { a_function_dev, energy_variance_dev, centered_inner_dev })
}

/// Draws random points for [`search_negtype_violation`].
pub trait PointSampler: Sync {
    fn sample(&self, rng: &mut ChaCha8Rng) -> Point;
}

/// Uniform on `[-half_width, half_width]^dim`.
#[derive(Clone, Copy, Debug)]
pub struct UniformCube {
    pub dim: usize,
    pub half_width: f64,
}

impl PointSampler for UniformCube {
    fn sample(&self, rng: &mut ChaCha8Rng) -> Point {
        Point::Vector((0..self.dim).map(|_| rng.random_range(-self.half_width..=self.half_width)).collect())
    }
}

/// Uniform on the integer grid `{-max_abs, …, max_abs}^dim`.
#[derive(Clone, Copy, Debug)]
pub struct IntegerGrid {
    pub dim: usize,
    pub max_abs: i32,
}

impl PointSampler for IntegerGrid {
    fn sample(&self, rng: &mut ChaCha8Rng) -> Point {
        Point::Vector((0..self.dim).map(|_| rng.random_range(-self.max_abs..=self.max_abs) as f64).collect())
    }
}

#[derive(Clone, Debug)]
pub struct FoundViolation {
    pub iteration: u64,
    pub sample: SampleSet,
    pub distances: DistanceMatrix,
    pub report: NegTypeReport,
}

/// Iterations evaluated per parallel batch in the violation search.
const SEARCH_BATCH: u64 = 256;

/// Samples `iterations` configurations of `n_points` points and returns the
/// first (lowest iteration index) that violates negative type.
///
/// Iteration `k` uses stream `k` of `seed`, so the answer is independent of
/// the worker count.
pub fn search_negtype_violation<S: PointSampler>(
    spec: &MetricSpec,
    sampler: &S,
    n_points: usize,
    iterations: u64,
    seed: u64,
    tol: f64,
) -> Result<Option<FoundViolation>> {
    if n_points < 2 {
        return Err(Error::InvalidArgument("search needs at least two points per configuration".into()));
    }
    let attempt = |k: u64| -> Result<Option<FoundViolation>> {
        let mut rng = stream_rng(seed, k);
        let sample = SampleSet::new((0..n_points).map(|_| sampler.sample(&mut rng)).collect())?;
        let distances = distance_matrix(spec, &sample)?;
        let report = negtype_check(&distances, tol)?;
        Ok((report.verdict == Verdict::Violation).then_some(FoundViolation {
            iteration: k,
            sample,
            distances,
            report,
        }))
    };
    let mut start = 0;
    while start < iterations {
        let end = (start + SEARCH_BATCH).min(iterations);
        let batch: Vec<Option<FoundViolation>> =
            (start..end).into_par_iter().map(attempt).collect::<Result<_>>()?;
        if let Some(found) = batch.into_iter().flatten().next() {
            return Ok(Some(found));
        }
        start = end;
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::centering::energy;
    use crate::metric::power_transform;

    fn line(xs: &[f64]) -> DistanceMatrix {
        distance_matrix(&MetricSpec::euclidean(), &SampleSet::from_scalars(xs).unwrap()).unwrap()
    }

    #[test]
    fn two_points_spectrum() {
        let r = negtype_check(&line(&[0.0, 3.0]), DEFAULT_TOL).unwrap();
        assert_eq!(r.verdict, Verdict::NegativeTypeOnSample);
        assert!((r.min_eigenvalue + 3.0).abs() < 1e-12);
        assert!(r.max_eigenvalue.abs() < 1e-12);
        assert!(r.witness.is_none());
    }

    #[test]
    fn needs_two_points() {
        assert!(negtype_check(&line(&[1.0]), DEFAULT_TOL).is_err());
    }

    #[test]
    fn embedding_of_two_points() {
        let e = embed_sample(&line(&[0.0, 4.0]), DEFAULT_TOL).unwrap();
        assert_eq!(e.dim(), 1);
        assert!((e.sq_dist(0, 1).sqrt() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn embedding_reproduces_line_distances() {
        let d = line(&[0.0, 1.0, 3.0]);
        let e = embed_sample(&d, DEFAULT_TOL).unwrap();
        assert!(e.max_roundtrip_error(&d) < 1e-12);
        assert_eq!(e.dim(), 2);
    }

    #[test]
    fn single_point_identities_degenerate() {
        let d = line(&[2.0]);
        let e = embed_sample(&d, DEFAULT_TOL).unwrap();
        let r = varx_identities_check(&e, &d).unwrap();
        assert_eq!(r.max_dev(), 0.0);
    }

    #[test]
    fn two_point_identities() {
        let d = line(&[0.0, 1.0]);
        let e = embed_sample(&d, DEFAULT_TOL).unwrap();
        assert!(varx_identities_check(&e, &d).unwrap().max_dev() < 1e-15);
    }

    #[test]
    fn barycenter_examples() {
        let d = line(&[0.0, 1.0]);
        let e = embed_sample(&d, DEFAULT_TOL).unwrap();
        let b = barycenter(&e, &SignedDiscreteMeasure::point_mass(Point::Index(1))).unwrap();
        assert_eq!(b, e.point(1));

        // δ₀ − δ₁ at distance 1: D = −2, so ‖β‖² = 1.
        let m = SignedDiscreteMeasure::new(vec![Point::Index(0), Point::Index(1)], vec![1.0, -1.0]).unwrap();
        let beta = barycenter(&e, &m).unwrap();
        let norm_sq: f64 = beta.iter().map(|x| x * x).sum();
        assert!((norm_sq - 1.0).abs() < 1e-12);
        let pts = SignedDiscreteMeasure::new(vec![Point::scalar(0.0), Point::scalar(1.0)], vec![1.0, -1.0]).unwrap();
        assert!((energy(&pts, &MetricSpec::euclidean()).unwrap() + 2.0 * norm_sq).abs() < 1e-12);

        assert!(barycenter(&e, &SignedDiscreteMeasure::point_mass(Point::Index(5))).is_err());
        assert!(barycenter(&e, &SignedDiscreteMeasure::point_mass(Point::scalar(0.0))).is_err());
    }

    #[test]
    fn l1_square_barycenter_vanishes() {
        let l1 = MetricSpec::minkowski(1.0).unwrap();
        let s = SampleSet::from_vectors(vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]])
            .unwrap();
        let d = distance_matrix(&l1, &s).unwrap();
        let e = embed_sample(&d, DEFAULT_TOL).unwrap();
        let m = SignedDiscreteMeasure::new((0..4).map(Point::Index).collect(), vec![0.5, 0.5, -0.5, -0.5])
            .unwrap();
        let beta = barycenter(&e, &m).unwrap();
        assert!(beta.iter().map(|x| x * x).sum::<f64>() < 1e-24);
    }

    #[test]
    fn euclidean_search_finds_nothing() {
        let found = search_negtype_violation(
            &MetricSpec::euclidean(),
            &UniformCube { dim: 2, half_width: 1.0 },
            6,
            500,
            11,
            DEFAULT_TOL,
        )
        .unwrap();
        assert!(found.is_none());
    }

    #[test]
    fn chebyshev_search_finds_violation() {
        let found = search_negtype_violation(
            &MetricSpec::chebyshev(),
            &UniformCube { dim: 3, half_width: 1.0 },
            8,
            10_000,
            1,
            DEFAULT_TOL,
        )
        .unwrap()
        .expect("chebyshev violation");
        let alpha = found.report.witness.as_ref().unwrap();
        assert!(alpha.iter().sum::<f64>().abs() <= 1e-12);
        assert!(quadratic_form(&found.distances, alpha) > 0.0);
        assert!(matches!(embed_sample(&found.distances, DEFAULT_TOL), Err(Error::NotNegativeType(_))));

        let half = power_transform(&MetricSpec::chebyshev(), 0.5).unwrap();
        let d = distance_matrix(&half, &found.sample).unwrap();
        assert_eq!(negtype_check(&d, DEFAULT_TOL).unwrap().verdict, Verdict::NegativeTypeOnSample);
    }
}
