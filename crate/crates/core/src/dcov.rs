//! Distance covariance V-statistics.
//!
//! `dcov(θₙ) = Σᵢⱼ wᵢ wⱼ d_μ(xᵢ, xⱼ) d_ν(yᵢ, yⱼ)`, which for the empirical
//! measure is `tr(K̄ L̄)/n²`. This is the *squared* quantity: it is not
//! square-rooted because it can be negative when a marginal metric is not of
//! negative type. `dcor = dcov / √(dvar_x · dvar_y)`; its square is the
//! usual normalized distance correlation.
//!
//! Besides the production path [`dcov_v`] there are three independent
//! evaluation routes used as oracles:
//!
//! * [`dcov_definition_oracle`] recomputes `a_μ`, `D(μ)` from raw distances
//!   and sums `d_μ · d_ν` directly;
//! * [`dcov_kernel6_oracle`] is the degree-6 V-statistic of
//!   `f(x₁,x₂,x₃,x₄) f(y₁,y₂,y₅,y₆)` with
//!   `f(z₁,z₂,z₃,z₄) = d(z₁,z₂) − d(z₁,z₃) − d(z₂,z₄) + d(z₃,z₄)`;
//! * [`dcov_tensor_oracle`] evaluates `4 ‖β_{φ⊗ψ}(θ − μ×ν)‖²` from Hilbert
//!   embeddings of both marginals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::centering::{cross_energy, energy, validate_probability, CenteredMatrix, SignedDiscreteMeasure};
use crate::error::{Error, Result};
use crate::metric::{distance_matrix, eval_metric, DistanceMatrix, MetricSpec, Point, SampleSet};
use crate::negtype::Embedding;
use crate::sum::{exact_sum, ExactSum};

/// Largest sample accepted by the O(n⁶) kernel oracle.
pub const KERNEL6_MAX_N: usize = 10;

const PAR_MIN_ROWS: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DcovResult {
    pub n: usize,
    pub dcov: f64,
    pub dvar_x: f64,
    pub dvar_y: f64,
    /// `None` when a marginal is degenerate.
    pub dcor: Option<f64>,
}

fn check_pair(kc: &CenteredMatrix, lc: &CenteredMatrix) -> Result<()> {
    if kc.n() != lc.n() {
        return Err(Error::SizeMismatch { left: kc.n(), right: lc.n() });
    }
    if kc.weights() != lc.weights() {
        return Err(Error::WeightMismatch);
    }
    Ok(())
}

/// Correctly rounded `Σᵢ Σⱼ term(i, j)`; rows may run in parallel, the result
/// depends only on the multiset of terms.
fn reduce_rows<F>(n: usize, term: F) -> f64
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let row = |i: usize| (0..n).map(|j| term(i, j)).collect::<ExactSum>();
    let rows: Vec<ExactSum> = if n >= PAR_MIN_ROWS {
        (0..n).into_par_iter().map(row).collect()
    } else {
        (0..n).map(row).collect()
    };
    let mut total = ExactSum::new();
    for r in &rows {
        total.merge(r);
    }
    total.value()
}

/// `Σᵢⱼ wᵢ wⱼ K̄ᵢⱼ L̄ᵢⱼ`, the entrywise route. Invariant, bit for bit, under
/// relabelling the paired sample.
pub fn dcov_v(kc: &CenteredMatrix, lc: &CenteredMatrix) -> Result<f64> {
    check_pair(kc, lc)?;
    let n = kc.n();
    Ok(match kc.weights() {
        None => {
            let total = reduce_rows(n, |i, j| kc.row(i)[j] * lc.row(i)[j]);
            total / (n as f64 * n as f64)
        }
        Some(w) => reduce_rows(n, |i, j| (w[i] * w[j]) * (kc.row(i)[j] * lc.row(i)[j])),
    })
}

/// `tr(K̄ L̄)/n²` (weighted: `tr(W K̄ W L̄)`), reading `L̄` by columns.
pub fn dcov_trace(kc: &CenteredMatrix, lc: &CenteredMatrix) -> Result<f64> {
    check_pair(kc, lc)?;
    let n = kc.n();
    Ok(match kc.weights() {
        None => {
            let total = reduce_rows(n, |i, j| kc.get(i, j) * lc.get(j, i));
            total / (n as f64 * n as f64)
        }
        Some(w) => reduce_rows(n, |i, j| (w[i] * w[j]) * (kc.get(i, j) * lc.get(j, i))),
    })
}

/// `dcov_v` with the y-sample re-indexed by `perm`: `Σᵢⱼ K̄ᵢⱼ L̄_{πᵢ πⱼ} / n²`.
///
/// Rows are summed in index order and the row totals combined exactly: a
/// replica is deterministic and within a few ulps of [`dcov_v`], which the
/// tie slack of the permutation test absorbs.
pub(crate) fn dcov_permuted(kc: &CenteredMatrix, lc: &CenteredMatrix, perm: &[usize]) -> f64 {
    let n = kc.n();
    let mut total = ExactSum::new();
    for i in 0..n {
        let lrow = lc.row(perm[i]);
        total.add(kc.row(i).iter().zip(perm).map(|(k, &pj)| k * lrow[pj]).sum::<f64>());
    }
    total.value() / (n as f64 * n as f64)
}

/// `dcov(X, X)`; zero iff the sample is degenerate.
pub fn dvar(kc: &CenteredMatrix) -> f64 {
    dcov_v(kc, kc).expect("a matrix is compatible with itself")
}

/// `dcov / √(dvar_x · dvar_y)`, undefined for degenerate marginals.
pub fn dcor(dcov: f64, dvar_x: f64, dvar_y: f64) -> Option<f64> {
    (dvar_x > 0.0 && dvar_y > 0.0).then(|| dcov / (dvar_x * dvar_y).sqrt())
}

pub fn dcov_result(kc: &CenteredMatrix, lc: &CenteredMatrix) -> Result<DcovResult> {
    let dcov = dcov_v(kc, lc)?;
    let (dvar_x, dvar_y) = (dvar(kc), dvar(lc));
    Ok(DcovResult { n: kc.n(), dcov, dvar_x, dvar_y, dcor: dcor(dcov, dvar_x, dvar_y) })
}

/// The double sum of `d_μ · d_ν` straight from the raw distance matrices,
/// with `a` and `D` recomputed in plain arithmetic.
pub fn dcov_definition_oracle(dx: &DistanceMatrix, dy: &DistanceMatrix, weights: Option<&[f64]>) -> Result<f64> {
    let n = dx.n();
    if dy.n() != n {
        return Err(Error::SizeMismatch { left: n, right: dy.n() });
    }
    let uniform = vec![1.0 / n as f64; n];
    let w = match weights {
        Some(w) if w.len() != n => return Err(Error::SizeMismatch { left: w.len(), right: n }),
        Some(w) => w,
        None => &uniform[..],
    };
    let a = |d: &DistanceMatrix, i: usize| -> f64 { (0..n).map(|j| w[j] * d.get(i, j)).sum() };
    let energy = |d: &DistanceMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += w[i] * w[j] * d.get(i, j);
            }
        }
        s
    };
    let (ax, ay): (Vec<f64>, Vec<f64>) = (0..n).map(|i| (a(dx, i), a(dy, i))).unzip();
    let (ex, ey) = (energy(dx), energy(dy));
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            let cx = dx.get(i, j) - ax[i] - ax[j] + ex;
            let cy = dy.get(i, j) - ay[i] - ay[j] + ey;
            s += w[i] * w[j] * cx * cy;
        }
    }
    Ok(s)
}

/// Brute-force degree-6 V-statistic over all `n⁶` index tuples.
pub fn dcov_kernel6_oracle(x: &SampleSet, y: &SampleSet, spec_x: &MetricSpec, spec_y: &MetricSpec) -> Result<f64> {
    let n = x.len();
    if y.len() != n {
        return Err(Error::SizeMismatch { left: n, right: y.len() });
    }
    if n > KERNEL6_MAX_N {
        return Err(Error::TooLarge { n, limit: KERNEL6_MAX_N });
    }
    let table = |s: &SampleSet, spec: &MetricSpec| -> Result<Vec<f64>> {
        let mut t = Vec::with_capacity(n * n);
        for a in s.points() {
            for b in s.points() {
                t.push(eval_metric(spec, a, b)?);
            }
        }
        Ok(t)
    };
    let (tx, ty) = (table(x, spec_x)?, table(y, spec_y)?);
    let f = |t: &[f64], z1: usize, z2: usize, z3: usize, z4: usize| {
        t[z1 * n + z2] - t[z1 * n + z3] - t[z2 * n + z4] + t[z3 * n + z4]
    };
    let mut total = 0.0;
    for i1 in 0..n {
        for i2 in 0..n {
            for i3 in 0..n {
                for i4 in 0..n {
                    let fx = f(&tx, i1, i2, i3, i4);
                    for i5 in 0..n {
                        for i6 in 0..n {
                            total += fx * f(&ty, i1, i2, i5, i6);
                        }
                    }
                }
            }
        }
    }
    Ok(total / (n as f64).powi(6))
}

/// `4 ‖Σᵢ wᵢ φᵢ⊗ψᵢ − φ̄⊗ψ̄‖²` with `φ̄ = Σ wᵢ φᵢ`, formed explicitly in the
/// tensor space `ℝ^{dim_x} ⊗ ℝ^{dim_y}`.
pub fn dcov_tensor_oracle(ex: &Embedding, ey: &Embedding, weights: Option<&[f64]>) -> Result<f64> {
    let n = ex.n();
    if ey.n() != n {
        return Err(Error::SizeMismatch { left: n, right: ey.n() });
    }
    let uniform = vec![1.0 / n as f64; n];
    let w = match weights {
        Some(w) if w.len() != n => return Err(Error::SizeMismatch { left: w.len(), right: n }),
        Some(w) => w,
        None => &uniform[..],
    };
    let (p, q) = (ex.dim(), ey.dim());
    let mean = |e: &Embedding, dim: usize| -> Vec<f64> {
        let mut m = vec![0.0; dim];
        for (i, wi) in w.iter().enumerate() {
            for (mk, x) in m.iter_mut().zip(e.point(i)) {
                *mk += wi * x;
            }
        }
        m
    };
    let (phi_bar, psi_bar) = (mean(ex, p), mean(ey, q));
    let mut tensor = vec![0.0; p * q];
    for (i, wi) in w.iter().enumerate() {
        let (u, v) = (ex.point(i), ey.point(i));
        for a in 0..p {
            let wu = wi * u[a];
            for b in 0..q {
                tensor[a * q + b] += wu * v[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..q {
            tensor[a * q + b] -= phi_bar[a] * psi_bar[b];
        }
    }
    Ok(4.0 * tensor.iter().map(|t| t * t).sum::<f64>())
}

/// The measure `θ = (μ₁ × δ(y₁) + μ₂ × δ(y₂))/2` as a weighted paired sample,
/// with `y₁ = 0`, `y₂ = dy` on the real line. Its distance covariance is
/// `−dy · D(μ₁ − μ₂)/8`, negative whenever `D(μ₁ − μ₂) > 0`.
#[derive(Clone, Debug)]
pub struct NecNegTypeMixture {
    pub x: SampleSet,
    pub y: SampleSet,
    pub weights: Vec<f64>,
    /// `D(μ₁ − μ₂)`.
    pub energy_difference: f64,
    /// `−dy · D(μ₁ − μ₂)/8`.
    pub predicted_dcov: f64,
}

impl NecNegTypeMixture {
    /// Distance covariance of the weighted sample, `y` under the euclidean metric.
    pub fn dcov(&self, spec_x: &MetricSpec) -> Result<f64> {
        let kc = crate::centering::double_center_weighted(&distance_matrix(spec_x, &self.x)?, &self.weights)?;
        let lc = crate::centering::double_center_weighted(
            &distance_matrix(&MetricSpec::euclidean(), &self.y)?,
            &self.weights,
        )?;
        dcov_v(&kc, &lc)
    }
}

pub fn build_necnegtype_mixture(
    mu1: &SignedDiscreteMeasure,
    mu2: &SignedDiscreteMeasure,
    spec_x: &MetricSpec,
    dy: f64,
) -> Result<NecNegTypeMixture> {
    for m in [mu1, mu2] {
        validate_probability(m.weights())?;
    }
    if !(dy.is_finite() && dy > 0.0) {
        return Err(Error::InvalidArgument(format!("dy must be positive, got {dy}")));
    }
    let energy_difference = energy(&mu1.minus(mu2), spec_x)?;
    let mut xs: Vec<Point> = mu1.points().to_vec();
    xs.extend(mu2.points().iter().cloned());
    let ys: Vec<Point> = (0..mu1.points().len())
        .map(|_| Point::scalar(0.0))
        .chain((0..mu2.points().len()).map(|_| Point::scalar(dy)))
        .collect();
    let weights: Vec<f64> = mu1.weights().iter().chain(mu2.weights()).map(|w| w / 2.0).collect();
    Ok(NecNegTypeMixture {
        x: SampleSet::new(xs)?,
        y: SampleSet::new(ys)?,
        weights,
        energy_difference,
        predicted_dcov: -dy * energy_difference / 8.0,
    })
}

/// Finds `γ ∈ (0, 1]` with `D(τ₁ − τ₂) = 0` for `τᵢ = γ μᵢ + (1 − γ) δ(xᵢ)`,
/// given `D(μ₁ − μ₂) ≥ 0` and `x₁ ≠ x₂`. The mixture built from `τ₁, τ₂` then
/// has zero distance covariance without being a product measure.
pub fn zero_energy_mixing(
    mu1: &SignedDiscreteMeasure,
    mu2: &SignedDiscreteMeasure,
    x1: &Point,
    x2: &Point,
    spec: &MetricSpec,
) -> Result<f64> {
    let diff = mu1.minus(mu2);
    let dirac = SignedDiscreteMeasure::new(vec![x1.clone(), x2.clone()], vec![1.0, -1.0])?;
    let a = energy(&diff, spec)?;
    let b = cross_energy(&diff, &dirac, spec)?;
    let c = energy(&dirac, spec)?;
    if c >= 0.0 {
        return Err(Error::InvalidArgument("x1 and x2 must be distinct".into()));
    }
    if a < 0.0 {
        return Err(Error::InvalidArgument(format!("D(mu1 - mu2) = {a} is negative")));
    }
    let value = |g: f64| exact_sum([g * g * a, 2.0 * g * (1.0 - g) * b, (1.0 - g) * (1.0 - g) * c]);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if value(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// `γ μ + (1 − γ) δ(x)`.
pub fn mix_with_point(mu: &SignedDiscreteMeasure, x: &Point, gamma: f64) -> SignedDiscreteMeasure {
    mu.scaled(gamma).plus(&SignedDiscreteMeasure::point_mass(x.clone()).scaled(1.0 - gamma))
}
