//! A dependent pair `(X, Y)` whose distance differences are uncorrelated.
//!
//! Density `p(x, y) = 1/4 − q(x) q(y)` on `[−1, 1]²`, with
//! `q = −(c/2)·1_{[−1,0]} + (1/2)·1_{(0,c)}` and `c = √2 − 1`. It is
//! piecewise constant on the 3×3 cells cut by the breakpoints `{−1, 0, c, 1}`,
//! so it is sampled exactly: pick a cell by its probability, then a uniform
//! point inside it. Ordinary covariance of `|X − X'|` and `|Y − Y'|` vanishes,
//! yet `X` and `Y` are dependent and distance covariance detects it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::centering::double_center;
use crate::dcov::dcov_result;
use crate::error::{Error, Result};
use crate::inference::permutation_test;
use crate::metric::{distance_matrix, MetricSpec, SampleSet};
use crate::rng::{derive_seed, stream_rng};

pub const C: f64 = std::f64::consts::SQRT_2 - 1.0;

#[derive(Clone, Copy, Debug, Default)]
pub struct CovDistDensity;

impl CovDistDensity {
    pub const BREAKS: [f64; 4] = [-1.0, 0.0, C, 1.0];

    /// `q` on each of the three intervals.
    pub const Q: [f64; 3] = [-C / 2.0, 0.5, 0.0];

    pub fn q(x: f64) -> f64 {
        if (-1.0..=0.0).contains(&x) {
            -C / 2.0
        } else if x > 0.0 && x < C {
            0.5
        } else {
            0.0
        }
    }

    pub fn density(x: f64, y: f64) -> f64 {
        if (-1.0..=1.0).contains(&x) && (-1.0..=1.0).contains(&y) {
            0.25 - Self::q(x) * Self::q(y)
        } else {
            0.0
        }
    }

    pub fn width(cell: usize) -> f64 {
        Self::BREAKS[cell + 1] - Self::BREAKS[cell]
    }

    /// Density value on cell `(i, j)`.
    pub fn cell_density(i: usize, j: usize) -> f64 {
        0.25 - Self::Q[i] * Self::Q[j]
    }

    /// Probability mass of each cell.
    pub fn cell_probabilities() -> [[f64; 3]; 3] {
        let mut p = [[0.0; 3]; 3];
        for (i, row) in p.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = Self::cell_density(i, j) * Self::width(i) * Self::width(j);
            }
        }
        p
    }

    pub fn sample<R: Rng + ?Sized>(rng: &mut R, n: usize) -> (Vec<f64>, Vec<f64>) {
        let probs = Self::cell_probabilities();
        let total: f64 = probs.iter().flatten().sum();
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut cell = (2, 2);
            'pick: for (i, row) in probs.iter().enumerate() {
                for (j, &p) in row.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        cell = (i, j);
                        break 'pick;
                    }
                }
            }
            let (i, j) = cell;
            xs.push(Self::BREAKS[i] + rng.random::<f64>() * Self::width(i));
            ys.push(Self::BREAKS[j] + rng.random::<f64>() * Self::width(j));
        }
        (xs, ys)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovDistReport {
    pub n: usize,
    pub seed: u64,
    /// Covariance of `|Xᵢ − Xⱼ|` and `|Yᵢ − Yⱼ|` over all pairs `i < j`.
    pub distance_cov: f64,
    /// Jackknife (leave-one-observation-out) standard error of `distance_cov`.
    pub distance_cov_se: f64,
    pub dcov: f64,
    pub dcor: Option<f64>,
    pub statistic: f64,
    pub permutation_p: f64,
    pub permutations: usize,
    pub min_cell_density: f64,
}

/// Sample covariance of pairwise distance differences with a jackknife SE.
pub fn pairwise_distance_cov(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let mut row_a = vec![0.0; n];
    let mut row_b = vec![0.0; n];
    let mut row_ab = vec![0.0; n];
    for i in 0..n {
        for j in i + 1..n {
            let a = (xs[i] - xs[j]).abs();
            let b = (ys[i] - ys[j]).abs();
            row_a[i] += a;
            row_a[j] += a;
            row_b[i] += b;
            row_b[j] += b;
            row_ab[i] += a * b;
            row_ab[j] += a * b;
        }
    }
    // every pair is counted in two rows
    let sa: f64 = row_a.iter().sum::<f64>() / 2.0;
    let sb: f64 = row_b.iter().sum::<f64>() / 2.0;
    let sab: f64 = row_ab.iter().sum::<f64>() / 2.0;
    let cov = |a: f64, b: f64, ab: f64, m: f64| ab / m - (a / m) * (b / m);
    let pairs = (n * (n - 1) / 2) as f64;
    let full = cov(sa, sb, sab, pairs);
    if n < 3 {
        return (full, f64::NAN);
    }
    let loo_pairs = ((n - 1) * (n - 2) / 2) as f64;
    let loo: Vec<f64> = (0..n)
        .map(|i| cov(sa - row_a[i], sb - row_b[i], sab - row_ab[i], loo_pairs))
        .collect();
    let mean = loo.iter().sum::<f64>() / n as f64;
    let var = (n - 1) as f64 / n as f64 * loo.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (full, var.sqrt())
}

/// Samples `n` points from the density and reports the distance-difference
/// covariance next to a distance covariance permutation test.
pub fn uncorrelated_distances_demo(n: usize, permutations: usize, seed: u64) -> Result<CovDistReport> {
    if n < 2 {
        return Err(Error::InvalidArgument("the demo needs n >= 2".into()));
    }
    let mut rng = stream_rng(seed, 0);
    let (xs, ys) = CovDistDensity::sample(&mut rng, n);
    let (distance_cov, distance_cov_se) = pairwise_distance_cov(&xs, &ys);
    let e = MetricSpec::euclidean();
    let kc = double_center(&distance_matrix(&e, &SampleSet::from_scalars(&xs)?)?);
    let lc = double_center(&distance_matrix(&e, &SampleSet::from_scalars(&ys)?)?);
    let summary = dcov_result(&kc, &lc)?;
    let test = permutation_test(&kc, &lc, permutations, derive_seed(seed, 1))?;
    let min_cell_density = (0..3)
        .flat_map(|i| (0..3).map(move |j| CovDistDensity::cell_density(i, j)))
        .fold(f64::INFINITY, f64::min);
    Ok(CovDistReport {
        n,
        seed,
        distance_cov,
        distance_cov_se,
        dcov: summary.dcov,
        dcor: summary.dcor,
        statistic: test.statistic,
        permutation_p: test.p_value,
        permutations,
        min_cell_density,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_is_a_probability() {
        let total: f64 = CovDistDensity::cell_probabilities().iter().flatten().sum();
        assert!((total - 1.0).abs() < 1e-15);
        for i in 0..3 {
            for j in 0..3 {
                assert!(CovDistDensity::cell_density(i, j) >= 0.0);
            }
        }
        assert_eq!(CovDistDensity::density(2.0, 0.0), 0.0);
        assert_eq!(CovDistDensity::density(-0.5, -0.5), 0.25 - C * C / 4.0);
    }

    #[test]
    fn marginals_are_uniform() {
        // q integrates to zero, so both marginals are uniform with density 1/2.
        let p = CovDistDensity::cell_probabilities();
        for (i, row) in p.iter().enumerate() {
            let m: f64 = row.iter().sum();
            assert!((m - 0.5 * CovDistDensity::width(i)).abs() < 1e-15);
        }
    }

    #[test]
    fn samples_stay_in_square() {
        let mut rng = stream_rng(1, 0);
        let (xs, ys) = CovDistDensity::sample(&mut rng, 1000);
        assert!(xs.iter().chain(&ys).all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn jackknife_matches_brute_force() {
        let xs = [0.1, -0.5, 0.9, 0.3, -0.2, 0.7];
        let ys = [0.4, 0.0, -0.8, 0.2, 0.6, -0.1];
        let naive = |xs: &[f64], ys: &[f64]| {
            let (mut a, mut b, mut ab, mut m) = (0.0, 0.0, 0.0, 0.0);
            for i in 0..xs.len() {
                for j in i + 1..xs.len() {
                    let (u, v) = ((xs[i] - xs[j]).abs(), (ys[i] - ys[j]).abs());
                    a += u;
                    b += v;
                    ab += u * v;
                    m += 1.0;
                }
            }
            ab / m - (a / m) * (b / m)
        };
        let (full, se) = pairwise_distance_cov(&xs, &ys);
        assert!((full - naive(&xs, &ys)).abs() < 1e-15);
        let n = xs.len();
        let loo: Vec<f64> = (0..n)
            .map(|k| {
                let keep: Vec<usize> = (0..n).filter(|&i| i != k).collect();
                let x: Vec<f64> = keep.iter().map(|&i| xs[i]).collect();
                let y: Vec<f64> = keep.iter().map(|&i| ys[i]).collect();
                naive(&x, &y)
            })
            .collect();
        let mean = loo.iter().sum::<f64>() / n as f64;
        let var = (n - 1) as f64 / n as f64 * loo.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
        assert!((se - var.sqrt()).abs() < 1e-14);
    }
}
