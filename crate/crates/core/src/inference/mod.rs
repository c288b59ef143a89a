//! Independence tests built on the normalized statistic
//! `T = n·dcov(θₙ) / (D(μₙ) D(νₙ))`.
//!
//! Under independence `T` converges in law to `Σ λᵢ Zᵢ² / (D(μ) D(ν))`, a
//! chi-square mixture with expectation 1, where the `λᵢ` are products of the
//! eigenvalues of the two marginal centering operators. The permutation test
//! is exact under exchangeability and is the default; the asymptotic test
//! estimates the `λᵢ` from the empirical spectra of `K̄/n` and `L̄/n`.
//!
//! Both tests reject for large `T` (right tail). That is the natural region
//! when both marginals have negative type, since then `dcov ≥ 0`.

pub mod calibrate;
pub mod categorical;
pub mod covdist;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::centering::CenteredMatrix;
use crate::dcov::{dcov_permuted, dcov_v};
use crate::error::{Error, Result};
use crate::negtype::symmetric_eigen;
use crate::rng::stream_rng;

pub use calibrate::{rejection_rate, CalibrationConfig, CalibrationReport, Generator, TestMethod};
pub use categorical::{categorical_dcov, pearson_chisq, CategoricalDcov, ContingencyTable};
pub use covdist::{uncorrelated_distances_demo, CovDistDensity, CovDistReport};

/// Eigenvalues with `|λ| < NOISE_FLOOR · max |λ|` are dropped before simulation.
pub const NOISE_FLOOR: f64 = 1e-12;

/// Relative slack when counting replicas "at least as extreme" as the observed
/// statistic, so that exact ties are not lost to rounding.
const TIE_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Method {
    Permutation { permutations: usize },
    Asymptotic { mc_draws: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub n: usize,
    /// `n·dcov / (D(μₙ) D(νₙ))`; its null limit has expectation 1.
    pub statistic: f64,
    pub raw_dcov: f64,
    /// Right-tail p-value with the +1 correction, in `(0, 1]`.
    pub p_value: f64,
    /// `min(1, 2·min(right, left))`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_value_two_sided: Option<f64>,
    pub method: Method,
    /// Normalized null eigenvalues used by the asymptotic test, descending.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvalues: Option<Vec<f64>>,
    /// Mean of the simulated normalized null (asymptotic test).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub null_mean: Option<f64>,
    pub seed: u64,
}

fn check_inputs(kc: &CenteredMatrix, lc: &CenteredMatrix) -> Result<()> {
    if kc.n() != lc.n() {
        return Err(Error::SizeMismatch { left: kc.n(), right: lc.n() });
    }
    if !kc.is_uniform() || !lc.is_uniform() {
        return Err(Error::WeightedUnsupported);
    }
    Ok(())
}

fn check_nondegenerate(kc: &CenteredMatrix, lc: &CenteredMatrix) -> Result<()> {
    if kc.grand_mean() <= 0.0 {
        return Err(Error::DegenerateMarginal("x"));
    }
    if lc.grand_mean() <= 0.0 {
        return Err(Error::DegenerateMarginal("y"));
    }
    Ok(())
}

fn normalized(kc: &CenteredMatrix, lc: &CenteredMatrix, dcov: f64) -> f64 {
    kc.n() as f64 * dcov / (kc.grand_mean() * lc.grand_mean())
}

/// `(1 + #{replicas ≥ observed}) / (B + 1)`.
pub fn corrected_p_value(exceed: usize, total: usize) -> f64 {
    (1 + exceed) as f64 / (total + 1) as f64
}

/// Permutation test: replica `r` shuffles the y-indices with stream `r` of
/// `seed` and recomputes `dcov_v` on the re-indexed `L̄` (centering commutes
/// with permutations, so no re-centering is needed).
pub fn permutation_test(kc: &CenteredMatrix, lc: &CenteredMatrix, permutations: usize, seed: u64) -> Result<TestResult> {
    check_inputs(kc, lc)?;
    if permutations == 0 {
        return Err(Error::InvalidArgument("at least one permutation is required".into()));
    }
    check_nondegenerate(kc, lc)?;
    let n = kc.n();
    let observed = dcov_v(kc, lc)?;
    let replicas: Vec<f64> = (0..permutations as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r);
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            dcov_permuted(kc, lc, &perm)
        })
        .collect();
    let slack = TIE_SLACK * observed.abs();
    let upper = replicas.iter().filter(|&&v| v >= observed - slack).count();
    let lower = replicas.iter().filter(|&&v| v <= observed + slack).count();
    let p_value = corrected_p_value(upper, permutations);
    let p_left = corrected_p_value(lower, permutations);
    Ok(TestResult {
        n,
        statistic: normalized(kc, lc, observed),
        raw_dcov: observed,
        p_value,
        p_value_two_sided: Some((2.0 * p_value.min(p_left)).min(1.0)),
        method: Method::Permutation { permutations },
        eigenvalues: None,
        null_mean: None,
        seed,
    })
}

/// All products `(αₖ/n)(βₗ/n)` of the eigenvalues of `K̄/n` and `L̄/n`: the
/// empirical estimates of the null eigenvalues. They sum to `D(μₙ) D(νₙ)`.
pub fn null_eigenvalues(kc: &CenteredMatrix, lc: &CenteredMatrix) -> Result<Vec<f64>> {
    check_inputs(kc, lc)?;
    let nf = kc.n() as f64;
    let ex = symmetric_eigen(kc.to_dmatrix())?.eigenvalues;
    let ey = symmetric_eigen(lc.to_dmatrix())?.eigenvalues;
    let mut out = Vec::with_capacity(ex.len() * ey.len());
    for a in ex.iter() {
        for b in ey.iter() {
            out.push((a / nf) * (b / nf));
        }
    }
    Ok(out)
}

/// `draws` Monte-Carlo draws of `Σ λᵢ Zᵢ²`; draw `k` uses stream `k` of `seed`.
pub fn chisq_mixture_sample(lambdas: &[f64], draws: usize, seed: u64) -> Result<Vec<f64>> {
    if draws == 0 {
        return Err(Error::InvalidArgument("at least one draw is required".into()));
    }
    Ok((0..draws as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k);
            lambdas
                .iter()
                .map(|l| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    l * z * z
                })
                .sum()
        })
        .collect())
}

/// Asymptotic chi-square-mixture test.
pub fn asymptotic_test(kc: &CenteredMatrix, lc: &CenteredMatrix, mc_draws: usize, seed: u64) -> Result<TestResult> {
    check_inputs(kc, lc)?;
    check_nondegenerate(kc, lc)?;
    if mc_draws == 0 {
        return Err(Error::InvalidArgument("at least one draw is required".into()));
    }
    let observed = dcov_v(kc, lc)?;
    let statistic = normalized(kc, lc, observed);
    let scale = kc.grand_mean() * lc.grand_mean();
    let mut lambdas: Vec<f64> = null_eigenvalues(kc, lc)?.into_iter().map(|l| l / scale).collect();
    let top = lambdas.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    lambdas.retain(|l| l.abs() >= NOISE_FLOOR * top);
    lambdas.sort_by(|a, b| b.total_cmp(a));
    let sims = chisq_mixture_sample(&lambdas, mc_draws, seed)?;
    let exceed = sims.iter().filter(|&&s| s >= statistic).count();
    let below = sims.iter().filter(|&&s| s <= statistic).count();
    let null_mean = sims.iter().sum::<f64>() / sims.len() as f64;
    let p_value = corrected_p_value(exceed, mc_draws);
    Ok(TestResult {
        n: kc.n(),
        statistic,
        raw_dcov: observed,
        p_value,
        p_value_two_sided: Some((2.0 * p_value.min(corrected_p_value(below, mc_draws))).min(1.0)),
        method: Method::Asymptotic { mc_draws },
        eigenvalues: Some(lambdas),
        null_mean: Some(null_mean),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::centering::double_center;
    use crate::metric::{distance_matrix, MetricSpec, SampleSet};

    fn centered(xs: &[f64]) -> CenteredMatrix {
        double_center(&distance_matrix(&MetricSpec::euclidean(), &SampleSet::from_scalars(xs).unwrap()).unwrap())
    }

    #[test]
    fn zero_permutations_rejected() {
        let k = centered(&[0.0, 1.0, 2.0]);
        assert!(matches!(permutation_test(&k, &k, 0, 1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn degenerate_marginal_rejected() {
        let k = centered(&[0.0, 1.0, 2.0]);
        let z = centered(&[1.0, 1.0, 1.0]);
        assert!(matches!(permutation_test(&k, &z, 9, 1), Err(Error::DegenerateMarginal("y"))));
        assert!(matches!(asymptotic_test(&z, &k, 9, 1), Err(Error::DegenerateMarginal("x"))));
    }

    #[test]
    fn perfect_dependence_permutation() {
        let xs: Vec<f64> = (0..50).map(f64::from).collect();
        let k = centered(&xs);
        let r = permutation_test(&k, &k, 999, 5).unwrap();
        assert!(r.p_value <= 0.001, "{}", r.p_value);
        assert_eq!(r.p_value, 0.001);
        assert!(r.p_value > 0.0);
    }

    #[test]
    fn permutation_is_deterministic() {
        let xs: Vec<f64> = (0..30).map(|i| ((i * 7919) % 31) as f64).collect();
        let ys: Vec<f64> = (0..30).map(|i| ((i * 104729) % 37) as f64).collect();
        let (k, l) = (centered(&xs), centered(&ys));
        let a = permutation_test(&k, &l, 99, 42).unwrap();
        let b = permutation_test(&k, &l, 99, 42).unwrap();
        assert_eq!(a, b);
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        assert_eq!(a, single.install(|| permutation_test(&k, &l, 99, 42).unwrap()));
    }

    #[test]
    fn null_eigenvalues_examples() {
        let z = centered(&[2.0; 4]);
        let k = centered(&[0.0, 1.0, 5.0, 2.0]);
        assert!(null_eigenvalues(&z, &k).unwrap().iter().all(|&l| l == 0.0));

        // Two points at distance 1: K̄ has spectrum {−1, 0}, so the only
        // nonzero product is (−1/2)(−1/2).
        let two = centered(&[0.0, 1.0]);
        let mut l = null_eigenvalues(&two, &two).unwrap();
        l.sort_by(|a, b| b.total_cmp(a));
        assert!((l[0] - 0.25).abs() < 1e-15);
        assert!(l[1..].iter().all(|v| v.abs() < 1e-15));
        assert!((l.iter().sum::<f64>() - two.grand_mean().powi(2)).abs() < 1e-15);
    }

    #[test]
    fn mixture_moments() {
        let draws = 20_000;
        let one = chisq_mixture_sample(&[1.0], draws, 3).unwrap();
        let mean = one.iter().sum::<f64>() / draws as f64;
        assert!((mean - 1.0).abs() < 3.0 * (2.0 / draws as f64).sqrt());

        assert!(chisq_mixture_sample(&[], 10, 3).unwrap().iter().all(|&v| v == 0.0));

        // 0.5(Z₁² + Z₂²): mean 1, variance 2·(0.25·2) = 1
        let half = chisq_mixture_sample(&[0.5, 0.5], draws, 4).unwrap();
        let m = half.iter().sum::<f64>() / draws as f64;
        let v = half.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (draws - 1) as f64;
        assert!((m - 1.0).abs() < 3.0 * (1.0 / draws as f64).sqrt());
        // sd of the sample variance for an Exp(1) variable is ≈ √(8/N)
        assert!((v - 1.0).abs() < 3.0 * (8.0 / draws as f64).sqrt());

        assert!(chisq_mixture_sample(&[1.0], 0, 1).is_err());
    }

    #[test]
    fn asymptotic_dependent_rejects() {
        let xs: Vec<f64> = (0..50).map(|i| (i as f64 * 0.731).sin() * 3.0).collect();
        let k = centered(&xs);
        let r = asymptotic_test(&k, &k, 2000, 9).unwrap();
        assert!(r.p_value <= 0.01, "{}", r.p_value);
        assert!((r.null_mean.unwrap() - 1.0).abs() < 0.1);
    }

    #[test]
    fn weighted_input_rejected() {
        let d = distance_matrix(&MetricSpec::euclidean(), &SampleSet::from_scalars(&[0.0, 1.0]).unwrap()).unwrap();
        let w = crate::centering::double_center_weighted(&d, &[0.5, 0.5]).unwrap();
        assert!(matches!(permutation_test(&w, &w, 9, 1), Err(Error::WeightedUnsupported)));
    }
}
