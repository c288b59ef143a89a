//! Rejection-rate experiments for the independence tests.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::centering::double_center;
use crate::error::{Error, Result};
use crate::inference::{asymptotic_test, permutation_test, TestResult};
use crate::metric::{distance_matrix, MetricSpec, SampleSet};
use crate::rng::{derive_seed, stream_rng};

/// Synthetic paired data on the real line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Generator {
    /// `X, Y` independent uniform on `[0, 1]`.
    IndependentUniform,
    /// `X, Y` independent standard normal.
    IndependentNormal,
    /// `X ~ N(0, 1)`, `Y = X + noise · N(0, 1)`.
    NoisyLinear { noise: f64 },
}

impl Generator {
    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> (Vec<f64>, Vec<f64>) {
        fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
            StandardNormal.sample(rng)
        }
        match *self {
            Generator::IndependentUniform => {
                let xs: Vec<f64> = (0..n).map(|_| rng.random()).collect();
                let ys = (0..n).map(|_| rng.random()).collect();
                (xs, ys)
            }
            Generator::IndependentNormal => {
                let xs: Vec<f64> = (0..n).map(|_| normal(rng)).collect();
                let ys = (0..n).map(|_| normal(rng)).collect();
                (xs, ys)
            }
            Generator::NoisyLinear { noise } => {
                let xs: Vec<f64> = (0..n).map(|_| normal(rng)).collect();
                let ys = xs.iter().map(|x| x + noise * normal(rng)).collect();
                (xs, ys)
            }
        }
    }

    pub fn is_null(&self) -> bool {
        !matches!(self, Generator::NoisyLinear { .. })
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::IndependentUniform => write!(f, "independent-uniform"),
            Generator::IndependentNormal => write!(f, "independent-normal"),
            Generator::NoisyLinear { noise } => write!(f, "noisy-linear:{noise}"),
        }
    }
}

impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent-uniform" => Ok(Generator::IndependentUniform),
            "independent-normal" => Ok(Generator::IndependentNormal),
            "noisy-linear" => Ok(Generator::NoisyLinear { noise: 0.5 }),
            _ => match s.strip_prefix("noisy-linear:") {
                Some(v) => v
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite() && *x >= 0.0)
                    .map(|noise| Generator::NoisyLinear { noise })
                    .ok_or_else(|| Error::InvalidArgument(format!("bad noise level in `{s}`"))),
                None => Err(Error::InvalidArgument(format!(
                    "unknown generator `{s}` (independent-uniform, independent-normal, noisy-linear[:sigma])"
                ))),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TestMethod {
    Permutation { permutations: usize },
    Asymptotic { mc_draws: usize },
}

impl TestMethod {
    pub fn run(
        &self,
        kc: &crate::centering::CenteredMatrix,
        lc: &crate::centering::CenteredMatrix,
        seed: u64,
    ) -> Result<TestResult> {
        match *self {
            TestMethod::Permutation { permutations } => permutation_test(kc, lc, permutations, seed),
            TestMethod::Asymptotic { mc_draws } => asymptotic_test(kc, lc, mc_draws, seed),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub generator: Generator,
    pub n: usize,
    pub trials: usize,
    pub alpha: f64,
    pub method: TestMethod,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub config: CalibrationConfig,
    pub rejections: usize,
    pub rate: f64,
    /// Binomial standard error of `rate` at the nominal level `alpha`.
    pub nominal_se: f64,
    pub mean_statistic: f64,
}

/// Runs `trials` independent experiments; trial `t` draws its data from
/// stream `t` of `seed` and seeds its test with `derive_seed(seed, t)`.
pub fn rejection_rate(cfg: &CalibrationConfig) -> Result<CalibrationReport> {
    if cfg.trials == 0 || cfg.n < 2 {
        return Err(Error::InvalidArgument("calibration needs trials >= 1 and n >= 2".into()));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {}", cfg.alpha)));
    }
    let e = MetricSpec::euclidean();
    let outcomes: Vec<TestResult> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(cfg.seed, t);
            let (xs, ys) = cfg.generator.generate(&mut rng, cfg.n);
            let kc = double_center(&distance_matrix(&e, &SampleSet::from_scalars(&xs)?)?);
            let lc = double_center(&distance_matrix(&e, &SampleSet::from_scalars(&ys)?)?);
            cfg.method.run(&kc, &lc, derive_seed(cfg.seed, t))
        })
        .collect::<Result<_>>()?;
    let rejections = outcomes.iter().filter(|r| r.p_value <= cfg.alpha).count();
    let trials = cfg.trials as f64;
    Ok(CalibrationReport {
        config: cfg.clone(),
        rejections,
        rate: rejections as f64 / trials,
        nominal_se: (cfg.alpha * (1.0 - cfg.alpha) / trials).sqrt(),
        mean_statistic: outcomes.iter().map(|r| r.statistic).sum::<f64>() / trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_parsing() {
        assert_eq!("independent-uniform".parse::<Generator>().unwrap(), Generator::IndependentUniform);
        assert_eq!(
            "noisy-linear:0.25".parse::<Generator>().unwrap(),
            Generator::NoisyLinear { noise: 0.25 }
        );
        assert!("noisy-linear:-1".parse::<Generator>().is_err());
        assert!("bogus".parse::<Generator>().is_err());
        let g = Generator::NoisyLinear { noise: 0.5 };
        assert_eq!(g.to_string().parse::<Generator>().unwrap(), g);
    }

    #[test]
    fn small_run_is_deterministic() {
        let cfg = CalibrationConfig {
            generator: Generator::IndependentNormal,
            n: 20,
            trials: 20,
            alpha: 0.05,
            method: TestMethod::Permutation { permutations: 49 },
            seed: 3,
        };
        let a = rejection_rate(&cfg).unwrap();
        assert_eq!(a, rejection_rate(&cfg).unwrap());
        assert!(a.rate <= 0.5);
    }

    #[test]
    fn invalid_config() {
        let mut cfg = CalibrationConfig {
            generator: Generator::IndependentNormal,
            n: 20,
            trials: 0,
            alpha: 0.05,
            method: TestMethod::Permutation { permutations: 49 },
            seed: 3,
        };
        assert!(rejection_rate(&cfg).is_err());
        cfg.trials = 2;
        cfg.alpha = 1.5;
        assert!(rejection_rate(&cfg).is_err());
    }
}
