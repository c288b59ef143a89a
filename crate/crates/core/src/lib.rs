//! Distance covariance and distance correlation for samples in arbitrary
//! metric spaces.
//!
//! The crate computes the V-statistic `dcov(θₙ)` for paired samples, runs
//! permutation and asymptotic (chi-square mixture) independence tests, and
//! diagnoses whether a metric is of negative type on a given sample through
//! the spectrum of the doubly centered distance matrix.
//!
//! Distance covariance characterizes independence exactly when both marginal
//! metrics have *strong* negative type. Euclidean spaces qualify; ℓ¹ has
//! negative type but not strong negative type, and `ℓ^p` for `p > 2` in
//! dimension ≥ 3 is not even of negative type. Replacing a negative-type
//! metric `d` by `d^r`, `0 < r < 1`, restores strong negative type, which is
//! what [`metric::power_transform`] is for.
//!
//! ```
//! use metric_dcov::{centering::double_center, dcov::dcov_result, metric::*};
//!
//! let x = SampleSet::from_scalars(&[0.0, 1.0, 2.0, 3.0]).unwrap();
//! let y = SampleSet::from_scalars(&[0.0, 2.0, 4.0, 6.0]).unwrap();
//! let e = MetricSpec::euclidean();
//! let kc = double_center(&distance_matrix(&e, &x).unwrap());
//! let lc = double_center(&distance_matrix(&e, &y).unwrap());
//! let r = dcov_result(&kc, &lc).unwrap();
//! assert!((r.dcor.unwrap() - 1.0).abs() < 1e-12);
//! ```

pub mod centering;
pub mod dcov;
pub mod error;
pub mod inference;
pub mod io;
pub mod metric;
pub mod negtype;
pub mod rng;
pub mod sum;

pub use centering::{double_center, double_center_weighted, CenteredMatrix, SignedDiscreteMeasure};
pub use dcov::{dcov_result, dcov_v, DcovResult};
pub use error::{Error, Result};
pub use inference::{asymptotic_test, permutation_test, TestResult};
pub use metric::{distance_matrix, eval_metric, DistanceMatrix, MetricSpec, Point, SampleSet};
pub use negtype::{embed_sample, negtype_check, Embedding, NegTypeReport, Verdict};
