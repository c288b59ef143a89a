//! Closed forms for categorical data.
//!
//! Under the discrete metric each category set embeds as a unit-edge simplex,
//! and the distance covariance reduces to
//! `dcov(θₙ) = Σ_{x,y} [θₙ(x,y) − μₙ(x) νₙ(y)]²`, with `D(μₙ) = Σₓ μₙ(x)(1 − μₙ(x))`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::SampleSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContingencyTable {
    x_labels: Vec<String>,
    y_labels: Vec<String>,
    counts: Vec<Vec<u64>>,
    n: u64,
}

impl ContingencyTable {
    pub fn new(x_labels: Vec<String>, y_labels: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        if counts.len() != x_labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} rows of counts for {} x categories",
                counts.len(),
                x_labels.len()
            )));
        }
        if let Some(r) = counts.iter().find(|r| r.len() != y_labels.len()) {
            return Err(Error::InvalidArgument(format!(
                "row with {} counts for {} y categories",
                r.len(),
                y_labels.len()
            )));
        }
        let n = counts.iter().flatten().sum();
        Ok(Self { x_labels, y_labels, counts, n })
    }

    /// Table with labels `x0, x1, …` and `y0, y1, …`.
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let rows = counts.len();
        let cols = counts.first().map_or(0, Vec::len);
        Self::new(
            (0..rows).map(|i| format!("x{i}")).collect(),
            (0..cols).map(|j| format!("y{j}")).collect(),
            counts,
        )
    }

    /// Cross-tabulates aligned label sequences; categories are sorted.
    pub fn from_labels<S: AsRef<str>>(xs: &[S], ys: &[S]) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::SizeMismatch { left: xs.len(), right: ys.len() });
        }
        let index = |v: &[S]| -> BTreeMap<String, usize> {
            let mut m: BTreeMap<String, usize> = v.iter().map(|s| (s.as_ref().to_owned(), 0)).collect();
            for (k, slot) in m.values_mut().enumerate() {
                *slot = k;
            }
            m
        };
        let (ix, iy) = (index(xs), index(ys));
        let mut counts = vec![vec![0u64; iy.len()]; ix.len()];
        for (a, b) in xs.iter().zip(ys) {
            counts[ix[a.as_ref()]][iy[b.as_ref()]] += 1;
        }
        Self::new(ix.into_keys().collect(), iy.into_keys().collect(), counts)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn x_labels(&self) -> &[String] {
        &self.x_labels
    }

    pub fn y_labels(&self) -> &[String] {
        &self.y_labels
    }

    /// `θₙ(x, y)`.
    pub fn joint(&self) -> Vec<Vec<f64>> {
        let n = self.n as f64;
        self.counts.iter().map(|r| r.iter().map(|&c| c as f64 / n).collect()).collect()
    }

    /// `(μₙ, νₙ)`.
    pub fn marginals(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n as f64;
        let mu = self.counts.iter().map(|r| r.iter().sum::<u64>() as f64 / n).collect();
        let nu = (0..self.y_labels.len())
            .map(|j| self.counts.iter().map(|r| r[j]).sum::<u64>() as f64 / n)
            .collect();
        (mu, nu)
    }

    /// Expands the table into aligned label samples, cell by cell.
    pub fn to_samples(&self) -> Result<(SampleSet, SampleSet)> {
        let mut xs = Vec::with_capacity(self.n as usize);
        let mut ys = Vec::with_capacity(self.n as usize);
        for (i, row) in self.counts.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                for _ in 0..c {
                    xs.push(self.x_labels[i].as_str());
                    ys.push(self.y_labels[j].as_str());
                }
            }
        }
        Ok((SampleSet::from_labels(&xs)?, SampleSet::from_labels(&ys)?))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoricalDcov {
    pub dcov: f64,
    /// `n·dcov / (D(μₙ) D(νₙ))`; `None` if a marginal is concentrated on one category.
    pub statistic: Option<f64>,
    pub energy_x: f64,
    pub energy_y: f64,
}

pub fn categorical_dcov(t: &ContingencyTable) -> Result<CategoricalDcov> {
    if t.n == 0 {
        return Err(Error::EmptyTable);
    }
    let theta = t.joint();
    let (mu, nu) = t.marginals();
    let mut dcov = 0.0;
    for (i, row) in theta.iter().enumerate() {
        for (j, &p) in row.iter().enumerate() {
            let r = p - mu[i] * nu[j];
            dcov += r * r;
        }
    }
    let energy_x: f64 = mu.iter().map(|m| m * (1.0 - m)).sum();
    let energy_y: f64 = nu.iter().map(|m| m * (1.0 - m)).sum();
    let denom = energy_x * energy_y;
    Ok(CategoricalDcov {
        dcov,
        statistic: (denom > 0.0).then(|| t.n as f64 * dcov / denom),
        energy_x,
        energy_y,
    })
}

/// Pearson's `n Σ (θₙ − μₙνₙ)² / (μₙνₙ)`.
pub fn pearson_chisq(t: &ContingencyTable) -> Result<f64> {
    if t.n == 0 {
        return Err(Error::EmptyTable);
    }
    let theta = t.joint();
    let (mu, nu) = t.marginals();
    if let Some(i) = mu.iter().position(|&m| m == 0.0) {
        return Err(Error::ZeroMarginal(t.x_labels[i].clone()));
    }
    if let Some(j) = nu.iter().position(|&m| m == 0.0) {
        return Err(Error::ZeroMarginal(t.y_labels[j].clone()));
    }
    let mut s = 0.0;
    for (i, row) in theta.iter().enumerate() {
        for (j, &p) in row.iter().enumerate() {
            let e = mu[i] * nu[j];
            s += (p - e) * (p - e) / e;
        }
    }
    Ok(t.n as f64 * s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::centering::double_center;
    use crate::dcov::dcov_v;
    use crate::metric::{distance_matrix, MetricSpec};

    fn metric_dcov(t: &ContingencyTable) -> f64 {
        let (x, y) = t.to_samples().unwrap();
        let d = MetricSpec::discrete();
        dcov_v(
            &double_center(&distance_matrix(&d, &x).unwrap()),
            &double_center(&distance_matrix(&d, &y).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn perfectly_dependent_two_by_two() {
        let t = ContingencyTable::from_counts(vec![vec![5, 0], vec![0, 5]]).unwrap();
        let c = categorical_dcov(&t).unwrap();
        // four cells of (±1/4)²
        assert_eq!(c.dcov, 0.25);
        assert!((metric_dcov(&t) - 0.25).abs() < 1e-12);
        assert_eq!(c.energy_x, 0.5);
        assert_eq!(c.statistic, Some(10.0 * 0.25 / 0.25));
    }

    #[test]
    fn product_tables() {
        let t = ContingencyTable::from_counts(vec![vec![1, 2, 3], vec![2, 4, 6]]).unwrap();
        assert!(categorical_dcov(&t).unwrap().dcov.abs() < 1e-15);
        assert!(pearson_chisq(&t).unwrap().abs() < 1e-12);
        let flat = ContingencyTable::from_counts(vec![vec![25, 25], vec![25, 25]]).unwrap();
        assert_eq!(pearson_chisq(&flat).unwrap(), 0.0);
    }

    #[test]
    fn pearson_hand_value() {
        let t = ContingencyTable::from_counts(vec![vec![30, 20], vec![20, 30]]).unwrap();
        assert!((pearson_chisq(&t).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn error_paths() {
        let empty = ContingencyTable::from_counts(vec![vec![0, 0]]).unwrap();
        assert!(matches!(categorical_dcov(&empty), Err(Error::EmptyTable)));
        let zero_col = ContingencyTable::from_counts(vec![vec![3, 0], vec![1, 0]]).unwrap();
        assert!(matches!(pearson_chisq(&zero_col), Err(Error::ZeroMarginal(l)) if l == "y1"));
        assert!(ContingencyTable::from_counts(vec![vec![1, 2], vec![3]]).is_err());
    }

    #[test]
    fn from_labels_roundtrip() {
        let xs = ["b", "a", "a", "b", "c"];
        let ys = ["u", "u", "v", "v", "v"];
        let t = ContingencyTable::from_labels(&xs, &ys).unwrap();
        assert_eq!(t.x_labels(), &["a", "b", "c"]);
        assert_eq!(t.counts(), &[vec![1, 1], vec![1, 1], vec![0, 1]]);
        assert!((categorical_dcov(&t).unwrap().dcov - metric_dcov(&t)).abs() < 1e-12);
    }
}
