//! Correctly rounded floating-point summation.
//!
//! [`ExactSum`] keeps the running total as a list of non-overlapping partials
//! (Shewchuk's expansion arithmetic), so the rounded result depends only on
//! the multiset of addends: not on their order, nor on how a parallel
//! reduction grouped them.

/// Exact accumulator for finite `f64` addends.
#[derive(Clone, Debug, Default)]
pub struct ExactSum {
    // non-overlapping, increasing magnitude
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, mut x: f64) {
        let mut k = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[k] = lo;
                k += 1;
            }
            x = hi;
        }
        self.partials.truncate(k);
        self.partials.push(x);
    }

    /// Adds every partial of `other`; exact, so merge order is irrelevant.
    pub fn merge(&mut self, other: &ExactSum) {
        for &p in &other.partials {
            self.add(p);
        }
    }

    /// The exact sum rounded to nearest, ties to even.
    pub fn value(&self) -> f64 {
        let p = &self.partials;
        let Some(mut n) = p.len().checked_sub(1) else {
            return 0.0;
        };
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            lo = y - (hi - x);
            if lo != 0.0 {
                break;
            }
        }
        // `hi + lo` sits exactly halfway and the remaining partials push it
        // towards `lo`: round away from `hi`.
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
        hi
    }
}

impl FromIterator<f64> for ExactSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        for v in iter {
            s.add(v);
        }
        s
    }
}

/// Correctly rounded `Σ values`.
pub fn exact_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().collect::<ExactSum>().value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cancellation() {
        assert_eq!(exact_sum([1e100, 1.0, -1e100]), 1.0);
        assert_eq!(exact_sum([0.1; 10]), 1.0);
        assert_eq!(exact_sum([]), 0.0);
        assert_eq!(exact_sum([1.0, 1e-16, 1e-16]), 1.0000000000000002);
    }

    #[test]
    fn halfway_case_rounds_by_tail() {
        // 1 + 2⁻⁵³ is a tie; the tiny positive tail breaks it upwards.
        let ulp_half = 2f64.powi(-53);
        assert_eq!(exact_sum([1.0, ulp_half, 1e-30]), 1.0 + 2.0 * ulp_half);
        assert_eq!(exact_sum([1.0, ulp_half]), 1.0);
    }

    proptest! {
        // Addends are integers scaled by 2⁻³⁰; as integers they sum exactly in
        // i128, which converts to f64 with a single correct rounding.
        #[test]
        fn matches_integer_oracle(ks in prop::collection::vec(-(1i64 << 60)..(1i64 << 60), 0..60)) {
            let scale = 2f64.powi(-30);
            let ints: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
            let exact: i128 = ints.iter().map(|&v| v as i128).sum();
            let want = exact as f64 * scale;
            prop_assert_eq!(exact_sum(ints.iter().map(|&v| v * scale)), want);
        }

        #[test]
        fn order_and_grouping_invariant(v in prop::collection::vec(-1e6f64..1e6, 1..80), split in 0usize..80) {
            let fwd = exact_sum(v.iter().copied());
            prop_assert_eq!(fwd.to_bits(), exact_sum(v.iter().rev().copied()).to_bits());
            let cut = split.min(v.len());
            let mut a: ExactSum = v[..cut].iter().copied().collect();
            a.merge(&v[cut..].iter().copied().collect());
            prop_assert_eq!(fwd.to_bits(), a.value().to_bits());
        }
    }
}
