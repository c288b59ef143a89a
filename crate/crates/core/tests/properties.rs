use proptest::prelude::*;
use rand::seq::SliceRandom;

use metric_dcov::centering::double_center;
use metric_dcov::dcov::{dcov_result, dcov_v};
use metric_dcov::inference::calibrate::Generator;
use metric_dcov::inference::{
    asymptotic_test, categorical_dcov, null_eigenvalues, permutation_test, ContingencyTable,
};
use metric_dcov::metric::{distance_matrix, power_transform, DistanceMatrix, MetricSpec, SampleSet};
use metric_dcov::rng::stream_rng;

fn line(xs: &[f64]) -> DistanceMatrix {
    distance_matrix(&MetricSpec::euclidean(), &SampleSet::from_scalars(xs).unwrap()).unwrap()
}

fn metric(k: usize) -> MetricSpec {
    match k % 5 {
        0 => MetricSpec::euclidean(),
        1 => MetricSpec::minkowski(1.5).unwrap(),
        2 => MetricSpec::chebyshev(),
        3 => MetricSpec::discrete(),
        _ => power_transform(&MetricSpec::chebyshev(), 0.5).unwrap(),
    }
}

fn pairs() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    (3usize..40).prop_flat_map(|n| {
        let row = || prop::collection::vec((-4i32..4).prop_map(|v| v as f64 * 0.25), 2);
        (prop::collection::vec(row(), n), prop::collection::vec(row(), n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn relabelling_leaves_dcov_bitwise_unchanged((xs, ys) in pairs(), seed in any::<u64>(), mx in 0usize..5, my in 0usize..5) {
        let (sx, sy) = (metric(mx), metric(my));
        let x = SampleSet::from_vectors(xs).unwrap();
        let y = SampleSet::from_vectors(ys).unwrap();
        let mut perm: Vec<usize> = (0..x.len()).collect();
        perm.shuffle(&mut stream_rng(seed, 0));
        let dc = |s: &MetricSpec, v: &SampleSet| double_center(&distance_matrix(s, v).unwrap());
        let before = dcov_v(&dc(&sx, &x), &dc(&sy, &y)).unwrap();
        let after = dcov_v(&dc(&sx, &x.permuted(&perm).unwrap()), &dc(&sy, &y.permuted(&perm).unwrap())).unwrap();
        prop_assert_eq!(before.to_bits(), after.to_bits());
    }

    #[test]
    fn null_eigenvalues_sum_to_energy_product((xs, ys) in pairs(), mx in 0usize..5, my in 0usize..5) {
        let kc = double_center(&distance_matrix(&metric(mx), &SampleSet::from_vectors(xs).unwrap()).unwrap());
        let lc = double_center(&distance_matrix(&metric(my), &SampleSet::from_vectors(ys).unwrap()).unwrap());
        let sum: f64 = null_eigenvalues(&kc, &lc).unwrap().iter().sum();
        prop_assert!((sum - kc.grand_mean() * lc.grand_mean()).abs() <= 1e-9);
    }

    #[test]
    fn categorical_closed_form_matches_metric_route(counts in prop::collection::vec(prop::collection::vec(0u64..12, 3), 1..5)) {
        let mut counts = counts;
        counts[0][0] += 1;
        let t = ContingencyTable::from_counts(counts).unwrap();
        let (x, y) = t.to_samples().unwrap();
        let d = MetricSpec::discrete();
        let via_metric = dcov_v(
            &double_center(&distance_matrix(&d, &x).unwrap()),
            &double_center(&distance_matrix(&d, &y).unwrap()),
        ).unwrap();
        prop_assert!((categorical_dcov(&t).unwrap().dcov - via_metric).abs() <= 1e-12);
    }

    #[test]
    fn cauchy_schwarz((xs, ys) in pairs(), mx in 0usize..5, my in 0usize..5) {
        let kc = double_center(&distance_matrix(&metric(mx), &SampleSet::from_vectors(xs).unwrap()).unwrap());
        let lc = double_center(&distance_matrix(&metric(my), &SampleSet::from_vectors(ys).unwrap()).unwrap());
        let r = dcov_result(&kc, &lc).unwrap();
        prop_assert!(r.dcov * r.dcov <= r.dvar_x * r.dvar_y + 1e-12);
        prop_assert!(r.dvar_x <= kc.grand_mean().powi(2) + 1e-12);
    }
}

fn sample_pair(generator: Generator, n: usize, seed: u64, stream: u64) -> (DistanceMatrix, DistanceMatrix) {
    let (xs, ys) = generator.generate(&mut stream_rng(seed, stream), n);
    (line(&xs), line(&ys))
}

#[test]
fn p_values_ignore_metric_scale() {
    for (stream, generator) in [Generator::IndependentNormal, Generator::NoisyLinear { noise: 2.0 }].into_iter().enumerate() {
        let (dx, dy) = sample_pair(generator, 60, 31, stream as u64);
        let base = (double_center(&dx), double_center(&dy));
        for (cx, cy) in [(2.0, 1.0), (0.37, 5.5), (1e3, 1e-3)] {
            let scaled = (double_center(&dx.scaled(cx).unwrap()), double_center(&dy.scaled(cy).unwrap()));
            let p0 = permutation_test(&base.0, &base.1, 199, 5).unwrap();
            let p1 = permutation_test(&scaled.0, &scaled.1, 199, 5).unwrap();
            assert_eq!(p0.p_value, p1.p_value, "permutation, scale ({cx}, {cy})");
            assert!((p0.statistic - p1.statistic).abs() <= 1e-12 * p0.statistic.abs());
            let a0 = asymptotic_test(&base.0, &base.1, 499, 5).unwrap();
            let a1 = asymptotic_test(&scaled.0, &scaled.1, 499, 5).unwrap();
            assert_eq!(a0.p_value, a1.p_value, "asymptotic, scale ({cx}, {cy})");
        }
    }
}

#[test]
fn statistic_grows_with_n_under_dependence() {
    let generator = Generator::NoisyLinear { noise: 1.0 };
    let mean_t = |n: usize| {
        let reps = 20;
        (0..reps)
            .map(|r| {
                let (dx, dy) = sample_pair(generator, n, 77 + n as u64, r);
                let (kc, lc) = (double_center(&dx), double_center(&dy));
                n as f64 * dcov_v(&kc, &lc).unwrap() / (kc.grand_mean() * lc.grand_mean())
            })
            .sum::<f64>()
            / reps as f64
    };
    let t: Vec<f64> = [50, 100, 200, 400].iter().map(|&n| mean_t(n)).collect();
    for w in t.windows(2) {
        assert!(w[1] > w[0], "{t:?}");
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let (dx, dy) = sample_pair(Generator::NoisyLinear { noise: 1.0 }, 300, 3, 0);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let (kc, lc) = (double_center(&dx), double_center(&dy));
            (
                dcov_v(&kc, &lc).unwrap().to_bits(),
                permutation_test(&kc, &lc, 49, 11).unwrap(),
                asymptotic_test(&kc, &lc, 49, 11).unwrap(),
            )
        })
    };
    let one = run(1);
    for k in [2, 3, 8] {
        assert_eq!(run(k), one, "{k} threads");
    }
}
