use divnet_core::data::{
    batch_iter, gen_multimodal_regression, gen_occluded_completion, generate_split, regenerate,
    Generator, Mode, Quadrant,
};
use divnet_core::ensemble::{bagged_subset_size, bagged_subsets};
use divnet_core::eval::{
    degeneracy_report, oracle_curve, oracle_curve_exhaustive, oracle_error_exhaustive,
    oracle_error_multi, oracle_error_single, prediction_variance,
};
use divnet_core::PredictionSet;
use proptest::prelude::*;

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

fn quadrant(i: u8) -> Quadrant {
    [Quadrant::TopLeft, Quadrant::TopRight, Quadrant::BottomLeft, Quadrant::BottomRight][i as usize % 4]
}

/// `(preds, labels)` with `n` items, `m` slots, up to 4 labels of dim 2.
fn oracle_case() -> impl Strategy<Value = (Vec<Vec<Vec<f64>>>, Vec<Vec<Vec<f64>>>)> {
    (1usize..6, 1usize..=6).prop_flat_map(|(n, m)| {
        let preds = prop::collection::vec(prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 2), m), n);
        let labels = prop::collection::vec(
            prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 2), 1..=4),
            n,
        );
        (preds, labels)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn neighbor_sets_match_exhaustive_search(seed in 0u64..500, k in 1usize..6, q in 0u8..4, shapes in 1usize..3) {
        let ds = gen_occluded_completion(24, 6, shapes, quadrant(q), k, seed).unwrap();
        let patterns: Vec<&Vec<f64>> = ds.items.iter().map(|it| &it.labels[0]).collect();
        for (i, it) in ds.items.iter().enumerate() {
            prop_assert_eq!(it.labels.len(), k);
            // x is zero outside the visible quadrant, so plain distance on x is the masked distance
            let d: Vec<f64> = ds.items.iter().map(|o| {
                it.x.iter().zip(&o.x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            }).collect();
            let chosen = &it.labels[1..];
            let dist_of = |l: &Vec<f64>| (0..patterns.len()).find(|&j| j != i && patterns[j] == l).map(|j| d[j]);
            let worst_chosen = chosen.iter().map(|l| dist_of(l).unwrap()).fold(0.0, f64::max);
            for j in 0..patterns.len() {
                if j != i && !chosen.contains(patterns[j]) {
                    prop_assert!(d[j] >= worst_chosen, "item {} skipped nearer pattern {}", i, j);
                }
            }
        }
    }

    #[test]
    fn occluded_values_in_unit_range(seed in 0u64..500, shapes in 1usize..4) {
        let ds = gen_occluded_completion(12, 8, shapes, Quadrant::TopLeft, 3, seed).unwrap();
        for it in &ds.items {
            prop_assert!(it.x.iter().chain(it.labels.iter().flatten()).all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn splits_are_disjoint_and_cover(seed in 0u64..500, n_train in 1usize..40, n_test in 1usize..40) {
        let generator = Generator::Multimodal { modes: Mode::default_family(), noise_sd: 0.1 };
        let (tr, te) = generate_split(&generator, n_train, n_test, seed).unwrap();
        prop_assert_eq!(tr.indices(), 0..n_train);
        prop_assert_eq!(te.indices(), n_train..n_train + n_test);
        let all = gen_multimodal_regression(n_train + n_test, &Mode::default_family(), 0.1, seed).unwrap();
        let joined: Vec<_> = tr.items.iter().chain(&te.items).cloned().collect();
        prop_assert_eq!(&joined, &all.items);
        prop_assert_eq!(regenerate(&te).unwrap(), te);
        for it in &all.items {
            prop_assert!((0.0..=1.0).contains(&it.x[0]));
        }
    }

    #[test]
    fn batches_partition_items(n in 1usize..200, bs in 1usize..50, seed in proptest::option::of(any::<u64>())) {
        let batches = batch_iter(n, bs, seed).unwrap();
        let mut seen: Vec<usize> = batches.iter().flatten().copied().collect();
        prop_assert!(batches.iter().all(|b| !b.is_empty() && b.len() <= bs));
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn full_draw_equals_column_minima((preds, labels) in oracle_case(), seed in any::<u64>()) {
        let ps = PredictionSet::from_nested(&preds).unwrap();
        let m = ps.slots();
        let mut total = 0.0;
        let mut count = 0usize;
        for (p, ys) in preds.iter().zip(&labels) {
            for y in ys {
                total += p.iter().map(|q| sq(q, y)).fold(f64::INFINITY, f64::min);
                count += 1;
            }
        }
        let oracle = total / count as f64;
        let a = oracle_error_multi(&ps, &labels, m, seed, 64).unwrap();
        let b = oracle_error_multi(&ps, &labels, m, seed ^ 1, 64).unwrap();
        prop_assert!((a.mean - oracle).abs() <= 1e-12 * (1.0 + oracle));
        prop_assert_eq!(a, b);
        prop_assert_eq!(a.stderr, 0.0);
    }

    #[test]
    fn exhaustive_curve_is_non_increasing((preds, labels) in oracle_case()) {
        let ps = PredictionSet::from_nested(&preds).unwrap();
        let curve = oracle_curve_exhaustive(&ps, &labels, ps.slots(), "exhaustive").unwrap();
        for w in curve.points.windows(2) {
            prop_assert!(w[1].mean_error <= w[0].mean_error + 1e-12);
        }
        prop_assert!(curve.points.iter().all(|p| p.mean_error >= 0.0));
    }

    #[test]
    fn sampled_curve_is_non_increasing_within_two_se((preds, labels) in oracle_case(), seed in any::<u64>()) {
        let ps = PredictionSet::from_nested(&preds).unwrap();
        let curve = oracle_curve(&ps, &labels, ps.slots(), seed, 64, "mc").unwrap();
        prop_assert!(curve.is_non_increasing_within(2.0));
        prop_assert!(curve.points.iter().all(|p| p.mean_error >= 0.0));
    }

    #[test]
    fn error_is_zero_when_labels_are_produced((preds, _labels) in oracle_case(), seed in any::<u64>()) {
        let labels: Vec<Vec<Vec<f64>>> = preds.iter().map(|p| vec![p[0].clone(), p[p.len() - 1].clone()]).collect();
        let ps = PredictionSet::from_nested(&preds).unwrap();
        prop_assert_eq!(oracle_error_multi(&ps, &labels, ps.slots(), seed, 8).unwrap().mean, 0.0);
    }

    #[test]
    fn variance_ignores_slot_order((preds, _labels) in oracle_case(), keys in prop::collection::vec(any::<u16>(), 6)) {
        let ps = PredictionSet::from_nested(&preds).unwrap();
        prop_assume!(ps.slots() >= 2);
        let mut perm: Vec<usize> = (0..ps.slots()).collect();
        perm.sort_by_key(|&s| (keys[s], s));
        let a = prediction_variance(&ps).unwrap();
        let b = prediction_variance(&ps.permute_slots(&perm)).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
    }

    #[test]
    fn bagged_subsets_have_two_thirds_without_replacement(n in 3usize..300, members in 1usize..6, seed in any::<u64>()) {
        let size = bagged_subset_size(n);
        prop_assert_eq!(size, (2.0 * n as f64 / 3.0).round() as usize);
        for s in bagged_subsets(n, members, seed).unwrap() {
            prop_assert_eq!(s.len(), size);
            prop_assert!(s.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(s.iter().all(|&i| i < n));
        }
    }
}

#[test]
fn default_modes_at_quarter() {
    let ds = gen_multimodal_regression(200, &Mode::default_family(), 0.0, 1).unwrap();
    for it in &ds.items {
        let x = it.x[0];
        let s = (2.0 * std::f64::consts::PI * x).sin();
        let want = [s, -s, 0.5];
        for (l, w) in it.labels.iter().zip(want) {
            assert!((l[0] - w).abs() < 1e-15, "{} vs {}", l[0], w);
        }
        assert_eq!(it.labels.len(), 3);
    }
    let m = Mode::default_family();
    assert_eq!(m[0].eval(0.25), 1.0);
    assert_eq!(m[1].eval(0.25), -1.0);
    assert_eq!(m[2].eval(0.25), 0.5);
}

#[test]
fn closest_of_two_predictions() {
    let ps = PredictionSet::from_nested(&[vec![vec![0.0], vec![10.0]]]).unwrap();
    let e = oracle_error_single(&ps, &[vec![9.0]], 2, 0, 64).unwrap();
    assert_eq!(e.mean, 1.0);
    assert!(oracle_error_single(&ps, &[vec![9.0]], 3, 0, 64).is_err());
    assert_eq!(oracle_error_exhaustive(&ps, &[vec![vec![9.0]]], 1).unwrap(), 41.0);
}

#[test]
fn identical_predictions_give_flat_curve() {
    let ps = PredictionSet::from_nested(&[vec![vec![1.0]; 4], vec![vec![-1.0]; 4]]).unwrap();
    let labels = vec![vec![vec![0.0]], vec![vec![0.5]]];
    let curve = oracle_curve(&ps, &labels, 4, 3, 64, "mc").unwrap();
    assert!(curve.points.iter().all(|p| p.mean_error == curve.points[0].mean_error));
}

#[test]
fn far_slot_is_flagged() {
    let preds: Vec<Vec<Vec<f64>>> = (0..10)
        .map(|i| vec![vec![i as f64 * 0.1], vec![i as f64 * 0.1 + 0.05], vec![50.0]])
        .collect();
    let labels: Vec<Vec<Vec<f64>>> = (0..10).map(|i| vec![vec![i as f64 * 0.1]]).collect();
    let ps = PredictionSet::from_nested(&preds).unwrap();
    let r = degeneracy_report(&ps, &labels, Some(1.0)).unwrap();
    assert_eq!(r.flags, vec![false, false, true]);
    assert_eq!(r.count, 1);
}
