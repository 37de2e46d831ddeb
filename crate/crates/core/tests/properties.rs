//! Property tests across modules.

mod common;

use proptest::prelude::*;
use rpseries_core::combinatorics::{flat_flip_position, sharp_flip_position, ShiftMatching};
use rpseries_core::series_eval::eval_many;
use rpseries_core::*;

fn small_model() -> impl Strategy<Value = CoefficientModel> {
    prop::sample::select(vec![
        vec![-1i64, 1],
        vec![0, 1],
        vec![-1, 0, 1],
        vec![2, -3, 5],
        vec![-2, -1, 1, 4],
    ])
    .prop_map(|v| CoefficientModel::from_integers(&v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exhaustive_matching_is_clean(model in small_model(), n in 1usize..7) {
        let r = verify_matching(&model, n, 50_000_000).unwrap();
        prop_assert!(r.is_clean(), "{:?}", r);
        prop_assert_eq!(r.domain_size + r.unmatched, r.total_words);
    }

    #[test]
    fn binary_domain_fraction_closed_form(n in 1usize..18) {
        let model = CoefficientModel::from_integers(&[-1, 1]).unwrap();
        let f = domain_fraction(&model, n, 50_000_000).unwrap();
        let total = 1u64 << n;
        let want = num_rational::BigRational::new(
            ((total - common::binomial(n as u64, n as u64 / 2)) as i64).into(),
            (total as i64).into(),
        );
        prop_assert_eq!(f, want);
    }

    #[test]
    fn flips_invert_each_other(word in prop::collection::vec(0u32..4, 0..40)) {
        if let Some(p) = sharp_flip_position(&word) {
            prop_assert_eq!(word[p], 0);
            let mut image = word.clone();
            image[p] = 1;
            prop_assert_eq!(flat_flip_position(&image), Some(p));
        }
        if let Some(p) = flat_flip_position(&word) {
            prop_assert_eq!(word[p], 1);
            let mut image = word.clone();
            image[p] = 0;
            prop_assert_eq!(sharp_flip_position(&image), Some(p));
        }
    }

    #[test]
    fn sharp_shifts_sum_exactly(model in small_model(), seed in any::<u64>(), n in 1usize..30) {
        let w = sample_prefix(&SequenceStream::new(model.clone(), seed, 0), n);
        let matching = ShiftMatching::new(model.clone(), n);
        if let ShiftImage::Matched { word, .. } = matching.sharp(&w).unwrap() {
            prop_assert_eq!(word.sum() - w.sum(), model.value(1) - model.value(0));
        }
    }

    #[test]
    fn eval_many_matches_single(seed in any::<u64>(), xs in prop::collection::vec(0.0f64..0.999, 1..6), eps in 1e-6f64..1e-1) {
        let model = CoefficientModel::from_integers(&[-2, 1, 3]).unwrap();
        let s = SequenceStream::new(model, seed, 2);
        let requests: Vec<EvalRequest> = xs.iter().map(|&x| EvalRequest::new(x, eps)).collect();
        let many = eval_many(&s, &requests, TermBudget::default()).unwrap();
        for (r, v) in requests.iter().zip(&many) {
            prop_assert_eq!(*v, eval_to_eps(&s, r.x, eps, TermBudget::default()).unwrap());
            prop_assert!(v.tail_radius <= eps);
        }
    }

    #[test]
    fn enclosure_contains_longer_truncation(seed in any::<u64>(), x in 0.0f64..0.99, eps in 1e-8f64..1e-1) {
        let model = CoefficientModel::from_integers(&[-1, 1]).unwrap();
        let s = SequenceStream::new(model, seed, 3);
        let v = eval_to_eps(&s, x, eps, TermBudget::default()).unwrap();
        let w = eval_truncated(&s, x, 3 * v.terms).unwrap();
        prop_assert!(v.intersects(&w));
    }

    #[test]
    fn deeper_scans_extend_extrema(seed in any::<u64>()) {
        let model = CoefficientModel::from_integers(&[-1, 1]).unwrap();
        let s = SequenceStream::new(model, seed, 4);
        let shallow = scan(&s, &ScanGrid::default().with_delta_min(1e-2), &EpsRule::default(), TermBudget::default()).unwrap();
        let deep = scan(&s, &ScanGrid::default().with_delta_min(1e-3), &EpsRule::default(), TermBudget::default()).unwrap();
        prop_assert!(deep.running_sup_lower() >= shallow.running_sup_lower());
        prop_assert!(deep.running_inf_upper() <= shallow.running_inf_upper());
        prop_assert_eq!(&deep.points[..shallow.points.len()], &shallow.points[..]);
        for w in deep.points.windows(2) {
            prop_assert!(w[1].running_sup_lower >= w[0].running_sup_lower);
            prop_assert!(w[1].running_inf_upper <= w[0].running_inf_upper);
        }
    }

    #[test]
    fn inserting_points_keeps_oscillation(seed in any::<u64>(), extra in prop::collection::vec(1e-3f64..1e-1, 1..8)) {
        let model = CoefficientModel::from_integers(&[-1, 1]).unwrap();
        let s = SequenceStream::new(model, seed, 5);
        let grid = ScanGrid::default().with_delta_min(1e-3);
        let base = grid.deltas();
        let mut refined = base.clone();
        refined.extend(extra);
        refined.sort_by(|a, b| b.total_cmp(a));
        let eval = |ds: &[f64]| -> Vec<BoundedValue> {
            ds.iter().map(|&d| eval_to_eps(&s, 1.0 - d, 0.01, TermBudget::default()).unwrap()).collect()
        };
        let a = boundary_scan::ScanReport::from_bounds(&base, &eval(&base));
        let b = boundary_scan::ScanReport::from_bounds(&refined, &eval(&refined));
        for t in [0.5, 1.0, 3.0] {
            if verdict(&a, t).verdict == Verdict::OscillationLike {
                prop_assert_eq!(verdict(&b, t).verdict, Verdict::OscillationLike);
            }
        }
    }

    #[test]
    fn sign_witness_brackets_zero(seed in any::<u64>(), n in 1usize..3000, x in 0.0f64..0.9999) {
        let model = CoefficientModel::from_integers(&[-2, -1, 0, 3]).unwrap();
        let p = sample_prefix(&SequenceStream::new(model, seed, 6), n);
        let (a, b) = sign_witness(&p, x).unwrap();
        let vals = symmetry::orbit_values(&p, x).unwrap();
        prop_assert!(vals[a].upper() >= 0.0);
        prop_assert!(vals[b].lower() <= 0.0);
    }

    #[test]
    fn crossing_counts_are_cumulative(seed in any::<u64>(), y in -3.0f64..3.0) {
        let model = CoefficientModel::from_integers(&[-1, 1]).unwrap();
        let s = SequenceStream::new(model, seed, 7);
        let counts = crossing_counts_by_depth(&s, y, 0.2, &[5e-2, 1e-2, 3e-3], 1e-3, TermBudget::default()).unwrap();
        prop_assert!(counts.windows(2).all(|w| w[0] <= w[1]));
    }
}
