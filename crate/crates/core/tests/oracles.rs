//! Library results checked against independent oracles.

mod common;

use rpseries_core::coefficients::PermutedSource;
use rpseries_core::combinatorics::DEFAULT_ENUMERATION_BUDGET;
use rpseries_core::montecarlo::walk_positivity_table;
use rpseries_core::stats::{wilson, Z_95};
use rpseries_core::*;
use statrs::distribution::{ContinuousCDF, Normal};

#[test]
fn oracle_matching_equals_level_minima() {
    for n in 1..=12u64 {
        let want: u64 = (1..=n)
            .map(|i| common::binomial(n, i).min(common::binomial(n, i - 1)))
            .sum();
        assert_eq!(common::adjacent_level_matching(n as u32), want);
        let c = statrs::function::factorial::binomial(n, n / 2);
        assert_eq!(common::binomial(n, n / 2) as f64, c);
    }
}

#[test]
fn domain_size_equals_maximum_matching() {
    let model = CoefficientModel::from_integers(&[-1, 1]).unwrap();
    for n in 1..=14 {
        let r = verify_matching(&model, n, DEFAULT_ENUMERATION_BUDGET).unwrap();
        assert_eq!(r.domain_size, common::adjacent_level_matching(n as u32), "N={n}");
    }
}

#[test]
fn wilson_quantile_matches_normal() {
    let z = Normal::new(0.0, 1.0).unwrap().inverse_cdf(0.975);
    assert!((z - Z_95).abs() < 1e-9);
}

#[test]
fn ballot_walk_matches_enumeration() {
    let model = CoefficientModel::from_integers(&[-1, 1]).unwrap();
    let config = ExperimentConfig::new(model, 20_000, 31);
    let table = walk_positivity_table(&config, &[0, 2], &[8, 20]).unwrap();
    assert!(table.warning.is_some());
    for m in [0u64, 2] {
        for len in [8u64, 20] {
            let exact = common::walk_positivity_exact(&[(-1, 0.5), (1, 0.5)], m as usize, len as usize);
            let row = table.get(m, len).unwrap();
            // Widen to 99.9% so the check is stable across seeds.
            let n = row.samples as f64;
            let se = (exact * (1.0 - exact) / n).sqrt();
            assert!((row.fraction - exact).abs() <= 3.3 * se + 1e-12, "m={m} L={len}: {} vs {exact}", row.fraction);
        }
    }
}

#[test]
fn weighted_walk_matches_enumeration() {
    let model = CoefficientModel::parse("-1,2", Some("2/3,1/3")).unwrap();
    let config = ExperimentConfig::new(model, 20_000, 32);
    let table = walk_positivity_table(&config, &[1], &[12]).unwrap();
    let exact = common::walk_positivity_exact(&[(-1, 2.0 / 3.0), (2, 1.0 / 3.0)], 1, 12);
    let row = &table.rows[0];
    let se = (exact * (1.0 - exact) / row.samples as f64).sqrt();
    assert!((row.fraction - exact).abs() <= 3.3 * se);
}

#[test]
fn binary_walk_lower_bound() {
    let model = CoefficientModel::from_integers(&[0, 1]).unwrap();
    let config = ExperimentConfig::new(model, 2000, 33);
    let (row, warning) = montecarlo::walk_positivity(&config, 0, 1000).unwrap();
    assert!(warning.is_none());
    assert!(row.wilson_95.hi >= 0.5);
    let exact = common::walk_positivity_exact(&[(0, 0.5), (1, 0.5)], 0, 10);
    assert_eq!(exact, 0.5);
}

#[test]
fn symmetric_model_balances_plus_and_minus() {
    let model = CoefficientModel::from_integers(&[-1, 1]).unwrap();
    let mut config = ExperimentConfig::new(model, 400, 34);
    config.grid = ScanGrid::default().with_delta_min(1e-3);
    config.threshold = 2.0;
    let r = estimate_properties(&config).unwrap();
    let w = r.summary.wilson_95;
    assert!(w.plus_infinity_like.overlaps(&w.minus_infinity_like));
    let total: f64 = Verdict::ALL.iter().map(|&v| r.fraction(v)).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn permutation_preserves_frequencies() {
    let model = CoefficientModel::from_integers(&[-1, 0, 1]).unwrap();
    let n = 30_000u64;
    for shift in 0..3 {
        let s = PermutedSource::new(SequenceStream::new(model.clone(), 35, 0), shift);
        let mut counts = [0u64; 3];
        for i in s.indices().take(n as usize) {
            counts[i as usize] += 1;
        }
        let p = 1.0 / 3.0;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        for c in counts {
            assert!((c as f64 / n as f64 - p).abs() <= 3.0 * se, "{counts:?}");
        }
    }
}

#[test]
fn wilson_interval_covers_truth_usually() {
    // Coverage of the 95% interval for p = 0.3, n = 200 over many seeds.
    let model = CoefficientModel::parse("0,1", Some("7/10,3/10")).unwrap();
    let mut covered = 0;
    for seed in 0..400 {
        let s = SequenceStream::new(model.clone(), seed, 0);
        let ones = s.indices().take(200).filter(|&i| i == 1).count() as u64;
        if wilson(ones, 200).contains(0.3) {
            covered += 1;
        }
    }
    assert!(covered >= 360, "coverage {covered}/400");
}
