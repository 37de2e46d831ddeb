use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rpseries_core::combinatorics::DEFAULT_ENUMERATION_BUDGET;
use rpseries_core::series_eval::eval_many;
use rpseries_core::*;

fn binary() -> CoefficientModel {
    CoefficientModel::from_integers(&[-1, 1]).unwrap()
}

fn evaluation(c: &mut Criterion) {
    let source = SequenceStream::new(binary(), 1, 0);
    let grid = ScanGrid::default().with_delta_min(1e-4);
    let requests: Vec<EvalRequest> = grid
        .deltas()
        .iter()
        .map(|&d| EvalRequest::new(1.0 - d, 1e-2))
        .collect();
    c.bench_function("eval_to_eps x=1-1e-4", |b| {
        b.iter(|| eval_to_eps(&source, black_box(1.0 - 1e-4), 1e-2, TermBudget::default()).unwrap())
    });
    c.bench_function("eval_many scan grid to 1e-4", |b| {
        b.iter(|| eval_many(&source, black_box(&requests), TermBudget::default()).unwrap())
    });
    c.bench_function("scan to 1e-4", |b| {
        b.iter(|| scan(&source, &grid, &EpsRule::default(), TermBudget::default()).unwrap())
    });
}

fn matching(c: &mut Criterion) {
    let model = CoefficientModel::from_integers(&[-1, 0, 1]).unwrap();
    c.bench_function("verify_matching k=3 N=10", |b| {
        b.iter(|| verify_matching(&model, black_box(10), DEFAULT_ENUMERATION_BUDGET).unwrap())
    });
}

fn roots(c: &mut Criterion) {
    let source = SequenceStream::new(binary(), 2, 0);
    let search = CrossingSearch::by_depth(0.0, 1e-1, 1e-3, 1e-3);
    let mut group = c.benchmark_group("crossings");
    group.sample_size(20);
    group.bench_function("find_crossings window 1e-1:1e-3", |b| {
        b.iter(|| find_crossings(&source, black_box(&search)).unwrap())
    });
    group.finish();
}

fn witnesses(c: &mut Criterion) {
    let prefix = FinitePrefix::parse(binary(), "1,-1,-1,1,-1").unwrap();
    c.bench_function("prefix_infimum j=5", |b| b.iter(|| prefix_infimum(black_box(&prefix))));
    c.bench_function("witness_positive m=10", |b| {
        b.iter(|| witness_positive(black_box(&prefix), 10.0).unwrap())
    });
}

criterion_group!(benches, evaluation, matching, roots, witnesses);
criterion_main!(benches);
