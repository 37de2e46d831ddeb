//! Pilot run for the oscillation floor: fraction of `D = {-1, 1}` samples
//! classified `OscillationLike` at each decade, on a seed disjoint from the
//! acceptance suite.
//!
//! `cargo run --release -p rpseries-core --example calibrate_oscillation -- [samples] [delta_min] [ratio] [threshold]`

use rpseries_core::{estimate_properties, CoefficientModel, ExperimentConfig, ScanGrid};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: f64| args.get(i).and_then(|a| a.parse().ok()).unwrap_or(default);
    let samples = arg(0, 500.0) as u64;
    let delta_min = arg(1, 1e-6);
    let ratio = arg(2, 0.5);
    let threshold = arg(3, 5.0);

    let model = CoefficientModel::from_integers(&[-1, 1]).expect("valid model");
    let mut config = ExperimentConfig::new(model, samples, 1_000_003);
    config.grid = ScanGrid::new(0.1, ratio, delta_min).expect("valid grid");
    config.threshold = threshold;
    config.report_depths = (2..)
        .map(|e| 10f64.powi(-e))
        .take_while(|&d| d >= delta_min * (1.0 - 1e-12))
        .collect();
    let report = estimate_properties(&config).expect("pilot run");
    println!("samples {samples}, ratio {ratio}, threshold {threshold}");
    for d in &report.per_depth {
        let w = d.summary.wilson_95.oscillation_like;
        println!(
            "depth {:e}: OscillationLike {:.4} [{:.4}, {:.4}]",
            d.depth, d.summary.fractions.oscillation_like, w.lo, w.hi
        );
    }
}
