//! Monte Carlo estimates over seeded samples.
//!
//! Sample `i` always uses the stream keyed by `(master_seed, i)`, and results
//! are collected in sample order before any aggregation, so reports do not
//! depend on the worker count.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::boundary_scan::{scan, verdict, EpsRule, ScanError, ScanGrid, ScanReport, Verdict};
use crate::coefficients::{CoefficientModel, CoefficientSource, MeanSign, ModelSummary, SequenceStream};
use crate::series_eval::{EvalError, TermBudget};
use crate::stats::{wilson, Histogram, Interval};

/// Horizon used by the walk estimator when none is given.
pub const DEFAULT_WALK_HORIZON: u64 = 1_000_000;

/// Recorded with every estimate report.
pub const CALIBRATION_NOTE: &str = "Verdicts are finite-scale proxies: the threshold T, the \
grid depth and any acceptance fractions are calibration constants, not limits.";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Scan(#[from] ScanError),
    #[error("sample {index}: {source}")]
    Sample {
        index: u64,
        #[source]
        source: ScanError,
    },
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

/// Everything that determines a Monte Carlo run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: CoefficientModel,
    pub num_samples: u64,
    pub master_seed: u64,
    pub grid: ScanGrid,
    pub threshold: f64,
    pub eps_rule: EpsRule,
    /// Worker threads; `None` uses the global pool. Affects scheduling only.
    pub workers: Option<usize>,
    pub budget: TermBudget,
    /// Extra depths at which verdicts are also reported.
    pub report_depths: Vec<f64>,
}

impl ExperimentConfig {
    pub fn new(model: CoefficientModel, num_samples: u64, master_seed: u64) -> Self {
        Self {
            model,
            num_samples,
            master_seed,
            grid: ScanGrid::default(),
            threshold: 5.0,
            eps_rule: EpsRule::default(),
            workers: None,
            budget: TermBudget::default(),
            report_depths: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.num_samples == 0 {
            return Err(ExperimentError::Config("num_samples must be at least 1".into()));
        }
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(ExperimentError::Config(format!(
                "threshold must be positive, got {}",
                self.threshold
            )));
        }
        let eps = self.eps_rule.eps_at(0.5);
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(ExperimentError::Config(format!("eps must be positive, got {eps}")));
        }
        if self.workers == Some(0) {
            return Err(ExperimentError::Config("workers must be at least 1".into()));
        }
        self.grid.validate()?;
        let deepest = self.grid.delta_min;
        if let Some(d) = self
            .report_depths
            .iter()
            .find(|&&d| !(d >= deepest * (1.0 - 1e-12) && d <= self.grid.delta_start))
        {
            return Err(ExperimentError::Config(format!(
                "report depth {d} lies outside the grid [{deepest}, {}]",
                self.grid.delta_start
            )));
        }
        Ok(())
    }

    fn stream(&self, index: u64) -> SequenceStream {
        SequenceStream::new(self.model.clone(), self.master_seed, index)
    }

    /// Runs `f` on every sample index in order, on the configured pool.
    fn per_sample<T, F>(&self, f: F) -> Result<Vec<T>, ExperimentError>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        let run = || (0..self.num_samples).into_par_iter().map(&f).collect::<Vec<T>>();
        match self.workers {
            None => Ok(run()),
            Some(w) => rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| ExperimentError::Pool(e.to_string()))
                .map(|pool| pool.install(run)),
        }
    }
}

/// Per-verdict values under stable field names.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct VerdictTable<T> {
    pub plus_infinity_like: T,
    pub minus_infinity_like: T,
    pub oscillation_like: T,
    pub inconclusive: T,
}

impl<T: Copy> VerdictTable<T> {
    pub fn get(&self, v: Verdict) -> T {
        match v {
            Verdict::PlusInfinityLike => self.plus_infinity_like,
            Verdict::MinusInfinityLike => self.minus_infinity_like,
            Verdict::OscillationLike => self.oscillation_like,
            Verdict::Inconclusive => self.inconclusive,
        }
    }

    fn map<U>(&self, f: impl Fn(T) -> U) -> VerdictTable<U> {
        VerdictTable {
            plus_infinity_like: f(self.plus_infinity_like),
            minus_infinity_like: f(self.minus_infinity_like),
            oscillation_like: f(self.oscillation_like),
            inconclusive: f(self.inconclusive),
        }
    }
}

impl VerdictTable<u64> {
    fn bump(&mut self, v: Verdict) {
        let slot = match v {
            Verdict::PlusInfinityLike => &mut self.plus_infinity_like,
            Verdict::MinusInfinityLike => &mut self.minus_infinity_like,
            Verdict::OscillationLike => &mut self.oscillation_like,
            Verdict::Inconclusive => &mut self.inconclusive,
        };
        *slot += 1;
    }

    pub fn total(&self) -> u64 {
        self.plus_infinity_like + self.minus_infinity_like + self.oscillation_like + self.inconclusive
    }
}

/// Counts, fractions and Wilson intervals of one verdict tally.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerdictSummary {
    pub counts: VerdictTable<u64>,
    pub fractions: VerdictTable<f64>,
    pub wilson_95: VerdictTable<Interval>,
}

impl VerdictSummary {
    fn from_counts(counts: VerdictTable<u64>) -> Self {
        let n = counts.total();
        Self {
            fractions: counts.map(|c| c as f64 / n as f64),
            wilson_95: counts.map(|c| wilson(c, n)),
            counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DepthSummary {
    pub depth: f64,
    #[serde(flatten)]
    pub summary: VerdictSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub model: ModelSummary,
    pub num_samples: u64,
    pub master_seed: u64,
    pub grid: ScanGrid,
    pub threshold: f64,
    pub eps_rule: EpsRule,
    #[serde(flatten)]
    pub summary: VerdictSummary,
    /// Samples whose evaluation hit the term budget; they count as `Inconclusive`.
    pub budget_errors: u64,
    pub per_depth: Vec<DepthSummary>,
    /// Final running sup of certified lower bounds, one entry per sample.
    pub sup_histogram: Histogram,
    /// Final running inf of certified upper bounds, one entry per sample.
    pub inf_histogram: Histogram,
    pub calibration_note: &'static str,
}

impl EstimateReport {
    pub fn fraction(&self, v: Verdict) -> f64 {
        self.summary.fractions.get(v)
    }

    pub fn depth(&self, depth: f64) -> Option<&DepthSummary> {
        self.per_depth
            .iter()
            .find(|d| (d.depth - depth).abs() <= depth * 1e-9)
    }
}

enum SampleScan {
    Done(ScanReport),
    Budget,
}

fn scan_sample(config: &ExperimentConfig, grid: &ScanGrid, index: u64) -> Result<SampleScan, ExperimentError> {
    match scan(&config.stream(index), grid, &config.eps_rule, config.budget) {
        Ok(r) => Ok(SampleScan::Done(r)),
        Err(ScanError::Eval {
            source: EvalError::BudgetExceeded { .. },
            ..
        }) => Ok(SampleScan::Budget),
        Err(source) => Err(ExperimentError::Sample { index, source }),
    }
}

/// Scans every sample and tallies verdicts at the grid end and at each report depth.
pub fn estimate_properties(config: &ExperimentConfig) -> Result<EstimateReport, ExperimentError> {
    config.validate()?;
    let t = config.threshold;
    let outcomes = config.per_sample(|i| {
        scan_sample(config, &config.grid, i).map(|s| match s {
            SampleScan::Done(r) => Some((
                verdict(&r, t).verdict,
                config
                    .report_depths
                    .iter()
                    .map(|&d| verdict(&r.truncated(d), t).verdict)
                    .collect::<Vec<_>>(),
                r.running_sup_lower(),
                r.running_inf_upper(),
            )),
            SampleScan::Budget => None,
        })
    })?;

    let mut counts = VerdictTable::<u64>::default();
    let mut depth_counts = vec![VerdictTable::<u64>::default(); config.report_depths.len()];
    let mut sup_histogram = Histogram::boundary_proxy();
    let mut inf_histogram = Histogram::boundary_proxy();
    let mut budget_errors = 0;
    for outcome in outcomes {
        match outcome? {
            Some((v, per_depth, sup, inf)) => {
                counts.bump(v);
                for (slot, v) in depth_counts.iter_mut().zip(per_depth) {
                    slot.bump(v);
                }
                sup_histogram.add(sup);
                inf_histogram.add(inf);
            }
            None => {
                budget_errors += 1;
                counts.bump(Verdict::Inconclusive);
                for slot in &mut depth_counts {
                    slot.bump(Verdict::Inconclusive);
                }
                sup_histogram.add(f64::NAN);
                inf_histogram.add(f64::NAN);
            }
        }
    }
    Ok(EstimateReport {
        model: ModelSummary::from(&config.model),
        num_samples: config.num_samples,
        master_seed: config.master_seed,
        grid: config.grid,
        threshold: t,
        eps_rule: config.eps_rule,
        summary: VerdictSummary::from_counts(counts),
        budget_errors,
        per_depth: config
            .report_depths
            .iter()
            .zip(depth_counts)
            .map(|(&depth, c)| DepthSummary {
                depth,
                summary: VerdictSummary::from_counts(c),
            })
            .collect(),
        sup_histogram,
        inf_histogram,
        calibration_note: CALIBRATION_NOTE,
    })
}

/// Frequency of `S_l > 0` for every `m < l <= horizon`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkEstimate {
    pub m: u64,
    pub horizon: u64,
    pub successes: u64,
    pub samples: u64,
    pub fraction: f64,
    pub wilson_95: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkTable {
    pub mean_sign: MeanSign,
    /// Set when the mean is not positive, so the event has probability zero in the limit.
    pub warning: Option<String>,
    pub rows: Vec<WalkEstimate>,
}

impl WalkTable {
    pub fn get(&self, m: u64, horizon: u64) -> Option<&WalkEstimate> {
        self.rows.iter().find(|r| r.m == m && r.horizon == horizon)
    }
}

/// For each horizon, the last `l <= horizon` with `S_l <= 0` (0 if none).
fn last_nonpositive<S: CoefficientSource + ?Sized>(source: &S, horizons: &[u64]) -> Vec<u64> {
    let model = source.model();
    let min_step = model.scaled(model.min_index()).min(0);
    let max_h = *horizons.last().expect("at least one horizon");
    let mut out = Vec::with_capacity(horizons.len());
    let mut next = 0;
    let mut sum: i128 = 0;
    let mut last = 0u64;
    let mut indices = source.indices();
    for l in 1..=max_h {
        sum += model.scaled(indices.next().expect("sources are infinite"));
        if sum <= 0 {
            last = l;
        }
        while next < horizons.len() && horizons[next] == l {
            out.push(last);
            next += 1;
        }
        // Sum can no longer return to zero before the largest horizon.
        if sum + min_step * i128::from(max_h - l) > 0 {
            break;
        }
    }
    out.resize(horizons.len(), last);
    out
}

/// Estimates `P(S_l > 0 for all m < l <= L)` for every `(m, L)` pair.
///
/// Each sample is walked once to the largest horizon, so the estimates are
/// exactly nonincreasing in `L` and nondecreasing in `m`.
pub fn walk_positivity_table(
    config: &ExperimentConfig,
    ms: &[u64],
    horizons: &[u64],
) -> Result<WalkTable, ExperimentError> {
    if config.num_samples == 0 {
        return Err(ExperimentError::Config("num_samples must be at least 1".into()));
    }
    if horizons.is_empty() || !horizons.windows(2).all(|w| w[0] < w[1]) || horizons[0] == 0 {
        return Err(ExperimentError::Config(
            "horizons must be positive and strictly increasing".into(),
        ));
    }
    let lasts = config.per_sample(|i| last_nonpositive(&config.stream(i), horizons))?;
    let mean_sign = config.model.mean_sign();
    let warning = (mean_sign != MeanSign::Positive).then(|| {
        "mean of D is not positive: the positivity event has limiting probability 0".to_string()
    });
    let mut rows = Vec::new();
    for &m in ms {
        for (h, &horizon) in horizons.iter().enumerate() {
            let successes = lasts.iter().filter(|l| l[h] <= m).count() as u64;
            rows.push(WalkEstimate {
                m,
                horizon,
                successes,
                samples: config.num_samples,
                fraction: successes as f64 / config.num_samples as f64,
                wilson_95: wilson(successes, config.num_samples),
            });
        }
    }
    Ok(WalkTable {
        mean_sign,
        warning,
        rows,
    })
}

/// Single-cell form of [`walk_positivity_table`].
pub fn walk_positivity(
    config: &ExperimentConfig,
    m: u64,
    horizon: u64,
) -> Result<(WalkEstimate, Option<String>), ExperimentError> {
    let mut table = walk_positivity_table(config, &[m], &[horizon])?;
    Ok((table.rows.remove(0), table.warning))
}

/// The verdict the zero-one laws predict from the sign of the mean.
pub fn predicted_verdict(model: &CoefficientModel) -> Verdict {
    match model.mean_sign() {
        MeanSign::Positive => Verdict::PlusInfinityLike,
        MeanSign::Negative => Verdict::MinusInfinityLike,
        MeanSign::Zero => Verdict::OscillationLike,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroOneRow {
    pub depth: f64,
    pub threshold: f64,
    pub count: u64,
    pub samples: u64,
    pub fraction: f64,
    pub wilson_95: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroOneTable {
    pub predicted: Verdict,
    pub budget_errors: u64,
    pub rows: Vec<ZeroOneRow>,
}

/// Fraction of samples with the predicted verdict for each `(depth, T)`.
///
/// Each sample is scanned once to the deepest depth; shallower rows use the
/// same scan cut at their depth.
pub fn zero_one_diagnostic(
    config: &ExperimentConfig,
    depths: &[f64],
    thresholds: &[f64],
) -> Result<ZeroOneTable, ExperimentError> {
    config.validate()?;
    let deepest = depths.iter().copied().fold(f64::INFINITY, f64::min);
    if depths.is_empty() || thresholds.is_empty() || !(deepest > 0.0) {
        return Err(ExperimentError::Config("empty depth or threshold list".into()));
    }
    if let Some(t) = thresholds.iter().find(|&&t| !(t > 0.0)) {
        return Err(ExperimentError::Config(format!("threshold must be positive, got {t}")));
    }
    let grid = config.grid.with_delta_min(deepest);
    grid.validate()?;
    let predicted = predicted_verdict(&config.model);
    let hits = config.per_sample(|i| {
        scan_sample(config, &grid, i).map(|s| match s {
            SampleScan::Done(r) => Some(
                depths
                    .iter()
                    .flat_map(|&d| {
                        let cut = r.truncated(d);
                        thresholds
                            .iter()
                            .map(move |&t| verdict(&cut, t).verdict == predicted)
                    })
                    .collect::<Vec<bool>>(),
            ),
            SampleScan::Budget => None,
        })
    })?;
    let cells = depths.len() * thresholds.len();
    let mut counts = vec![0u64; cells];
    let mut budget_errors = 0;
    for h in hits {
        match h? {
            Some(h) => {
                for (c, hit) in counts.iter_mut().zip(h) {
                    *c += u64::from(hit);
                }
            }
            None => budget_errors += 1,
        }
    }
    let n = config.num_samples;
    let rows = depths
        .iter()
        .flat_map(|&depth| thresholds.iter().map(move |&threshold| (depth, threshold)))
        .zip(counts)
        .map(|((depth, threshold), count)| ZeroOneRow {
            depth,
            threshold,
            count,
            samples: n,
            fraction: count as f64 / n as f64,
            wilson_95: wilson(count, n),
        })
        .collect();
    Ok(ZeroOneTable {
        predicted,
        budget_errors,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(values: &[i64], n: u64, seed: u64) -> ExperimentConfig {
        ExperimentConfig::new(CoefficientModel::from_integers(values).unwrap(), n, seed)
    }

    #[test]
    fn positive_mean_goes_plus() {
        let mut c = config(&[0, 1], 100, 3);
        c.grid = ScanGrid::default().with_delta_min(1e-4);
        c.threshold = 50.0;
        let r = estimate_properties(&c).unwrap();
        assert!(r.fraction(Verdict::PlusInfinityLike) >= 0.99);
        assert_eq!(r.summary.counts.total(), 100);
        assert_eq!(r.sup_histogram.total(), 100);
    }

    #[test]
    fn invalid_configs() {
        assert!(CoefficientModel::from_integers(&[1]).is_err());
        let mut c = config(&[-1, 1], 0, 0);
        assert!(matches!(estimate_properties(&c), Err(ExperimentError::Config(_))));
        c.num_samples = 1;
        c.threshold = 0.0;
        assert!(matches!(estimate_properties(&c), Err(ExperimentError::Config(_))));
        c.threshold = 1.0;
        c.report_depths = vec![1e-7];
        assert!(matches!(estimate_properties(&c), Err(ExperimentError::Config(_))));
    }

    #[test]
    fn worker_count_does_not_matter() {
        let mut c = config(&[-1, 1], 40, 9);
        c.grid = ScanGrid::default().with_delta_min(1e-3);
        c.report_depths = vec![1e-2, 1e-3];
        c.workers = Some(1);
        let a = estimate_properties(&c).unwrap();
        c.workers = Some(3);
        let b = estimate_properties(&c).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn negated_model_swaps_plus_and_minus() {
        let mut c = config(&[-1, 2], 60, 5);
        c.grid = ScanGrid::default().with_delta_min(1e-3);
        let a = estimate_properties(&c).unwrap();
        c.model = c.model.negated();
        let b = estimate_properties(&c).unwrap();
        let (ca, cb) = (a.summary.counts, b.summary.counts);
        assert_eq!(ca.plus_infinity_like, cb.minus_infinity_like);
        assert_eq!(ca.minus_infinity_like, cb.plus_infinity_like);
        assert_eq!(ca.oscillation_like, cb.oscillation_like);
    }

    #[test]
    fn budget_errors_are_counted() {
        let mut c = config(&[-1, 1], 5, 1);
        c.budget = TermBudget(1000);
        let r = estimate_properties(&c).unwrap();
        assert_eq!(r.budget_errors, 5);
        assert_eq!(r.summary.counts.inconclusive, 5);
    }

    #[test]
    fn walk_nonnegative_steps() {
        let c = config(&[0, 1], 400, 2);
        let t = walk_positivity_table(&c, &[0, 1, 5], &[10, 1000]).unwrap();
        assert!(t.warning.is_none());
        // With no negative values, S_l > 0 for all l >= 1 iff a_1 = 1.
        let first_is_one = (0..400)
            .filter(|&i| c.stream(i).index_at(1) == 1)
            .count() as u64;
        assert_eq!(t.get(0, 1000).unwrap().successes, first_is_one);
        assert!(t.get(0, 10).unwrap().fraction >= 0.4);
        for h in [10, 1000] {
            assert!(t.get(0, h).unwrap().successes <= t.get(1, h).unwrap().successes);
            assert!(t.get(1, h).unwrap().successes <= t.get(5, h).unwrap().successes);
        }
    }

    #[test]
    fn walk_zero_mean_warns_and_decays() {
        let c = config(&[-1, 1], 300, 4);
        let t = walk_positivity_table(&c, &[0], &[10, 100, 1000]).unwrap();
        assert!(t.warning.is_some());
        let f: Vec<u64> = t.rows.iter().map(|r| r.successes).collect();
        assert!(f[0] >= f[1] && f[1] >= f[2]);
        assert!(walk_positivity_table(&c, &[0], &[10, 10]).is_err());
    }

    #[test]
    fn zero_one_single_row() {
        let mut c = config(&[0, 1], 30, 1);
        c.grid = ScanGrid::default();
        let t = zero_one_diagnostic(&c, &[1e-3], &[10.0]).unwrap();
        assert_eq!(t.predicted, Verdict::PlusInfinityLike);
        assert_eq!(t.rows.len(), 1);
        assert_eq!(predicted_verdict(&CoefficientModel::from_integers(&[-1, 1]).unwrap()), Verdict::OscillationLike);
    }
}
