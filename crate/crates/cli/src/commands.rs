//! One function per subcommand: resolve the config, run, write the artifact.

use std::io::Write as _;

use rpseries_core::combinatorics::CombError;
use rpseries_core::montecarlo::{walk_positivity_table, zero_one_diagnostic, ExperimentError, WalkTable, ZeroOneTable};
use rpseries_core::residuality::WitnessError;
use rpseries_core::symmetry::orbit_check;
use rpseries_core::*;
use serde::Serialize;

use crate::config::*;
use crate::output::{emit, scan_svg, write_atomic, Provenance};
use crate::{BijectionCommand, CliError, Command};

pub fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Scan(a) => scan_cmd(resolve(&a, a.shared.config.as_deref())?),
        Command::Estimate(a) => estimate_cmd(resolve(&a, a.shared.config.as_deref())?),
        Command::Bijection(BijectionCommand::Verify(a)) => bijection_cmd(resolve(&a, a.shared.config.as_deref())?),
        Command::OrbitCheck(a) => orbit_cmd(resolve(&a, a.shared.config.as_deref())?),
        Command::Crossings(a) => crossings_cmd(resolve(&a, a.shared.config.as_deref())?),
        Command::Witness(a) => witness_cmd(resolve(&a, a.shared.config.as_deref())?),
    }
}

fn config_or_budget(e: &(dyn std::error::Error + 'static)) -> CliError {
    CliError::classify(e, CliError::Config)
}

fn failed_or_budget(e: &(dyn std::error::Error + 'static)) -> CliError {
    CliError::classify(e, CliError::Failed)
}

fn set_workers(workers: Option<usize>) -> Result<(), CliError> {
    match workers {
        Some(0) => Err(CliError::Config("--workers must be at least 1".into())),
        Some(n) => {
            // A pool built earlier in the same process is kept.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            Ok(())
        }
        None => Ok(()),
    }
}

fn note(msg: impl AsRef<str>) {
    let _ = writeln!(std::io::stderr(), "{}", msg.as_ref());
}

fn grid(start: f64, ratio: f64, depth: f64) -> Result<ScanGrid, CliError> {
    ScanGrid::new(start, ratio, depth).map_err(|e| CliError::Config(e.to_string()))
}

fn eps_rule(eps: f64) -> Result<EpsRule, CliError> {
    if eps > 0.0 && eps.is_finite() {
        Ok(EpsRule::Constant(eps))
    } else {
        Err(CliError::Config(format!("eps must be positive and finite, got {eps}")))
    }
}

fn scan_cmd(cfg: ScanConfig) -> Result<(), CliError> {
    set_workers(cfg.workers)?;
    let model = cfg.model()?;
    let budget = cfg.budget();
    let grid = grid(cfg.start, cfg.ratio, cfg.depth)?;
    let rule = eps_rule(cfg.eps)?;
    if !(cfg.threshold > 0.0) {
        return Err(CliError::Config(format!("threshold must be positive, got {}", cfg.threshold)));
    }
    let source = SequenceStream::new(model, cfg.seed, cfg.index);
    let report = scan(&source, &grid, &rule, budget).map_err(|e| config_or_budget(&e))?;
    let v = verdict(&report, cfg.threshold);

    let prov = Provenance::new("scan", Some(cfg.seed), budget.0, source.model(), &cfg);
    let mut text = prov.csv_header()?;
    let mut body = Vec::new();
    report.write_csv(&mut body).map_err(|e| CliError::Io(e.to_string()))?;
    text.push_str(&String::from_utf8(body).expect("CSV is UTF-8"));
    emit(cfg.out.as_deref(), &text)?;
    if let Some(svg) = &cfg.svg {
        let title = format!("seed {} index {} set {}", cfg.seed, cfg.index, cfg.set.as_deref().unwrap_or(""));
        write_atomic(svg, &scan_svg(&report, &title))?;
    }
    note(format!(
        "scan: {} points, sup lower {}, inf upper {}, verdict {} at T = {}",
        report.points.len(),
        report.running_sup_lower(),
        report.running_inf_upper(),
        v.verdict.name(),
        cfg.threshold
    ));
    Ok(())
}

/// Powers of ten strictly between `start` and `depth`, then `depth` itself.
pub fn default_report_depths(start: f64, depth: f64) -> Vec<f64> {
    let mut out: Vec<f64> = (1..=40)
        .map(|e| 10f64.powi(-e))
        .filter(|&d| d < start * (1.0 - 1e-9) && d > depth * (1.0 + 1e-9))
        .collect();
    out.push(depth);
    out
}

#[derive(Serialize)]
struct EstimateOutput {
    estimate: EstimateReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    walk: Option<WalkTable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    zero_one: Option<ZeroOneTable>,
}

fn estimate_cmd(cfg: EstimateConfig) -> Result<(), CliError> {
    let model = cfg.model()?;
    let budget = cfg.budget();
    let depths = cfg
        .report_depths
        .clone()
        .unwrap_or_else(|| default_report_depths(cfg.start, cfg.depth));
    let mut exp = ExperimentConfig::new(model, cfg.samples, cfg.seed);
    exp.grid = grid(cfg.start, cfg.ratio, cfg.depth)?;
    exp.threshold = cfg.threshold;
    exp.eps_rule = eps_rule(cfg.eps)?;
    exp.workers = cfg.workers;
    exp.budget = budget;
    exp.report_depths = depths.clone();
    let run_err = |e: ExperimentError| match e {
        ExperimentError::Config(_) => CliError::Config(e.to_string()),
        other => failed_or_budget(&other),
    };
    exp.validate().map_err(run_err)?;
    if cfg.workers == Some(0) {
        return Err(CliError::Config("--workers must be at least 1".into()));
    }

    let estimate = estimate_properties(&exp).map_err(run_err)?;
    let walk = if cfg.walk_m.is_some() || cfg.walk_horizons.is_some() {
        let ms = cfg.walk_m.clone().unwrap_or_else(|| vec![0]);
        let hs = cfg.walk_horizons.clone().unwrap_or_else(|| vec![1_000, 10_000]);
        Some(walk_positivity_table(&exp, &ms, &hs).map_err(run_err)?)
    } else {
        None
    };
    let zero_one = match &cfg.zero_one_thresholds {
        Some(ts) => Some(zero_one_diagnostic(&exp, &depths, ts).map_err(run_err)?),
        None => None,
    };

    note(format!(
        "estimate: {} samples, +inf {:.4}, -inf {:.4}, oscillation {:.4}, inconclusive {:.4}, budget errors {}",
        estimate.num_samples,
        estimate.fraction(Verdict::PlusInfinityLike),
        estimate.fraction(Verdict::MinusInfinityLike),
        estimate.fraction(Verdict::OscillationLike),
        estimate.fraction(Verdict::Inconclusive),
        estimate.budget_errors
    ));
    if let Some(w) = walk.as_ref().and_then(|w| w.warning.as_ref()) {
        note(format!("walk: {w}"));
    }
    let data = EstimateOutput { estimate, walk, zero_one };
    let prov = Provenance::new("estimate", Some(cfg.seed), budget.0, &exp.model, &cfg);
    emit(cfg.out.as_deref(), &prov.json_document(&data)?)
}

fn bijection_cmd(cfg: BijectionConfig) -> Result<(), CliError> {
    set_workers(cfg.workers)?;
    let model = cfg.model()?;
    let n = cfg
        .n
        .ok_or_else(|| CliError::Config("--n is required".into()))?;
    if n == 0 {
        return Err(CliError::Config("--n must be at least 1".into()));
    }
    let report = verify_matching(&model, n, cfg.max_words).map_err(|e| match e {
        CombError::BudgetExceeded { .. } => CliError::Budget(format!("{e} (raise --max-words)")),
        other => failed_or_budget(&other),
    })?;
    note(format!(
        "bijection verify: N = {n}, domain {} of {}, fraction {}, violations {}",
        report.domain_size, report.total_words, report.fraction, report.violation_count
    ));
    let prov = Provenance::new("bijection verify", None, cfg.budget().0, &model, &cfg);
    emit(cfg.out.as_deref(), &prov.json_document(&report)?)
}

fn orbit_cmd(cfg: OrbitConfig) -> Result<(), CliError> {
    set_workers(cfg.workers)?;
    let model = cfg.model()?;
    let budget = cfg.budget();
    if cfg.n == 0 {
        return Err(CliError::Config("--n must be at least 1".into()));
    }
    if cfg.n as u64 > budget.0 {
        return Err(CliError::Budget(format!(
            "N = {} terms are required but the term budget is {} (raise --term-budget or {})",
            cfg.n,
            budget.0,
            rpseries_core::series_eval::TERM_BUDGET_ENV
        )));
    }
    if !(0.0..1.0).contains(&cfg.x) {
        return Err(CliError::Config(format!("x must lie in [0, 1), got {}", cfg.x)));
    }
    let prefix = sample_prefix(&SequenceStream::new(model, cfg.seed, cfg.index), cfg.n);
    let check = orbit_check(&prefix, cfg.x).map_err(|e| config_or_budget(&e))?;
    note(format!(
        "orbit-check: orbit sum {} vs expected {} (slack {}), sign witness {:?}",
        check.orbit_sum, check.expected, check.slack, check.sign_witness
    ));
    let prov = Provenance::new("orbit-check", Some(cfg.seed), budget.0, prefix.model(), &cfg);
    emit(cfg.out.as_deref(), &prov.json_document(&check)?)
}

fn crossings_cmd(cfg: CrossingsConfig) -> Result<(), CliError> {
    set_workers(cfg.workers)?;
    let model = cfg.model()?;
    let budget = cfg.budget();
    let (hi, lo) = cfg.window_depths()?;
    let mut search = CrossingSearch::by_depth(cfg.y, hi, lo, cfg.eps);
    if let Some(m) = cfg.max_brackets {
        search.max_brackets = m;
    }
    search.subdivision_budget = cfg.subdivision_budget;
    search.budget = budget;
    let source = SequenceStream::new(model, cfg.seed, cfg.index);
    let report = find_crossings(&source, &search).map_err(|e| match e {
        crossings::CrossingError::Eval { .. } => failed_or_budget(&e),
        other => CliError::Config(other.to_string()),
    })?;

    let prov = Provenance::new("crossings", Some(cfg.seed), budget.0, source.model(), &cfg);
    let mut text = prov.csv_header()?;
    text.push_str(&format!(
        "# result: brackets = {}, indeterminate = {}, truncated = {}\n",
        report.brackets.len(),
        report.indeterminate.len(),
        report.truncated
    ));
    let mut body = Vec::new();
    report.write_csv(&mut body).map_err(|e| CliError::Io(e.to_string()))?;
    text.push_str(&String::from_utf8(body).expect("CSV is UTF-8"));
    emit(cfg.out.as_deref(), &text)?;
    note(format!(
        "crossings: {} brackets of y = {} on [{}, {}], {} indeterminate grid points{}",
        report.brackets.len(),
        cfg.y,
        report.x_lo,
        report.x_hi,
        report.indeterminate.len(),
        if report.truncated { ", truncated" } else { "" }
    ));
    Ok(())
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum WitnessOutput {
    Positive(PositiveWitness),
    NonzeroCoordinate {
        prefix: Vec<String>,
        m: usize,
        /// `(position, value)` pairs, 1-based positions.
        fixed: Vec<(usize, String)>,
        depth: usize,
    },
}

fn witness_cmd(cfg: WitnessConfig) -> Result<(), CliError> {
    set_workers(cfg.workers)?;
    let model = cfg.model()?;
    let text = cfg.prefix.as_deref().unwrap_or("");
    let prefix = if text.trim().is_empty() {
        FinitePrefix::from_indices(model.clone(), Vec::new())
    } else {
        FinitePrefix::parse(model.clone(), text)
    }
    .map_err(|e| CliError::Config(format!("prefix: {e}")))?;
    let target = cfg
        .target
        .ok_or_else(|| CliError::Config("--target is required".into()))?;
    let kind = match cfg.kind {
        WitnessKind::Auto if model.all_nonnegative() || model.all_nonpositive() => WitnessKind::NonzeroCoordinate,
        WitnessKind::Auto => WitnessKind::Positive,
        k => k,
    };
    let witness_err = |e: WitnessError| match e {
        WitnessError::SearchExhausted(_) | WitnessError::CertificateFailed(_) => CliError::Failed(e.to_string()),
        other => CliError::Config(other.to_string()),
    };
    let data = match kind {
        WitnessKind::Positive => {
            let w = witness_positive(&prefix, target).map_err(witness_err)?;
            note(format!(
                "witness: M = {}, x = 1 - 2^-{}, N = {}, certificate {} (margin {})",
                w.big_m, w.t, w.n, w.certificate, w.margin
            ));
            WitnessOutput::Positive(w)
        }
        _ => {
            if !(target >= 0.0 && target.fract() == 0.0 && target <= usize::MAX as f64) {
                return Err(CliError::Config(format!(
                    "nonzero-coordinate witnesses need a nonnegative integer target, got {target}"
                )));
            }
            let m = target as usize;
            let cyl = witness_nonzero_coordinate(&prefix, m).map_err(witness_err)?;
            let fixed: Vec<(usize, String)> = cyl
                .fixed()
                .iter()
                .map(|&(pos, i)| (pos, model.value_strings()[i as usize].clone()))
                .collect();
            let (pos, value) = fixed.last().cloned().expect("cylinder fixes a coordinate");
            note(format!("witness: position {pos} fixed to {value}, so the sequence does not vanish from {m}"));
            WitnessOutput::NonzeroCoordinate {
                prefix: prefix.value_strings(),
                m,
                depth: cyl.depth(),
                fixed,
            }
        }
    };
    let prov = Provenance::new("witness", None, cfg.budget().0, &model, &cfg);
    emit(cfg.out.as_deref(), &prov.json_document(&data)?)
}
