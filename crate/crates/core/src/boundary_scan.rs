//! Scans `f` along a geometric grid `x_m = 1 - delta_start * ratio^m` and
//! classifies the finite-scale behaviour.
//!
//! Verdicts are proxies for the limit properties `f -> +inf`, `f -> -inf`
//! and `limsup = +inf, liminf = -inf`. They are computed from certified
//! bounds only, never from raw float values.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coefficients::CoefficientSource;
use crate::series_eval::{eval_many, BoundedValue, EvalError, EvalRequest, TermBudget};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScanError {
    #[error("invalid scan grid: {0}")]
    Grid(String),
    #[error("grid point {m} (x = {x}): {source}")]
    Eval {
        m: usize,
        x: f64,
        #[source]
        source: EvalError,
    },
}

/// Geometric grid approaching 1 from below.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub delta_start: f64,
    pub ratio: f64,
    pub delta_min: f64,
}

impl Default for ScanGrid {
    fn default() -> Self {
        Self {
            delta_start: 0.1,
            ratio: 0.5,
            delta_min: 1e-5,
        }
    }
}

impl ScanGrid {
    pub fn new(delta_start: f64, ratio: f64, delta_min: f64) -> Result<Self, ScanError> {
        let grid = Self {
            delta_start,
            ratio,
            delta_min,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Default grid taken one decade deeper.
    pub fn deep() -> Self {
        Self {
            delta_min: 1e-6,
            ..Self::default()
        }
    }

    pub fn with_delta_min(self, delta_min: f64) -> Self {
        Self { delta_min, ..self }
    }

    pub fn validate(&self) -> Result<(), ScanError> {
        let bad = |msg: &str| Err(ScanError::Grid(msg.to_string()));
        if !(self.delta_start > 0.0 && self.delta_start <= 1.0) {
            return bad("delta_start must lie in (0, 1]");
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return bad("ratio must lie in (0, 1)");
        }
        if !(self.delta_min > 1e-15 && self.delta_min <= self.delta_start) {
            return bad("delta_min must lie in (1e-15, delta_start]");
        }
        let xs = self.points();
        if xs.windows(2).any(|w| w[0] >= w[1]) || xs.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
            return bad("grid points are not strictly increasing inside (0, 1)");
        }
        Ok(())
    }

    /// `1 - x_m` for every grid point, largest first.
    pub fn deltas(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut m = 0i32;
        loop {
            let delta = self.delta_start * self.ratio.powi(m);
            if delta < self.delta_min * (1.0 - 1e-12) {
                break;
            }
            out.push(delta);
            m += 1;
        }
        out
    }

    pub fn points(&self) -> Vec<f64> {
        self.deltas().into_iter().map(|d| 1.0 - d).collect()
    }
}

/// Tail tolerance used at each grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsRule {
    /// The same absolute tolerance everywhere.
    Constant(f64),
}

impl Default for EpsRule {
    fn default() -> Self {
        EpsRule::Constant(0.01)
    }
}

impl EpsRule {
    pub fn eps_at(&self, _x: f64) -> f64 {
        match *self {
            EpsRule::Constant(eps) => eps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanPoint {
    pub m: usize,
    pub delta: f64,
    pub bound: BoundedValue,
    /// Max over grid points so far of the certified lower bound.
    pub running_sup_lower: f64,
    /// Min over grid points so far of the certified upper bound.
    pub running_inf_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub points: Vec<ScanPoint>,
}

impl ScanReport {
    /// Builds the running extrema over enclosures listed in grid order.
    pub fn from_bounds(deltas: &[f64], bounds: &[BoundedValue]) -> Self {
        let mut sup = f64::NEG_INFINITY;
        let mut inf = f64::INFINITY;
        let points = deltas
            .iter()
            .zip(bounds)
            .enumerate()
            .map(|(m, (&delta, b))| {
                sup = sup.max(b.lower());
                inf = inf.min(b.upper());
                ScanPoint {
                    m,
                    delta,
                    bound: *b,
                    running_sup_lower: sup,
                    running_inf_upper: inf,
                }
            })
            .collect();
        Self { points }
    }

    pub fn running_sup_lower(&self) -> f64 {
        self.points
            .last()
            .map_or(f64::NEG_INFINITY, |p| p.running_sup_lower)
    }

    pub fn running_inf_upper(&self) -> f64 {
        self.points
            .last()
            .map_or(f64::INFINITY, |p| p.running_inf_upper)
    }

    /// The report restricted to grid points with `1 - x >= depth`.
    pub fn truncated(&self, depth: f64) -> ScanReport {
        let cut = depth * (1.0 - 1e-12);
        ScanReport {
            points: self
                .points
                .iter()
                .take_while(|p| p.delta >= cut)
                .copied()
                .collect(),
        }
    }

    /// Writes `m, x, N_used, value, lower, upper, running_sup_lower, running_inf_upper`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "m,x,N_used,value,lower,upper,running_sup_lower,running_inf_upper"
        )?;
        for p in &self.points {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                p.m,
                p.bound.x,
                p.bound.terms,
                p.bound.value,
                p.bound.lower(),
                p.bound.upper(),
                p.running_sup_lower,
                p.running_inf_upper
            )?;
        }
        Ok(())
    }
}

/// Evaluates the series at every grid point to the rule's tail tolerance.
///
/// All points are summed in a single pass over the coefficients.
pub fn scan<S: CoefficientSource + ?Sized>(
    source: &S,
    grid: &ScanGrid,
    eps_rule: &EpsRule,
    budget: TermBudget,
) -> Result<ScanReport, ScanError> {
    grid.validate()?;
    let deltas = grid.deltas();
    let requests: Vec<EvalRequest> = deltas
        .iter()
        .map(|&d| {
            let x = 1.0 - d;
            EvalRequest::new(x, eps_rule.eps_at(x))
        })
        .collect();
    let bounds = eval_many(source, &requests, budget).map_err(|e| ScanError::Eval {
        m: e.index,
        x: requests[e.index].x,
        source: e.error,
    })?;
    Ok(ScanReport::from_bounds(&deltas, &bounds))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    PlusInfinityLike,
    MinusInfinityLike,
    OscillationLike,
    Inconclusive,
}

impl Verdict {
    pub const ALL: [Verdict; 4] = [
        Verdict::PlusInfinityLike,
        Verdict::MinusInfinityLike,
        Verdict::OscillationLike,
        Verdict::Inconclusive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Verdict::PlusInfinityLike => "PlusInfinityLike",
            Verdict::MinusInfinityLike => "MinusInfinityLike",
            Verdict::OscillationLike => "OscillationLike",
            Verdict::Inconclusive => "Inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropertyVerdict {
    pub verdict: Verdict,
    pub threshold: f64,
}

/// Classifies a scan against threshold `t > 0`.
///
/// * `OscillationLike`: some certified lower bound exceeds `t` and some
///   certified upper bound is below `-t`.
/// * `PlusInfinityLike`: the running sup exceeds `t` and every enclosure in
///   the last decade of the grid lies above `t` (mirrored for `MinusInfinityLike`).
pub fn verdict(report: &ScanReport, t: f64) -> PropertyVerdict {
    assert!(t > 0.0, "verdict threshold must be positive");
    let sup = report.running_sup_lower();
    let inf = report.running_inf_upper();
    let v = if sup > t && inf < -t {
        Verdict::OscillationLike
    } else if let Some(last) = report.points.last() {
        let decade = last.delta * 10.0 * (1.0 + 1e-12);
        let mut tail = report.points.iter().filter(|p| p.delta <= decade);
        if sup > t && tail.clone().all(|p| p.bound.lower() > t) {
            Verdict::PlusInfinityLike
        } else if inf < -t && tail.all(|p| p.bound.upper() < -t) {
            Verdict::MinusInfinityLike
        } else {
            Verdict::Inconclusive
        }
    } else {
        Verdict::Inconclusive
    };
    PropertyVerdict {
        verdict: v,
        threshold: t,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{CoefficientModel, PeriodicSource, SequenceStream};

    fn ones() -> PeriodicSource {
        PeriodicSource::new(CoefficientModel::from_integers(&[0, 1]).unwrap(), vec![1]).unwrap()
    }

    fn alternating() -> PeriodicSource {
        PeriodicSource::new(CoefficientModel::from_integers(&[-1, 1]).unwrap(), vec![1, 0])
            .unwrap()
    }

    fn fake_report(values: &[f64]) -> ScanReport {
        let bounds: Vec<BoundedValue> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| BoundedValue {
                x: 1.0 - 0.1 * 0.5f64.powi(i as i32),
                terms: 1,
                value: v,
                tail_radius: 0.0,
                rounding_slack: 0.0,
            })
            .collect();
        let deltas: Vec<f64> = bounds.iter().map(|b| 1.0 - b.x).collect();
        ScanReport::from_bounds(&deltas, &bounds)
    }

    #[test]
    fn default_grid_shape() {
        let g = ScanGrid::default();
        let xs = g.points();
        assert_eq!(xs.len(), 14);
        assert!(xs.windows(2).all(|w| w[0] < w[1]));
        assert!((xs[0] - 0.9).abs() < 1e-15);
        assert_eq!(ScanGrid::deep().points().len(), 17);
    }

    #[test]
    fn invalid_grids() {
        assert!(ScanGrid::new(0.1, 1.0, 1e-3).is_err());
        assert!(ScanGrid::new(0.1, 0.5, 0.2).is_err());
        assert!(ScanGrid::new(0.0, 0.5, 0.0).is_err());
        assert!(ScanGrid::new(2.0, 0.5, 1e-3).is_err());
    }

    #[test]
    fn all_ones_grows() {
        let grid = ScanGrid::new(0.1, 0.5, 1e-3).unwrap();
        let r = scan(&ones(), &grid, &EpsRule::default(), TermBudget::default()).unwrap();
        let last = r.points.last().unwrap();
        let exact = last.bound.x / (1.0 - last.bound.x);
        assert!(r.running_sup_lower() >= exact - 0.021);
        for w in r.points.windows(2) {
            assert!(w[0].running_sup_lower <= w[1].running_sup_lower);
            assert!(w[0].running_inf_upper >= w[1].running_inf_upper);
        }
    }

    #[test]
    fn all_ones_exact_depth() {
        let grid = ScanGrid::new(0.001, 0.5, 0.001).unwrap();
        let r = scan(&ones(), &grid, &EpsRule::default(), TermBudget::default()).unwrap();
        assert!(r.running_sup_lower() >= 990.0);
        assert_eq!(verdict(&r, 50.0).verdict, Verdict::PlusInfinityLike);
    }

    #[test]
    fn alternating_stays_bounded() {
        let grid = ScanGrid::new(0.1, 0.5, 1e-3).unwrap();
        let r = scan(&alternating(), &grid, &EpsRule::default(), TermBudget::default()).unwrap();
        for p in &r.points {
            let exact = p.bound.x / (1.0 + p.bound.x);
            assert!(p.bound.contains(exact));
            assert!(p.bound.lower() >= -0.02 && p.bound.upper() <= 0.52);
        }
        assert_eq!(verdict(&r, 1.0).verdict, Verdict::Inconclusive);
    }

    #[test]
    fn single_point_grid() {
        let grid = ScanGrid::new(0.5, 0.5, 0.5).unwrap();
        let s = SequenceStream::new(CoefficientModel::from_integers(&[-1, 1]).unwrap(), 1, 0);
        let r = scan(&s, &grid, &EpsRule::default(), TermBudget::default()).unwrap();
        assert_eq!(r.points.len(), 1);
        let p = r.points[0];
        assert_eq!(p.running_sup_lower, p.bound.lower());
        assert_eq!(p.running_inf_upper, p.bound.upper());
    }

    #[test]
    fn verdict_rules() {
        assert_eq!(
            verdict(&fake_report(&[10.0, -10.0]), 5.0).verdict,
            Verdict::OscillationLike
        );
        assert_eq!(
            verdict(&fake_report(&[1.0, 2.0, 3.0]), 50.0).verdict,
            Verdict::Inconclusive
        );
        assert_eq!(
            verdict(&fake_report(&[1.0, 2.0, 20.0, 30.0, 40.0, 50.0]), 5.0).verdict,
            Verdict::PlusInfinityLike
        );
        assert_eq!(
            verdict(&fake_report(&[-1.0, -2.0, -20.0, -30.0, -40.0, -50.0]), 5.0).verdict,
            Verdict::MinusInfinityLike
        );
        // Crossed +T once, but the last decade dips below it.
        assert_eq!(
            verdict(&fake_report(&[20.0, 1.0, 2.0, 3.0, 4.0, 6.0]), 5.0).verdict,
            Verdict::Inconclusive
        );
        assert_eq!(
            verdict(&ScanReport { points: vec![] }, 1.0).verdict,
            Verdict::Inconclusive
        );
    }

    #[test]
    fn budget_error_names_grid_point() {
        let grid = ScanGrid::new(0.1, 0.1, 1e-9).unwrap();
        let err = scan(&alternating(), &grid, &EpsRule::default(), TermBudget::default())
            .unwrap_err();
        match err {
            ScanError::Eval { m, source, .. } => {
                assert_eq!(m, 6);
                assert!(matches!(source, EvalError::BudgetExceeded { .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncation_is_a_prefix() {
        let s = SequenceStream::new(CoefficientModel::from_integers(&[-1, 1]).unwrap(), 2, 5);
        let deep = scan(&s, &ScanGrid::new(0.1, 0.5, 1e-4).unwrap(), &EpsRule::default(), TermBudget::default()).unwrap();
        let shallow = scan(&s, &ScanGrid::new(0.1, 0.5, 1e-2).unwrap(), &EpsRule::default(), TermBudget::default()).unwrap();
        assert_eq!(deep.truncated(1e-2), shallow);
    }
}
