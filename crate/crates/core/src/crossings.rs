//! Certified solutions of `f(x) = y` on windows approaching `x = 1`.
//!
//! The window is scanned on a geometric grid in `1 - x` with 64 points per
//! decade. A point is certified when its enclosure lies strictly above or
//! strictly below `y`. Two consecutive certified points of opposite sign
//! bracket a root by continuity; points whose enclosure contains `y` are
//! listed separately and never counted. Each bracket is then bisected until
//! its width is at most `1e-3 (1 - b)`.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::coefficients::CoefficientSource;
use crate::series_eval::{eval_many, eval_to_eps, BoundedValue, EvalError, EvalRequest, TermBudget};

/// Detection grid density in points per decade of `1 - x`.
pub const POINTS_PER_DECADE: u32 = 64;
/// Extra evaluations allowed per bracket when a midpoint is indeterminate.
pub const DEFAULT_SUBDIVISION_BUDGET: u32 = 20;
/// Target bracket width relative to `1 - b`.
pub const REFINE_RELATIVE_WIDTH: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CrossingError {
    #[error("window must satisfy 0 < x_lo < x_hi < 1, got [{0}, {1}]")]
    Window(f64, f64),
    #[error("tolerance must be positive and finite, got {0}")]
    Tolerance(f64),
    #[error("depths must be strictly decreasing and inside (0, 1)")]
    Depths,
    #[error("evaluation at x = {x}: {source}")]
    Eval {
        x: f64,
        #[source]
        source: EvalError,
    },
}

/// Sign of `f - y` certified by an enclosure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CertifiedSign {
    Above,
    Below,
    Indeterminate,
}

impl CertifiedSign {
    pub fn of(bound: &BoundedValue, y: f64) -> Self {
        if bound.lower() > y {
            CertifiedSign::Above
        } else if bound.upper() < y {
            CertifiedSign::Below
        } else {
            CertifiedSign::Indeterminate
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            CertifiedSign::Above => 1,
            CertifiedSign::Below => -1,
            CertifiedSign::Indeterminate => 0,
        }
    }
}

/// An interval `[a, b]` on which `f - y` changes certified sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootBracket {
    pub a: f64,
    pub b: f64,
    /// Sign of `f(a) - y`; the sign at `b` is the opposite.
    pub sign_at_a: CertifiedSign,
    pub y: f64,
    /// Tail tolerances under which the end signs were certified.
    pub eps_a: f64,
    pub eps_b: f64,
    /// Whether bisection reached the target width.
    pub refined: bool,
}

impl RootBracket {
    pub fn sign_at_b(&self) -> CertifiedSign {
        match self.sign_at_a {
            CertifiedSign::Above => CertifiedSign::Below,
            CertifiedSign::Below => CertifiedSign::Above,
            CertifiedSign::Indeterminate => CertifiedSign::Indeterminate,
        }
    }

    /// `floor(-log10(1 - a))`.
    pub fn depth_decade(&self) -> i32 {
        (-(1.0 - self.a).log10()).floor() as i32
    }

    pub fn contains(&self, x: f64) -> bool {
        self.a <= x && x <= self.b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossingReport {
    pub y: f64,
    pub x_lo: f64,
    pub x_hi: f64,
    pub eps: f64,
    pub grid_points: usize,
    pub brackets: Vec<RootBracket>,
    /// Grid points whose enclosure contains `y`.
    pub indeterminate: Vec<f64>,
    /// More than `max_brackets` brackets were found; the list was cut.
    pub truncated: bool,
}

impl CrossingReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "a,b,sign_at_a,depth_decade")?;
        for r in &self.brackets {
            writeln!(w, "{},{},{},{}", r.a, r.b, r.sign_at_a.as_i8(), r.depth_decade())?;
        }
        Ok(())
    }
}

/// Parameters of a crossing search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossingSearch {
    pub y: f64,
    pub x_lo: f64,
    pub x_hi: f64,
    pub eps: f64,
    pub max_brackets: usize,
    pub subdivision_budget: u32,
    pub budget: TermBudget,
}

impl CrossingSearch {
    /// Search on `[1 - depth_hi, 1 - depth_lo]`.
    pub fn by_depth(y: f64, depth_hi: f64, depth_lo: f64, eps: f64) -> Self {
        Self {
            y,
            x_lo: 1.0 - depth_hi,
            x_hi: 1.0 - depth_lo,
            eps,
            max_brackets: usize::MAX,
            subdivision_budget: DEFAULT_SUBDIVISION_BUDGET,
            budget: TermBudget::default(),
        }
    }

    fn validate(&self) -> Result<(), CrossingError> {
        if !(0.0 < self.x_lo && self.x_lo < self.x_hi && self.x_hi < 1.0) {
            return Err(CrossingError::Window(self.x_lo, self.x_hi));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(CrossingError::Tolerance(self.eps));
        }
        Ok(())
    }
}

/// Grid of depths `delta_hi * 10^(-i/64)` down to `delta_lo`, which is always included.
pub fn detection_depths(delta_hi: f64, delta_lo: f64) -> Vec<f64> {
    let step = 10f64.powf(-1.0 / POINTS_PER_DECADE as f64);
    let mut out = Vec::new();
    let mut i = 0i32;
    loop {
        let d = delta_hi * step.powi(i);
        if d <= delta_lo * (1.0 + 1e-12) {
            out.push(delta_lo);
            return out;
        }
        out.push(d);
        i += 1;
    }
}

/// Certified brackets of `f(x) = y` inside the window, in ascending order of `x`.
pub fn find_crossings<S: CoefficientSource + ?Sized>(
    source: &S,
    search: &CrossingSearch,
) -> Result<CrossingReport, CrossingError> {
    search.validate()?;
    let depths = detection_depths(1.0 - search.x_lo, 1.0 - search.x_hi);
    let requests: Vec<EvalRequest> = depths
        .iter()
        .map(|&d| EvalRequest::new(1.0 - d, search.eps))
        .collect();
    let bounds = eval_many(source, &requests, search.budget).map_err(|e| CrossingError::Eval {
        x: requests[e.index].x,
        source: e.error,
    })?;

    let mut indeterminate = Vec::new();
    let mut raw = Vec::new();
    let mut last: Option<(f64, CertifiedSign)> = None;
    for b in &bounds {
        let sign = CertifiedSign::of(b, search.y);
        if sign == CertifiedSign::Indeterminate {
            indeterminate.push(b.x);
            continue;
        }
        if let Some((xa, sa)) = last {
            if sa != sign {
                raw.push((xa, b.x, sa));
            }
        }
        last = Some((b.x, sign));
    }
    let truncated = raw.len() > search.max_brackets;
    raw.truncate(search.max_brackets);

    let brackets = raw
        .into_par_iter()
        .map(|(a, b, sign_at_a)| refine(source, search, a, b, sign_at_a))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CrossingReport {
        y: search.y,
        x_lo: search.x_lo,
        x_hi: search.x_hi,
        eps: search.eps,
        grid_points: bounds.len(),
        brackets,
        indeterminate,
        truncated,
    })
}

fn refine<S: CoefficientSource + ?Sized>(
    source: &S,
    search: &CrossingSearch,
    mut a: f64,
    mut b: f64,
    sign_at_a: CertifiedSign,
) -> Result<RootBracket, CrossingError> {
    let mut extra = search.subdivision_budget;
    let mut refined = true;
    let (mut eps_a, mut eps_b) = (search.eps, search.eps);
    while b - a > REFINE_RELATIVE_WIDTH * (1.0 - b) {
        let mid = a + (b - a) / 2.0;
        if mid <= a || mid >= b {
            break;
        }
        let mut eps = search.eps;
        let signed = loop {
            let bound = eval_to_eps(source, mid, eps, search.budget)
                .map_err(|source| CrossingError::Eval { x: mid, source })?;
            let sign = CertifiedSign::of(&bound, search.y);
            if sign != CertifiedSign::Indeterminate || extra == 0 {
                break sign;
            }
            extra -= 1;
            eps /= 16.0;
        };
        match signed {
            CertifiedSign::Indeterminate => {
                refined = false;
                break;
            }
            s if s == sign_at_a => (a, eps_a) = (mid, eps),
            _ => (b, eps_b) = (mid, eps),
        }
    }
    Ok(RootBracket {
        a,
        b,
        sign_at_a,
        y: search.y,
        eps_a,
        eps_b,
        refined,
    })
}

/// Cumulative certified crossing counts on `[1 - start_depth, 1 - depths[i]]`.
///
/// One search runs to the deepest window; a bracket counts toward window `i`
/// when it ends at or before `1 - depths[i]`.
pub fn crossing_counts_by_depth<S: CoefficientSource + ?Sized>(
    source: &S,
    y: f64,
    start_depth: f64,
    depths: &[f64],
    eps: f64,
    budget: TermBudget,
) -> Result<Vec<usize>, CrossingError> {
    let decreasing = depths.windows(2).all(|w| w[0] > w[1]);
    let inside = depths.iter().all(|&d| 0.0 < d && d < start_depth && d < 1.0);
    if depths.is_empty() || !decreasing || !inside {
        return Err(CrossingError::Depths);
    }
    let mut search = CrossingSearch::by_depth(y, start_depth, depths[depths.len() - 1], eps);
    search.budget = budget;
    let report = find_crossings(source, &search)?;
    Ok(depths
        .iter()
        .map(|&d| report.brackets.iter().filter(|r| r.b <= 1.0 - d).count())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{CoefficientModel, PeriodicSource, SequenceStream};

    fn ones() -> PeriodicSource {
        PeriodicSource::new(CoefficientModel::from_integers(&[0, 1]).unwrap(), vec![1]).unwrap()
    }

    #[test]
    fn grid_density() {
        let d = detection_depths(1e-1, 1e-3);
        assert_eq!(d.len(), 129);
        assert_eq!(d[0], 1e-1);
        assert_eq!(*d.last().unwrap(), 1e-3);
        assert!((d[64] - 1e-2).abs() < 1e-15);
    }

    #[test]
    fn all_ones_root_at_three_quarters() {
        let search = CrossingSearch::by_depth(3.0, 0.5, 0.01, 1e-6);
        let r = find_crossings(&ones(), &search).unwrap();
        assert_eq!(r.brackets.len(), 1);
        let b = r.brackets[0];
        assert!(b.contains(0.75), "{b:?}");
        assert!(b.refined);
        assert!(b.b - b.a <= REFINE_RELATIVE_WIDTH * (1.0 - b.b));
        assert_eq!(b.sign_at_a, CertifiedSign::Below);
    }

    #[test]
    fn alternating_root_at_one_third() {
        let m = CoefficientModel::from_integers(&[-1, 1]).unwrap();
        let s = PeriodicSource::new(m, vec![1, 0]).unwrap();
        let search = CrossingSearch::by_depth(0.25, 0.9, 0.3, 1e-8);
        let r = find_crossings(&s, &search).unwrap();
        assert_eq!(r.brackets.len(), 1);
        assert!(r.brackets[0].contains(1.0 / 3.0));
        assert_eq!(r.brackets[0].sign_at_a, CertifiedSign::Below);
    }

    #[test]
    fn out_of_range_target_is_empty() {
        let search = CrossingSearch::by_depth(-1.0, 0.5, 0.01, 1e-6);
        assert!(find_crossings(&ones(), &search).unwrap().brackets.is_empty());
        let search = CrossingSearch::by_depth(1e9, 0.5, 0.01, 1e-6);
        assert!(find_crossings(&ones(), &search).unwrap().brackets.is_empty());
    }

    #[test]
    fn counts_step_when_target_reached() {
        // x / (1 - x) = 1e4 at 1 - x ~ 1e-4.
        let counts =
            crossing_counts_by_depth(&ones(), 1e4, 1e-2, &[1e-3, 5e-5, 1e-5], 1e-3, TermBudget::default())
                .unwrap();
        assert_eq!(counts, vec![0, 1, 1]);
    }

    #[test]
    fn bad_inputs() {
        let s = ones();
        assert!(matches!(
            find_crossings(&s, &CrossingSearch::by_depth(0.0, 0.01, 0.1, 1e-3)),
            Err(CrossingError::Window(..))
        ));
        assert!(matches!(
            find_crossings(&s, &CrossingSearch::by_depth(0.0, 0.1, 0.01, 0.0)),
            Err(CrossingError::Tolerance(_))
        ));
        for depths in [&[][..], &[1e-3, 1e-2][..], &[1e-3, 1e-3][..], &[0.5][..]] {
            assert_eq!(
                crossing_counts_by_depth(&s, 0.0, 0.1, depths, 1e-3, TermBudget::default()),
                Err(CrossingError::Depths)
            );
        }
    }

    #[test]
    fn truncation_flagged() {
        let m = CoefficientModel::from_integers(&[-1, 1]).unwrap();
        let s = SequenceStream::new(m, 11, 0);
        let mut search = CrossingSearch::by_depth(0.0, 0.5, 1e-4, 1e-3);
        let full = find_crossings(&s, &search).unwrap();
        if full.brackets.len() >= 2 {
            search.max_brackets = 1;
            let cut = find_crossings(&s, &search).unwrap();
            assert!(cut.truncated);
            assert_eq!(cut.brackets, full.brackets[..1]);
        }
        assert!(!full.truncated);
    }

    #[test]
    fn random_brackets_are_certified_and_disjoint() {
        let m = CoefficientModel::from_integers(&[-1, 1]).unwrap();
        for i in 0..5 {
            let s = SequenceStream::new(m.clone(), 2, i);
            let search = CrossingSearch::by_depth(0.0, 0.1, 1e-4, 1e-3);
            let r = find_crossings(&s, &search).unwrap();
            for w in r.brackets.windows(2) {
                assert!(w[0].b <= w[1].a);
            }
            for b in &r.brackets {
                let fa = eval_to_eps(&s, b.a, b.eps_a, TermBudget::default()).unwrap();
                let fb = eval_to_eps(&s, b.b, b.eps_b, TermBudget::default()).unwrap();
                assert_eq!(CertifiedSign::of(&fa, 0.0), b.sign_at_a);
                assert_eq!(CertifiedSign::of(&fb, 0.0), b.sign_at_b());
            }
        }
    }
}
