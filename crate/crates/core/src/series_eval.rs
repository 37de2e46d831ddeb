//! Truncated evaluation of `f(x) = sum_{n>=1} a_n x^n` with a certified enclosure.
//!
//! The first `N` terms are summed in ascending order with the power updated
//! multiplicatively and Neumaier-compensated accumulation. The enclosure
//! combines two parts:
//!
//! * the geometric tail radius `max|d| * x^(N+1) / (1 - x)`, valid for every
//!   continuation of the sequence, and
//! * a rounding slack `4 N eps_mach * sum_{n<=N} |a_n| x^n` covering the power
//!   recurrence, the products and the summation.
//!
//! Both are inflated upward, so `[value - r, value + r]` with
//! `r = tail_radius + rounding_slack` contains the exact real value.

use std::env;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::Serialize;
use thiserror::Error;

use crate::coefficients::{CoefficientSource, FinitePrefix};

pub const DEFAULT_TERM_BUDGET: u64 = 50_000_000;

/// Environment variable that overrides the default term budget.
pub const TERM_BUDGET_ENV: &str = "RPSERIES_TERM_BUDGET";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("x = {0} is outside [0, 1)")]
    Domain(f64),
    #[error("tail tolerance must be positive and finite, got {0}")]
    Tolerance(f64),
    #[error("a truncation needs at least one term")]
    ZeroTerms,
    #[error("{required} terms are needed at x = {x} but the budget is {budget}")]
    BudgetExceeded { x: f64, required: u64, budget: u64 },
}

/// Maximum number of terms a single evaluation may sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TermBudget(pub u64);

impl Default for TermBudget {
    fn default() -> Self {
        TermBudget(DEFAULT_TERM_BUDGET)
    }
}

impl TermBudget {
    /// The default budget, overridden by `RPSERIES_TERM_BUDGET` when it parses.
    pub fn from_env() -> Self {
        env::var(TERM_BUDGET_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<f64>().ok())
            .filter(|v| v.is_finite() && *v >= 1.0)
            .map(|v| TermBudget(v as u64))
            .unwrap_or_default()
    }

    fn check(self, x: f64, required: u64) -> Result<(), EvalError> {
        if required > self.0 {
            Err(EvalError::BudgetExceeded {
                x,
                required,
                budget: self.0,
            })
        } else {
            Ok(())
        }
    }
}

/// Truncated series value with a two-sided certified radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundedValue {
    pub x: f64,
    /// Number of summed terms `N`.
    pub terms: u64,
    pub value: f64,
    pub tail_radius: f64,
    pub rounding_slack: f64,
}

impl BoundedValue {
    pub fn radius(&self) -> f64 {
        (self.tail_radius + self.rounding_slack).next_up()
    }

    /// Certified lower bound on the full series.
    pub fn lower(&self) -> f64 {
        (self.value - self.radius()).next_down()
    }

    /// Certified upper bound on the full series.
    pub fn upper(&self) -> f64 {
        (self.value + self.radius()).next_up()
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower() <= v && v <= self.upper()
    }

    pub fn intersects(&self, other: &BoundedValue) -> bool {
        self.lower() <= other.upper() && other.lower() <= self.upper()
    }
}

fn check_x(x: f64) -> Result<(), EvalError> {
    if (0.0..1.0).contains(&x) {
        Ok(())
    } else {
        Err(EvalError::Domain(x))
    }
}

/// Running state of one evaluation point.
#[derive(Debug, Clone)]
pub(crate) struct PointSum {
    x: f64,
    /// `x^(n+1)` after `n` terms.
    power: f64,
    terms: u64,
    sum: f64,
    compensation: f64,
    abs_sum: f64,
}

impl PointSum {
    pub(crate) fn new(x: f64) -> Self {
        Self {
            x,
            power: x,
            terms: 0,
            sum: 0.0,
            compensation: 0.0,
            abs_sum: 0.0,
        }
    }

    #[inline]
    pub(crate) fn push(&mut self, a: f64) {
        let t = a * self.power;
        let s = self.sum + t;
        if self.sum.abs() >= t.abs() {
            self.compensation += (self.sum - s) + t;
        } else {
            self.compensation += (t - s) + self.sum;
        }
        self.sum = s;
        self.abs_sum += t.abs();
        self.power *= self.x;
        self.terms += 1;
    }

    pub(crate) fn tail_radius(&self, max_abs: f64) -> f64 {
        if self.power == 0.0 && self.x == 0.0 {
            return 0.0;
        }
        let n = self.terms as f64;
        // x^(N+1) carries at most (N+1) roundings, 1 - x at most one, plus the
        // product and quotient; the factor below dominates all of them.
        let raw = max_abs * self.power / (1.0 - self.x);
        let inflated = raw * (1.0 + 4.0 * (n + 4.0) * f64::EPSILON);
        // Subnormal powers lose relative accuracy; keep an absolute floor.
        (inflated + 4.0 * max_abs * f64::from_bits(1) / (1.0 - self.x)).next_up()
    }

    fn rounding_slack(&self) -> f64 {
        let n = self.terms as f64;
        let rel = 4.0 * n * f64::EPSILON * (1.0 + (n + 2.0) * f64::EPSILON);
        (rel * self.abs_sum + 4.0 * n * f64::from_bits(1)).next_up()
    }

    pub(crate) fn finish(&self, max_abs: f64) -> BoundedValue {
        BoundedValue {
            x: self.x,
            terms: self.terms,
            value: self.sum + self.compensation,
            tail_radius: self.tail_radius(max_abs),
            rounding_slack: self.rounding_slack(),
        }
    }

    /// Enclosure of the finite polynomial itself, with no tail.
    pub(crate) fn finish_polynomial(&self) -> BoundedValue {
        BoundedValue {
            x: self.x,
            terms: self.terms,
            value: self.sum + self.compensation,
            tail_radius: 0.0,
            rounding_slack: self.rounding_slack(),
        }
    }
}

/// Smallest `N >= 1` with `max_abs * x^(N+1) / (1 - x) <= eps`, from the closed form.
///
/// Saturates at `u64::MAX` when the answer does not fit.
pub fn required_terms(max_abs: f64, x: f64, eps: f64) -> u64 {
    if x == 0.0 || max_abs == 0.0 {
        return 1;
    }
    let target = (eps * (1.0 - x) / max_abs).ln() / x.ln();
    if !target.is_finite() {
        return u64::MAX;
    }
    let n = target.ceil() - 1.0;
    if n < 1.0 {
        1
    } else if n >= u64::MAX as f64 {
        u64::MAX
    } else {
        n as u64
    }
}

/// Sums exactly `n` terms at `x`.
pub fn eval_truncated<S: CoefficientSource + ?Sized>(
    source: &S,
    x: f64,
    n: u64,
) -> Result<BoundedValue, EvalError> {
    check_x(x)?;
    if n == 0 {
        return Err(EvalError::ZeroTerms);
    }
    let model = source.model();
    let values = model.values_f64();
    let mut acc = PointSum::new(x);
    for idx in source.indices().take(n as usize) {
        acc.push(values[idx as usize]);
    }
    Ok(acc.finish(model.max_abs()))
}

/// One evaluation point for [`eval_many`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalRequest {
    pub x: f64,
    /// Required bound on the tail radius.
    pub eps: f64,
    /// Sum at least this many terms even if the tolerance is met earlier.
    pub min_terms: u64,
}

impl EvalRequest {
    pub fn new(x: f64, eps: f64) -> Self {
        Self {
            x,
            eps,
            min_terms: 1,
        }
    }
}

/// Failure of one point inside a multi-point evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("evaluation point {index}: {error}")]
pub struct PointError {
    pub index: usize,
    #[source]
    pub error: EvalError,
}

/// Evaluates to tail tolerance `eps`, choosing the minimal truncation.
pub fn eval_to_eps<S: CoefficientSource + ?Sized>(
    source: &S,
    x: f64,
    eps: f64,
    budget: TermBudget,
) -> Result<BoundedValue, EvalError> {
    eval_many(source, &[EvalRequest::new(x, eps)], budget)
        .map(|mut v| v.pop().expect("one request"))
        .map_err(|e| e.error)
}

/// Evaluates several points in one pass over the coefficients.
///
/// Each point is summed exactly as [`eval_to_eps`] would sum it on its own, so
/// the results are bit-identical to independent evaluations; only the
/// coefficient stream is shared.
pub fn eval_many<S: CoefficientSource + ?Sized>(
    source: &S,
    requests: &[EvalRequest],
    budget: TermBudget,
) -> Result<Vec<BoundedValue>, PointError> {
    let model = source.model();
    let max_abs = model.max_abs();
    let mut planned = Vec::with_capacity(requests.len());
    for (index, r) in requests.iter().enumerate() {
        let fail = |error| PointError { index, error };
        check_x(r.x).map_err(fail)?;
        if !(r.eps > 0.0 && r.eps.is_finite()) {
            return Err(fail(EvalError::Tolerance(r.eps)));
        }
        let n = required_terms(max_abs, r.x, r.eps).max(r.min_terms).max(1);
        budget.check(r.x, n).map_err(fail)?;
        planned.push(n);
    }
    if requests.is_empty() {
        return Ok(Vec::new());
    }

    let values = model.values_f64();
    let mut sums: Vec<PointSum> = requests.iter().map(|r| PointSum::new(r.x)).collect();
    let mut active: Vec<usize> = (0..requests.len()).collect();
    let mut indices = source.indices();
    while !active.is_empty() {
        let a = values[indices.next().expect("coefficient sources are infinite") as usize];
        let mut i = 0;
        while i < active.len() {
            let p = active[i];
            let acc = &mut sums[p];
            acc.push(a);
            let done = acc.terms >= planned[p] && acc.tail_radius(max_abs) <= requests[p].eps;
            if done {
                active.swap_remove(i);
            } else {
                if acc.terms >= planned[p] {
                    // The closed form was off by rounding; take one more term.
                    budget.check(requests[p].x, acc.terms + 1).map_err(|error| PointError {
                        index: p,
                        error,
                    })?;
                }
                i += 1;
            }
        }
    }
    Ok(sums.iter().map(|s| s.finish(max_abs)).collect())
}

/// Enclosure of the finite polynomial `sum_{n<=N} a_n x^n` (no tail), for `0 <= x <= 1`.
pub fn eval_polynomial(prefix: &FinitePrefix, x: f64) -> Result<BoundedValue, EvalError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(EvalError::Domain(x));
    }
    let mut acc = PointSum::new(x);
    for a in prefix.values_f64() {
        acc.push(a);
    }
    Ok(acc.finish_polynomial())
}

/// Partial sums `S_l = a_1 + ... + a_l`, exact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialSumVector {
    /// `S_l` times the model's common denominator.
    scaled: Vec<i128>,
    scale: BigInt,
}

impl PartialSumVector {
    pub fn from_prefix(prefix: &FinitePrefix) -> Self {
        let model = prefix.model();
        let mut running = 0i128;
        let scaled = prefix
            .indices()
            .iter()
            .map(|&i| {
                running += model.scaled(i);
                running
            })
            .collect();
        Self {
            scaled,
            scale: model.scale().clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.scaled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scaled.is_empty()
    }

    /// `S_l` for `1 <= l <= N`; `S_0 = 0`.
    pub fn get(&self, l: usize) -> BigRational {
        let s = if l == 0 { 0 } else { self.scaled[l - 1] };
        BigRational::new(s.into(), self.scale.clone())
    }

    pub fn scaled(&self) -> &[i128] {
        &self.scaled
    }

    pub fn to_f64(&self) -> Vec<f64> {
        let scale = self.scale.to_f64().unwrap_or(f64::INFINITY);
        self.scaled.iter().map(|&s| s as f64 / scale).collect()
    }
}

/// `sum_{n<=N} S_n (x^n - x^(n+1)) + S_N x^(N+1)`, the partial-summation form
/// of the truncated series.
pub fn eval_abel_form(prefix: &FinitePrefix, x: f64) -> f64 {
    let sums = PartialSumVector::from_prefix(prefix).to_f64();
    let one_minus_x = 1.0 - x;
    let mut acc = PointSum::new(1.0);
    let mut power = x;
    for &s in &sums {
        acc.push(s * power * one_minus_x);
        power *= x;
    }
    if let Some(&last) = sums.last() {
        acc.push(last * power);
    }
    acc.finish_polynomial().value
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WalkError {
    #[error("partial sum S_{index} does not exceed m * min D")]
    Violated { index: usize },
    #[error("x = {0} is outside (0, 1)")]
    Domain(f64),
}

/// Certified lower bound for a prefix whose partial sums stay above `m * min D`.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkBound {
    /// The level `K = m * min D`, exact.
    pub level: BigRational,
    /// `K * x`.
    pub bound: f64,
}

/// If every `S_l > m * min D`, the truncated series exceeds `m * min D * x`.
pub fn lower_bound_from_positive_walk(
    prefix: &FinitePrefix,
    x: f64,
    m: i64,
) -> Result<WalkBound, WalkError> {
    if !(x > 0.0 && x < 1.0) {
        return Err(WalkError::Domain(x));
    }
    let model = prefix.model();
    let min_scaled = model.scaled(model.min_index());
    let level_scaled = min_scaled * m as i128;
    let sums = PartialSumVector::from_prefix(prefix);
    if let Some(pos) = sums.scaled().iter().position(|&s| s <= level_scaled) {
        return Err(WalkError::Violated { index: pos + 1 });
    }
    let level = BigRational::from_integer(m.into()) * model.value(model.min_index());
    let bound = level.to_f64().unwrap_or(f64::NAN) * x;
    Ok(WalkBound { level, bound })
}
