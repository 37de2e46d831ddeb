//! Explicit cylinder witnesses for the category statements.
//!
//! When `D` has a positive element, any prefix `b_1..b_j` extends to a
//! cylinder on which `sup_{0<x<1} f(x) > m`: pad with `max D` up to `N` and
//! pick `x` close enough to `1` that even an all-`min D` tail cannot pull the
//! value below `m`. When `D` has one sign, fixing a nonzero coordinate past
//! `max(j, m)` keeps the cylinder away from sequences vanishing from `m` on.

use num_traits::ToPrimitive;
use serde::Serialize;
use thiserror::Error;

use crate::coefficients::{CoefficientModel, CoefficientSource, FinitePrefix, SplicedSource};
use crate::rational::format_rational;

/// Default grid size `2^16` for [`prefix_infimum`].
pub const DEFAULT_GRID_LOG2: u32 = 16;

/// Relative margin applied to floating-point geometric sums.
const SUM_MARGIN: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WitnessError {
    #[error("max D = {0} is not positive, so no positive witness exists")]
    NoPositiveValue(String),
    #[error("D has both positive and negative values")]
    MixedSigns,
    #[error("no x = 1 - 2^-t with t <= {0} satisfies the search inequality")]
    SearchExhausted(u32),
    #[error("certificate failed with margin {0}")]
    CertificateFailed(f64),
    #[error("target must be finite, got {0}")]
    Target(f64),
}

/// Certified lower bound for `inf_{0<x<1} sum_{n<=j} b_n x^n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrefixInfimum {
    pub prefix: Vec<String>,
    /// Smallest computed grid value.
    pub estimate: f64,
    pub argmin: f64,
    pub lower_bound: f64,
    pub grid_log2: u32,
    /// `sum n |b_n|`, a Lipschitz constant on `[0, 1]`.
    pub lipschitz: f64,
    /// Bound on the floating-point error of each grid evaluation.
    pub eval_error: f64,
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &b| acc * x + b) * x
}

/// [`prefix_infimum_with_grid`] at the default grid size.
pub fn prefix_infimum(prefix: &FinitePrefix) -> PrefixInfimum {
    prefix_infimum_with_grid(prefix, DEFAULT_GRID_LOG2)
}

/// Grid minimum on `i / G`, `G = 2^grid_log2`, minus Lipschitz and rounding slack.
///
/// The bound is the best of the bounds from every dyadic subgrid, so it can
/// only grow when the grid is refined.
pub fn prefix_infimum_with_grid(prefix: &FinitePrefix, grid_log2: u32) -> PrefixInfimum {
    let coeffs: Vec<f64> = prefix.values_f64().collect();
    let j = coeffs.len();
    let abs_sum: f64 = coeffs.iter().map(|b| b.abs()).sum();
    let lipschitz: f64 = coeffs
        .iter()
        .enumerate()
        .map(|(n, b)| (n as f64 + 1.0) * b.abs())
        .sum::<f64>()
        * (1.0 + 4.0 * j as f64 * f64::EPSILON);
    // Horner error plus one rounding per stored coefficient.
    let eval_error = ((2 * j + 3) as f64 * f64::EPSILON * abs_sum * 1.01).next_up() + f64::MIN_POSITIVE;

    let g = 1u64 << grid_log2;
    let values: Vec<f64> = (0..=g).map(|i| horner(&coeffs, i as f64 / g as f64)).collect();
    let (argmin_i, estimate) = values
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("grid is nonempty");

    let mut lower_bound = f64::NEG_INFINITY;
    for level in 0..=grid_log2 {
        let step = 1usize << (grid_log2 - level);
        let sub_g = (1u64 << level) as f64;
        let min = values.iter().step_by(step).copied().fold(f64::INFINITY, f64::min);
        let bound = (min - lipschitz / (2.0 * sub_g) - eval_error).next_down();
        lower_bound = lower_bound.max(bound);
    }
    PrefixInfimum {
        prefix: prefix.value_strings(),
        estimate,
        argmin: argmin_i as f64 / g as f64,
        lower_bound: lower_bound.min(estimate - eval_error),
        grid_log2,
        lipschitz,
        eval_error,
    }
}

/// A cylinder on which `sup_{0<x<1} f(x) > m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositiveWitness {
    pub prefix: Vec<String>,
    pub target: f64,
    pub r_lower_bound: f64,
    #[serde(rename = "M")]
    pub big_m: usize,
    /// `x = 1 - 2^-t`.
    pub t: u32,
    pub x: f64,
    /// Positions `j+1..=N` carry `max D`.
    #[serde(rename = "N")]
    pub n: usize,
    pub max_d: String,
    pub min_d: String,
    /// Certified lower bound of `f(x)` over the whole cylinder.
    pub certificate: f64,
    /// `certificate - target`.
    pub margin: f64,
}

impl PositiveWitness {
    /// The fixed coordinates `b_1..b_j, max D, ..., max D` of length `N`.
    pub fn head(&self, model: &CoefficientModel, prefix: &FinitePrefix) -> FinitePrefix {
        let mut indices = prefix.indices().to_vec();
        indices.resize(self.n, model.max_index());
        FinitePrefix::from_trusted(model.clone(), indices)
    }
}

/// `sum_{n=lo}^{hi} x^n` for `0 < x < 1`, scaled by `1 - margin` or `1 + margin`.
fn geometric(x: f64, lo: usize, hi: usize, upward: bool) -> f64 {
    if hi < lo {
        return 0.0;
    }
    let ln_x = x.ln();
    let first = (lo as f64 * ln_x).exp();
    let span = -((hi - lo + 1) as f64 * ln_x).exp_m1();
    let s = first * span / (1.0 - x);
    if upward {
        s * (1.0 + SUM_MARGIN)
    } else {
        s * (1.0 - SUM_MARGIN)
    }
}

/// `x^{N+1} / (1 - x)`, rounded outward in the requested direction.
fn tail(x: f64, n: usize, upward: bool) -> f64 {
    let s = ((n as f64 + 1.0) * x.ln()).exp() / (1.0 - x);
    if upward {
        s * (1.0 + SUM_MARGIN)
    } else {
        s * (1.0 - SUM_MARGIN)
    }
}

/// Builds the witness for target `m` following the choice of `M`, then `x`, then `N`.
pub fn witness_positive(prefix: &FinitePrefix, m: f64) -> Result<PositiveWitness, WitnessError> {
    if !m.is_finite() {
        return Err(WitnessError::Target(m));
    }
    let model = prefix.model();
    let max_exact = model.value(model.max_index());
    let min_exact = model.value(model.min_index());
    let max_d = max_exact.to_f64().unwrap_or(f64::NAN);
    let min_d = min_exact.to_f64().unwrap_or(f64::NAN);
    if max_d <= 0.0 {
        return Err(WitnessError::NoPositiveValue(format_rational(max_exact)));
    }
    // Round max D down and min D away from zero.
    let max_lo = max_d * (1.0 - SUM_MARGIN);
    let min_hi = min_d.abs() * (1.0 + SUM_MARGIN);
    let j = prefix.len();
    let r = if j == 0 { 0.0 } else { prefix_infimum(prefix).lower_bound };

    let need = (m + 1.0 - r) / max_lo + j as f64;
    let big_m = if need.is_finite() && need > j as f64 {
        need.floor() as usize + 1
    } else {
        j + 1
    };

    const MAX_T: u32 = 52;
    let (t, x) = (1..=MAX_T)
        .map(|t| (t, 1.0 - 2f64.powi(-(t as i32))))
        .find(|&(_, x)| r + max_lo * geometric(x, j + 1, big_m, false) > m + 1.0)
        .ok_or(WitnessError::SearchExhausted(MAX_T))?;

    let n = if min_d >= 0.0 {
        big_m + 1
    } else {
        let guess = ((1.0 - x) / min_hi).ln() / x.ln() - 1.0;
        let mut n = if guess.is_finite() && guess > big_m as f64 {
            (guess.ceil() as usize).saturating_sub(2).max(big_m + 1)
        } else {
            big_m + 1
        };
        while min_hi * tail(x, n, true) >= 1.0 {
            n += 1;
        }
        while n > big_m + 1 && min_hi * tail(x, n - 1, true) < 1.0 {
            n -= 1;
        }
        n
    };

    let tail_term = if min_d < 0.0 {
        -min_hi * tail(x, n, true)
    } else {
        min_d * (1.0 - SUM_MARGIN) * tail(x, n, false)
    };
    let certificate = r + max_lo * geometric(x, j + 1, n, false) + tail_term;
    let margin = certificate - m;
    if !(margin > 0.0) {
        return Err(WitnessError::CertificateFailed(margin));
    }
    Ok(PositiveWitness {
        prefix: prefix.value_strings(),
        target: m,
        r_lower_bound: r,
        big_m,
        t,
        x,
        n,
        max_d: format_rational(max_exact),
        min_d: format_rational(min_exact),
        certificate,
        margin,
    })
}

/// Sequences agreeing with fixed values at fixed positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Cylinder {
    model: CoefficientModel,
    /// `(1-based position, value index)`, ascending by position.
    fixed: Vec<(usize, u32)>,
}

impl Cylinder {
    pub fn model(&self) -> &CoefficientModel {
        &self.model
    }

    pub fn fixed(&self) -> &[(usize, u32)] {
        &self.fixed
    }

    /// Largest fixed position.
    pub fn depth(&self) -> usize {
        self.fixed.last().map_or(0, |&(p, _)| p)
    }

    pub fn contains<S: CoefficientSource + ?Sized>(&self, source: &S) -> bool {
        self.fixed
            .iter()
            .all(|&(p, idx)| source.index_at(p as u64) == idx)
    }

    /// The member that agrees with `free` off the fixed positions.
    pub fn member<S: CoefficientSource>(&self, free: S) -> SplicedSource<S> {
        let mut head: Vec<u32> = (1..=self.depth() as u64).map(|n| free.index_at(n)).collect();
        for &(p, idx) in &self.fixed {
            head[p - 1] = idx;
        }
        let head = FinitePrefix::from_trusted(self.model.clone(), head);
        SplicedSource::new(&head, free)
    }
}

/// Whether `a_n = 0` for every `m <= n <= horizon`.
///
/// A `false` answer proves the sequence is outside the set of sequences
/// vanishing from index `m` on.
pub fn vanishes_from<S: CoefficientSource + ?Sized>(source: &S, m: usize, horizon: usize) -> bool {
    let model = source.model();
    (m.max(1)..=horizon).all(|n| model.value_f64(source.index_at(n as u64)) == 0.0)
}

/// Fixes the prefix and a nonzero value at position `max(j, m) + 1`.
pub fn witness_nonzero_coordinate(prefix: &FinitePrefix, m: usize) -> Result<Cylinder, WitnessError> {
    let model = prefix.model();
    if !(model.all_nonnegative() || model.all_nonpositive()) {
        return Err(WitnessError::MixedSigns);
    }
    let nonzero = (0..model.k() as u32)
        .find(|&i| model.value_f64(i) != 0.0)
        .expect("k >= 2 distinct values include a nonzero one");
    let mut fixed: Vec<(usize, u32)> = prefix
        .indices()
        .iter()
        .enumerate()
        .map(|(n, &i)| (n + 1, i))
        .collect();
    fixed.push((prefix.len().max(m) + 1, nonzero));
    Ok(Cylinder {
        model: model.clone(),
        fixed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{sample_prefix, PeriodicSource, SequenceStream};
    use crate::series_eval::{eval_to_eps, TermBudget};
    use proptest::prelude::*;

    fn pm1() -> CoefficientModel {
        CoefficientModel::from_integers(&[-1, 1]).unwrap()
    }

    fn prefix(m: &CoefficientModel, s: &str) -> FinitePrefix {
        FinitePrefix::parse(m.clone(), s).unwrap()
    }

    #[test]
    fn infimum_examples() {
        let m = CoefficientModel::from_integers(&[-2, -1, 0, 1]).unwrap();
        let r = prefix_infimum(&prefix(&m, "1"));
        assert!(r.lower_bound <= 0.0 && 0.0 <= r.estimate + 1e-4);
        let r = prefix_infimum(&prefix(&m, "-1"));
        assert_eq!(r.estimate, -1.0);
        assert_eq!(r.argmin, 1.0);
        assert!(r.lower_bound < -1.0 && r.lower_bound > -1.0 - 1e-4);
        // x - 2x^2 has a maximum at 1/4 and its infimum at the right end.
        let r = prefix_infimum(&prefix(&m, "1,-2"));
        assert_eq!(r.estimate, -1.0);
        assert!(r.lower_bound <= -1.0 && r.lower_bound > -1.0 - 1e-4);
    }

    #[test]
    fn finer_grid_never_lowers_bound() {
        let m = pm1();
        for i in 0..20 {
            let p = sample_prefix(&SequenceStream::new(m.clone(), 4, i), 12);
            let mut last = f64::NEG_INFINITY;
            for g in 2..=14 {
                let r = prefix_infimum_with_grid(&p, g);
                assert!(r.lower_bound >= last);
                last = r.lower_bound;
            }
        }
    }

    #[test]
    fn positive_witness_pm1() {
        let m = pm1();
        let p = prefix(&m, "1");
        let w = witness_positive(&p, 1.0).unwrap();
        assert!(w.big_m > 1 && w.n > w.big_m);
        assert!(w.margin > 0.0);
        let head = w.head(&m, &p);
        let tail = PeriodicSource::new(m.clone(), vec![m.min_index()]).unwrap();
        let adversarial = SplicedSource::new(&head, tail);
        let v = eval_to_eps(&adversarial, w.x, 1e-6, TermBudget::default()).unwrap();
        assert!(v.lower() > 1.0);
    }

    #[test]
    fn zero_min_uses_m_plus_one() {
        let m = CoefficientModel::from_integers(&[0, 1]).unwrap();
        let w = witness_positive(&prefix(&m, "0,0,1"), 5.0).unwrap();
        assert_eq!(w.n, w.big_m + 1);
    }

    #[test]
    fn tiny_target_uses_minimal_m() {
        let m = pm1();
        let w = witness_positive(&prefix(&m, "1,1"), -10.0).unwrap();
        assert_eq!(w.big_m, 3);
    }

    #[test]
    fn no_positive_value() {
        let m = CoefficientModel::from_integers(&[-2, -1, 0]).unwrap();
        assert!(matches!(
            witness_positive(&prefix(&m, "-1"), 1.0),
            Err(WitnessError::NoPositiveValue(s)) if s == "0"
        ));
        assert!(matches!(
            witness_positive(&prefix(&pm1(), "1"), f64::NAN),
            Err(WitnessError::Target(_))
        ));
    }

    #[test]
    fn nonzero_coordinate_positions() {
        let m = CoefficientModel::from_integers(&[0, 1]).unwrap();
        let c = witness_nonzero_coordinate(&prefix(&m, "1,0"), 5).unwrap();
        assert_eq!(c.fixed().last(), Some(&(6, 1)));
        let c = witness_nonzero_coordinate(&prefix(&m, "0,0,0,0,0,0,1"), 3).unwrap();
        assert_eq!(c.fixed().last(), Some(&(8, 1)));
        assert_eq!(
            witness_nonzero_coordinate(&prefix(&pm1(), "1"), 3),
            Err(WitnessError::MixedSigns)
        );
    }

    #[test]
    fn cylinder_members_avoid_vanishing_set() {
        let m = CoefficientModel::from_integers(&[0, 1]).unwrap();
        let c = witness_nonzero_coordinate(&prefix(&m, "1,0,0"), 4).unwrap();
        for i in 0..100 {
            let member = c.member(SequenceStream::new(m.clone(), 9, i));
            assert!(c.contains(&member));
            assert!(!vanishes_from(&member, 4, c.depth()));
        }
        let zeros = PeriodicSource::new(m, vec![0]).unwrap();
        assert!(vanishes_from(&zeros, 4, 100));
        assert!(!c.contains(&zeros));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn infimum_below_samples(seed in any::<u64>(), j in 1usize..12, xs in prop::collection::vec(0.0f64..1.0, 50)) {
            let m = CoefficientModel::from_integers(&[-3, -1, 0, 2]).unwrap();
            let p = sample_prefix(&SequenceStream::new(m, seed, 0), j);
            let r = prefix_infimum_with_grid(&p, 10);
            prop_assert!(r.lower_bound <= r.estimate);
            let coeffs: Vec<f64> = p.values_f64().collect();
            for x in xs {
                prop_assert!(r.lower_bound <= horner(&coeffs, x));
            }
        }

        #[test]
        fn witness_survives_random_tails(seed in any::<u64>(), j in 1usize..8, target in prop::sample::select(vec![1.0, 10.0, 50.0])) {
            let m = pm1();
            let p = sample_prefix(&SequenceStream::new(m.clone(), seed, 0), j);
            let w = witness_positive(&p, target).unwrap();
            let head = w.head(&m, &p);
            let member = SplicedSource::new(&head, SequenceStream::new(m.clone(), seed, 1));
            let v = eval_to_eps(&member, w.x, 1e-6, TermBudget::default()).unwrap();
            prop_assert!(v.lower() > target);
        }
    }
}
