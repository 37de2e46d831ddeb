//! The cyclic relabelling `d_j -> d_{j+1}` of the coefficient set and its orbit identity.
//!
//! Summing the `k` relabelled series termwise turns every coefficient into
//! `d_1 + ... + d_k`. When that sum is zero the orbit values add up to zero,
//! so at each `x` some member is nonnegative and some member is nonpositive.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::coefficients::{CoefficientModel, FinitePrefix};
use crate::rational::format_rational;
use crate::series_eval::{eval_polynomial, BoundedValue, EvalError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SymmetryError {
    #[error("coefficient values sum to {0}, not zero")]
    NonZeroSum(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// `p(d_j) = d_{j+1}` for `j < k` and `p(d_k) = d_1`, in listing order.
#[derive(Debug, Clone, PartialEq)]
pub struct CyclicPermutation {
    model: CoefficientModel,
}

impl CyclicPermutation {
    pub fn new(model: CoefficientModel) -> Self {
        Self { model }
    }

    pub fn model(&self) -> &CoefficientModel {
        &self.model
    }

    /// Image of value index `index` under `p^j`.
    pub fn apply_index(&self, index: u32, j: usize) -> u32 {
        let k = self.model.k();
        ((index as usize + j % k) % k) as u32
    }
}

/// Applies `p` `j` times to every coordinate; `j` is taken modulo `k`.
pub fn apply_perm(prefix: &FinitePrefix, j: usize) -> FinitePrefix {
    let p = CyclicPermutation::new(prefix.model().clone());
    let indices = prefix.indices().iter().map(|&i| p.apply_index(i, j)).collect();
    FinitePrefix::from_trusted(prefix.model().clone(), indices)
}

/// Enclosures of the `k` truncated orbit members at `x`, in order `j = 0..k`.
pub fn orbit_values(prefix: &FinitePrefix, x: f64) -> Result<Vec<BoundedValue>, EvalError> {
    (0..prefix.model().k())
        .into_par_iter()
        .map(|j| eval_polynomial(&apply_perm(prefix, j), x))
        .collect()
}

/// `sum_j f_{p^j(a)}(x)` over the truncated orbit.
pub fn orbit_sum(prefix: &FinitePrefix, x: f64) -> Result<f64, EvalError> {
    Ok(orbit_values(prefix, x)?.iter().map(|v| v.value).sum())
}

/// `(sum_j d_j) (x - x^{N+1}) / (1 - x)`, the value the orbit sum must equal.
pub fn orbit_sum_expected(model: &CoefficientModel, n: usize, x: f64) -> f64 {
    let total: f64 = model.values_f64().iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    if x == 1.0 {
        return total * n as f64;
    }
    // x (1 - x^N) / (1 - x), with 1 - x^N from expm1 to keep it accurate near 1.
    let one_minus_pow = -(n as f64 * x.ln()).exp_m1();
    total * x * one_minus_pow / (1.0 - x)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitCheck {
    pub x: f64,
    pub n: usize,
    pub value_sum: String,
    pub members: Vec<BoundedValue>,
    pub orbit_sum: f64,
    pub expected: f64,
    /// Combined rounding slack of the members.
    pub slack: f64,
    /// Indices `(nonnegative, nonpositive)` when the values sum to zero.
    pub sign_witness: Option<(usize, usize)>,
}

/// Evaluates the orbit at `x` and compares it with the closed form.
pub fn orbit_check(prefix: &FinitePrefix, x: f64) -> Result<OrbitCheck, EvalError> {
    let members = orbit_values(prefix, x)?;
    let zero_sum = prefix.model().value_sum_is_zero();
    Ok(OrbitCheck {
        x,
        n: prefix.len(),
        value_sum: format_rational(&prefix.model().values().iter().sum()),
        orbit_sum: members.iter().map(|v| v.value).sum(),
        expected: orbit_sum_expected(prefix.model(), prefix.len(), x),
        slack: members.iter().map(|v| v.radius()).sum(),
        sign_witness: zero_sum.then(|| pick_witness(&members)),
        members,
    })
}

fn pick_witness(members: &[BoundedValue]) -> (usize, usize) {
    let by = |key: fn(&BoundedValue) -> f64| {
        move |a: &(usize, &BoundedValue), b: &(usize, &BoundedValue)| key(a.1).total_cmp(&key(b.1))
    };
    let nonneg = members.iter().enumerate().max_by(by(|v| v.upper())).map(|(i, _)| i);
    let nonpos = members.iter().enumerate().min_by(by(|v| v.lower())).map(|(i, _)| i);
    (nonneg.unwrap_or(0), nonpos.unwrap_or(0))
}

/// Orbit indices whose enclosures reach `>= 0` and `<= 0` respectively.
///
/// A member counts as nonnegative when its certified upper bound is `>= 0`
/// and as nonpositive when its certified lower bound is `<= 0`.
pub fn sign_witness(prefix: &FinitePrefix, x: f64) -> Result<(usize, usize), SymmetryError> {
    let model = prefix.model();
    if !model.value_sum_is_zero() {
        let total: num_rational::BigRational = model.values().iter().sum();
        return Err(SymmetryError::NonZeroSum(format_rational(&total)));
    }
    let members = orbit_values(prefix, x)?;
    let (nonneg, nonpos) = pick_witness(&members);
    debug_assert!(members[nonneg].upper() >= 0.0 && members[nonpos].lower() <= 0.0);
    Ok((nonneg, nonpos))
}
