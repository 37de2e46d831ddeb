//! Coefficient sets, probability weights and reproducible coefficient streams.
//!
//! A [`CoefficientModel`] is the finite value set `d_1, ..., d_k` (kept in the
//! order the user listed it) together with positive weights summing to one.
//! Values are stored exactly; the `f64` mirrors are only used for series
//! evaluation. Everything that branches on a sign (the mean, sum shifts)
//! is decided in exact arithmetic.
//!
//! Coefficients are always handled as *value indices* into the model, so a
//! sequence is a stream of small integers and the exact or float value is a
//! table lookup away.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::Serialize;
use thiserror::Error;

use crate::rational::{format_rational, parse_rational_list};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("a coefficient set needs at least two values, got {0}")]
    TooFewValues(usize),
    #[error("coefficient value {0} is listed twice")]
    DuplicateValue(String),
    #[error("cannot parse {0:?} as an exact number")]
    Parse(String),
    #[error("expected {expected} weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("weight {0} is not positive")]
    NonPositiveWeight(String),
    #[error("weights sum to {0}, not 1")]
    WeightSum(String),
    #[error("coefficient values are too fine-grained for exact integer scaling")]
    ScaleOverflow,
    #[error("value index {index} is out of range for a set of {k} values")]
    IndexOutOfRange { index: u32, k: usize },
    #[error("value {0} is not in the coefficient set")]
    NotInSet(String),
}

/// Three-way classification of the coefficient mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum MeanSign {
    Positive,
    Zero,
    Negative,
}

#[derive(Debug)]
struct ModelInner {
    values: Vec<BigRational>,
    floats: Vec<f64>,
    weights: Vec<BigRational>,
    uniform: bool,
    /// `floor(W_j * 2^64)` for the cumulative weights `W_j`; the last entry is `2^64`.
    thresholds: Vec<u128>,
    /// Common denominator of all values.
    scale: BigInt,
    /// `d_j * scale`, exact.
    scaled: Vec<i128>,
    max_abs: f64,
}

/// The finite coefficient set with its sampling weights.
///
/// Cheap to clone; the data is shared and immutable.
#[derive(Clone)]
pub struct CoefficientModel {
    inner: Arc<ModelInner>,
}

impl fmt::Debug for CoefficientModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientModel")
            .field("values", &self.value_strings())
            .field("weights", &self.weight_strings())
            .finish()
    }
}

impl PartialEq for CoefficientModel {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.values == other.inner.values
                && self.inner.weights == other.inner.weights)
    }
}

impl CoefficientModel {
    /// Builds a model from exact values; `weights = None` means uniform.
    pub fn new(
        values: Vec<BigRational>,
        weights: Option<Vec<BigRational>>,
    ) -> Result<Self, ModelError> {
        let k = values.len();
        if k < 2 {
            return Err(ModelError::TooFewValues(k));
        }
        for (i, v) in values.iter().enumerate() {
            if values[..i].contains(v) {
                return Err(ModelError::DuplicateValue(format_rational(v)));
            }
        }
        let uniform_weight = BigRational::new(BigInt::one(), BigInt::from(k));
        let (weights, uniform) = match weights {
            None => (vec![uniform_weight; k], true),
            Some(w) => {
                if w.len() != k {
                    return Err(ModelError::WeightCount {
                        expected: k,
                        got: w.len(),
                    });
                }
                if let Some(bad) = w.iter().find(|p| !p.is_positive()) {
                    return Err(ModelError::NonPositiveWeight(format_rational(bad)));
                }
                let total: BigRational = w.iter().sum();
                if !total.is_one() {
                    return Err(ModelError::WeightSum(format_rational(&total)));
                }
                let uniform = w.iter().all(|p| *p == uniform_weight);
                (w, uniform)
            }
        };

        let two64: BigInt = BigInt::one() << 64usize;
        let mut cumulative = BigRational::zero();
        let mut thresholds = Vec::with_capacity(k);
        for (j, p) in weights.iter().enumerate() {
            cumulative += p;
            let t = if j + 1 == k {
                1u128 << 64
            } else {
                (&cumulative * BigRational::from_integer(two64.clone()))
                    .floor()
                    .to_integer()
                    .to_u128()
                    .expect("cumulative weight below one")
            };
            thresholds.push(t);
        }

        let scale = values
            .iter()
            .fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
        let scaled = values
            .iter()
            .map(|v| (v * BigRational::from_integer(scale.clone())).to_integer().to_i128())
            .collect::<Option<Vec<_>>>()
            .ok_or(ModelError::ScaleOverflow)?;
        // Leave headroom for sums of many coefficients.
        if scaled.iter().any(|s| s.unsigned_abs() > (1u128 << 80)) {
            return Err(ModelError::ScaleOverflow);
        }

        let floats: Vec<f64> = values
            .iter()
            .map(|v| v.to_f64().unwrap_or(f64::NAN))
            .collect();
        let max_abs = floats.iter().fold(0.0f64, |m, v| m.max(v.abs()));

        Ok(Self {
            inner: Arc::new(ModelInner {
                values,
                floats,
                weights,
                uniform,
                thresholds,
                scale,
                scaled,
                max_abs,
            }),
        })
    }

    /// Parses `--set "-1,1"` / `--weights "1/4,3/4"` style specifications.
    pub fn parse(set: &str, weights: Option<&str>) -> Result<Self, ModelError> {
        let values = parse_rational_list(set)?;
        let weights = weights.map(parse_rational_list).transpose()?;
        Self::new(values, weights)
    }

    /// Uniform model over integer values, mostly for tests and examples.
    pub fn from_integers(values: &[i64]) -> Result<Self, ModelError> {
        Self::new(
            values.iter().map(|&v| BigRational::from_integer(v.into())).collect(),
            None,
        )
    }

    pub fn k(&self) -> usize {
        self.inner.values.len()
    }

    pub fn value(&self, index: u32) -> &BigRational {
        &self.inner.values[index as usize]
    }

    pub fn values(&self) -> &[BigRational] {
        &self.inner.values
    }

    pub fn value_f64(&self, index: u32) -> f64 {
        self.inner.floats[index as usize]
    }

    pub fn values_f64(&self) -> &[f64] {
        &self.inner.floats
    }

    pub fn weight(&self, index: u32) -> &BigRational {
        &self.inner.weights[index as usize]
    }

    pub fn weights(&self) -> &[BigRational] {
        &self.inner.weights
    }

    pub fn is_uniform(&self) -> bool {
        self.inner.uniform
    }

    /// `d_j` times the common denominator of all values.
    pub fn scaled(&self, index: u32) -> i128 {
        self.inner.scaled[index as usize]
    }

    /// The common denominator used by [`scaled`](Self::scaled).
    pub fn scale(&self) -> &BigInt {
        &self.inner.scale
    }

    /// `max_j |d_j|` as a float.
    pub fn max_abs(&self) -> f64 {
        self.inner.max_abs
    }

    /// Index of the smallest value.
    pub fn min_index(&self) -> u32 {
        self.extreme_index(|a, b| a < b)
    }

    /// Index of the largest value.
    pub fn max_index(&self) -> u32 {
        self.extreme_index(|a, b| a > b)
    }

    fn extreme_index(&self, better: impl Fn(&BigRational, &BigRational) -> bool) -> u32 {
        let mut best = 0usize;
        for (i, v) in self.inner.values.iter().enumerate() {
            if better(v, &self.inner.values[best]) {
                best = i;
            }
        }
        best as u32
    }

    pub fn index_of(&self, value: &BigRational) -> Option<u32> {
        self.inner
            .values
            .iter()
            .position(|v| v == value)
            .map(|i| i as u32)
    }

    /// The weighted mean `sum_j p_j d_j`, exactly.
    pub fn mean(&self) -> BigRational {
        self.inner
            .values
            .iter()
            .zip(&self.inner.weights)
            .map(|(d, p)| d * p)
            .sum()
    }

    pub fn mean_sign(&self) -> MeanSign {
        let mean = self.mean();
        if mean.is_positive() {
            MeanSign::Positive
        } else if mean.is_negative() {
            MeanSign::Negative
        } else {
            MeanSign::Zero
        }
    }

    /// Whether the plain (unweighted) sum of the values vanishes.
    pub fn value_sum_is_zero(&self) -> bool {
        self.inner.scaled.iter().sum::<i128>() == 0
    }

    pub fn all_nonnegative(&self) -> bool {
        self.inner.scaled.iter().all(|&s| s >= 0)
    }

    pub fn all_nonpositive(&self) -> bool {
        self.inner.scaled.iter().all(|&s| s <= 0)
    }

    /// The model with every value negated, same order and weights.
    pub fn negated(&self) -> Self {
        Self::new(
            self.inner.values.iter().map(|v| -v).collect(),
            Some(self.inner.weights.clone()),
        )
        .expect("negation preserves validity")
    }

    /// Maps a uniform 64-bit draw to a value index by cumulative-weight inversion.
    #[inline]
    pub fn index_from_u64(&self, draw: u64) -> u32 {
        let u = draw as u128;
        let t = &self.inner.thresholds;
        let mut j = 0;
        while u >= t[j] {
            j += 1;
        }
        j as u32
    }

    pub fn value_strings(&self) -> Vec<String> {
        self.inner.values.iter().map(format_rational).collect()
    }

    pub fn weight_strings(&self) -> Vec<String> {
        self.inner.weights.iter().map(format_rational).collect()
    }

    pub(crate) fn check_index(&self, index: u32) -> Result<(), ModelError> {
        if (index as usize) < self.k() {
            Ok(())
        } else {
            Err(ModelError::IndexOutOfRange { index, k: self.k() })
        }
    }
}

/// Serializable echo of a model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModelSummary {
    pub values: Vec<String>,
    pub weights: Vec<String>,
    pub mean: String,
    pub mean_sign: MeanSign,
}

impl From<&CoefficientModel> for ModelSummary {
    fn from(model: &CoefficientModel) -> Self {
        Self {
            values: model.value_strings(),
            weights: model.weight_strings(),
            mean: format_rational(&model.mean()),
            mean_sign: model.mean_sign(),
        }
    }
}

/// Anything that yields a coefficient sequence `a_1, a_2, ...` as value indices.
pub trait CoefficientSource: Send + Sync {
    fn model(&self) -> &CoefficientModel;

    /// Value index of `a_n`, for `n >= 1`.
    fn index_at(&self, n: u64) -> u32;

    /// Indices of `a_1, a_2, ...` in order. Must agree with [`index_at`](Self::index_at).
    fn indices(&self) -> Box<dyn Iterator<Item = u32> + '_> {
        Box::new((1..).map(move |n| self.index_at(n)))
    }
}

impl<S: CoefficientSource + ?Sized> CoefficientSource for &S {
    fn model(&self) -> &CoefficientModel {
        (**self).model()
    }
    fn index_at(&self, n: u64) -> u32 {
        (**self).index_at(n)
    }
    fn indices(&self) -> Box<dyn Iterator<Item = u32> + '_> {
        (**self).indices()
    }
}

/// Seed-driven random coefficient sequence.
///
/// `a_n` is the `n`-th 64-bit output of a ChaCha8 generator seeded with
/// `master_seed` on stream `sample_index`, pushed through the model's
/// cumulative-weight inversion. The generator supports random access by word
/// position, so any single coefficient costs one block computation and a
/// sequential read costs one output per coefficient.
#[derive(Debug, Clone)]
pub struct SequenceStream {
    model: CoefficientModel,
    master_seed: u64,
    sample_index: u64,
}

impl SequenceStream {
    pub fn new(model: CoefficientModel, master_seed: u64, sample_index: u64) -> Self {
        Self {
            model,
            master_seed,
            sample_index,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn sample_index(&self) -> u64 {
        self.sample_index
    }

    fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.sample_index);
        rng
    }

    /// The raw uniform draw behind `a_n`.
    pub fn draw_at(&self, n: u64) -> u64 {
        assert!(n >= 1, "coefficients are indexed from 1");
        let mut rng = self.rng();
        rng.set_word_pos(2 * (n as u128 - 1));
        rng.next_u64()
    }

    /// The same draws, mapped through another model with the same number of values.
    pub fn with_model(&self, model: CoefficientModel) -> Self {
        assert_eq!(model.k(), self.model.k(), "models must have equal size");
        Self {
            model,
            ..self.clone()
        }
    }
}

impl CoefficientSource for SequenceStream {
    fn model(&self) -> &CoefficientModel {
        &self.model
    }

    fn index_at(&self, n: u64) -> u32 {
        self.model.index_from_u64(self.draw_at(n))
    }

    fn indices(&self) -> Box<dyn Iterator<Item = u32> + '_> {
        let mut rng = self.rng();
        let model = &self.model;
        Box::new(std::iter::from_fn(move || {
            Some(model.index_from_u64(rng.next_u64()))
        }))
    }
}

/// Deterministic periodic sequence, e.g. all ones or alternating signs.
#[derive(Debug, Clone)]
pub struct PeriodicSource {
    model: CoefficientModel,
    pattern: Vec<u32>,
}

impl PeriodicSource {
    pub fn new(model: CoefficientModel, pattern: Vec<u32>) -> Result<Self, ModelError> {
        if pattern.is_empty() {
            return Err(ModelError::TooFewValues(0));
        }
        for &i in &pattern {
            model.check_index(i)?;
        }
        Ok(Self { model, pattern })
    }

    /// The constant sequence `a_n = value`.
    pub fn constant(model: CoefficientModel, value: &BigRational) -> Result<Self, ModelError> {
        let idx = model
            .index_of(value)
            .ok_or_else(|| ModelError::NotInSet(format_rational(value)))?;
        Self::new(model, vec![idx])
    }
}

impl CoefficientSource for PeriodicSource {
    fn model(&self) -> &CoefficientModel {
        &self.model
    }

    fn index_at(&self, n: u64) -> u32 {
        self.pattern[((n - 1) % self.pattern.len() as u64) as usize]
    }

    fn indices(&self) -> Box<dyn Iterator<Item = u32> + '_> {
        Box::new(self.pattern.iter().copied().cycle())
    }
}

/// A sequence whose first coordinates are replaced by a fixed head.
#[derive(Debug, Clone)]
pub struct SplicedSource<S> {
    head: Vec<u32>,
    tail: S,
}

impl<S: CoefficientSource> SplicedSource<S> {
    pub fn new(head: &FinitePrefix, tail: S) -> Self {
        assert!(
            head.model() == tail.model(),
            "head and tail must share a model"
        );
        Self {
            head: head.indices().to_vec(),
            tail,
        }
    }
}

impl<S: CoefficientSource> CoefficientSource for SplicedSource<S> {
    fn model(&self) -> &CoefficientModel {
        self.tail.model()
    }

    fn index_at(&self, n: u64) -> u32 {
        match self.head.get((n - 1) as usize) {
            Some(&i) => i,
            None => self.tail.index_at(n),
        }
    }

    fn indices(&self) -> Box<dyn Iterator<Item = u32> + '_> {
        let skip = self.head.len();
        Box::new(
            self.head
                .iter()
                .copied()
                .chain(self.tail.indices().skip(skip)),
        )
    }
}

/// Applies the cyclic shift `d_j -> d_{j+shift}` (indices mod k) to every coordinate.
#[derive(Debug, Clone)]
pub struct PermutedSource<S> {
    inner: S,
    shift: u32,
}

impl<S: CoefficientSource> PermutedSource<S> {
    pub fn new(inner: S, shift: u32) -> Self {
        let k = inner.model().k() as u32;
        Self {
            inner,
            shift: shift % k,
        }
    }
}

impl<S: CoefficientSource> CoefficientSource for PermutedSource<S> {
    fn model(&self) -> &CoefficientModel {
        self.inner.model()
    }

    fn index_at(&self, n: u64) -> u32 {
        let k = self.model().k() as u32;
        (self.inner.index_at(n) + self.shift) % k
    }

    fn indices(&self) -> Box<dyn Iterator<Item = u32> + '_> {
        let k = self.model().k() as u32;
        let shift = self.shift;
        Box::new(self.inner.indices().map(move |i| (i + shift) % k))
    }
}

/// A finite word `(a_1, ..., a_N)` over the model's values.
#[derive(Debug, Clone, PartialEq)]
pub struct FinitePrefix {
    model: CoefficientModel,
    indices: Vec<u32>,
}

impl FinitePrefix {
    pub fn from_indices(model: CoefficientModel, indices: Vec<u32>) -> Result<Self, ModelError> {
        for &i in &indices {
            model.check_index(i)?;
        }
        Ok(Self { model, indices })
    }

    pub fn from_values(model: CoefficientModel, values: &[BigRational]) -> Result<Self, ModelError> {
        let indices = values
            .iter()
            .map(|v| {
                model
                    .index_of(v)
                    .ok_or_else(|| ModelError::NotInSet(format_rational(v)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { model, indices })
    }

    /// Parses a comma separated list of values, each of which must belong to the model.
    pub fn parse(model: CoefficientModel, text: &str) -> Result<Self, ModelError> {
        let values = parse_rational_list(text)?;
        Self::from_values(model, &values)
    }

    pub(crate) fn from_trusted(model: CoefficientModel, indices: Vec<u32>) -> Self {
        debug_assert!(indices.iter().all(|&i| (i as usize) < model.k()));
        Self { model, indices }
    }

    pub fn model(&self) -> &CoefficientModel {
        &self.model
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values_f64(&self) -> impl Iterator<Item = f64> + '_ {
        self.indices.iter().map(|&i| self.model.value_f64(i))
    }

    pub fn values(&self) -> impl Iterator<Item = &BigRational> + '_ {
        self.indices.iter().map(|&i| self.model.value(i))
    }

    pub fn value_strings(&self) -> Vec<String> {
        self.values().map(format_rational).collect()
    }

    /// The first `n` entries.
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            model: self.model.clone(),
            indices: self.indices[..n.min(self.len())].to_vec(),
        }
    }

    /// Exact sum of the entries, scaled by the model's common denominator.
    pub fn scaled_sum(&self) -> i128 {
        self.indices.iter().map(|&i| self.model.scaled(i)).sum()
    }

    /// Exact sum of the entries.
    pub fn sum(&self) -> BigRational {
        BigRational::new(self.scaled_sum().into(), self.model.scale().clone())
    }
}

/// `(a_1, ..., a_N)` read from any source.
pub fn sample_prefix<S: CoefficientSource + ?Sized>(source: &S, n: usize) -> FinitePrefix {
    let indices = source.indices().take(n).collect();
    FinitePrefix::from_trusted(source.model().clone(), indices)
}
