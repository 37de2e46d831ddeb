//! Sum-shifting partial bijections on `D^N`.
//!
//! `g_sharp` changes exactly one `d_1` into `d_2`, so it raises the coordinate
//! sum by `d_2 - d_1`. Within a position class (the positions holding `d_1` or
//! `d_2`, with every other coordinate frozen) the word restricted to those
//! positions is a bit string with `d_1 -> 1` and `d_2 -> 0`. Reading `1` as an
//! opening and `0` as a closing bracket, the unmatched symbols always form
//! `0...0 1...1`; `g_sharp` flips the leftmost unmatched `1`. This is the
//! bracketing form of the symmetric chain decomposition of the Boolean
//! lattice, so it matches as many words as any level-to-level matching can.
//!
//! `g_flat` flips the rightmost unmatched `0` back, and is the exact inverse.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::boundary_scan::{EpsRule, ScanGrid, ScanReport};
use crate::coefficients::{
    sample_prefix, CoefficientModel, CoefficientSource, FinitePrefix, SplicedSource,
};
use crate::rational::format_rational;
use crate::series_eval::{eval_many, BoundedValue, EvalRequest, TermBudget};

/// Default cap on `k^N` for exhaustive enumeration.
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 50_000_000;

const MAX_REPORTED_VIOLATIONS: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CombError {
    #[error("k^N = {k}^{n} exceeds the enumeration budget {budget}")]
    BudgetExceeded { k: usize, n: usize, budget: u64 },
    #[error("word length {got} does not match N = {expected}")]
    Length { expected: usize, got: usize },
    #[error("word uses a different coefficient model")]
    ModelMismatch,
    #[error(transparent)]
    Scan(#[from] crate::boundary_scan::ScanError),
}

/// Result of applying `g_sharp` or `g_flat`.
#[derive(Debug, Clone, PartialEq)]
pub enum ShiftImage {
    Matched {
        word: FinitePrefix,
        /// 0-based coordinate that was changed.
        position: usize,
    },
    Unmatched,
}

impl ShiftImage {
    pub fn word(&self) -> Option<&FinitePrefix> {
        match self {
            ShiftImage::Matched { word, .. } => Some(word),
            ShiftImage::Unmatched => None,
        }
    }
}

const D1: u32 = 0;
const D2: u32 = 1;

/// Position of the leftmost unmatched `d_1`, if any.
pub fn sharp_flip_position(indices: &[u32]) -> Option<usize> {
    // Right to left, a d_1 is matched iff an unmatched d_2 lies to its right.
    let mut open_closers = 0usize;
    let mut leftmost = None;
    for (pos, &idx) in indices.iter().enumerate().rev() {
        match idx {
            D2 => open_closers += 1,
            D1 if open_closers > 0 => open_closers -= 1,
            D1 => leftmost = Some(pos),
            _ => {}
        }
    }
    leftmost
}

/// Position of the rightmost unmatched `d_2`, if any.
pub fn flat_flip_position(indices: &[u32]) -> Option<usize> {
    let mut open = 0usize;
    let mut rightmost = None;
    for (pos, &idx) in indices.iter().enumerate() {
        match idx {
            D1 => open += 1,
            D2 if open > 0 => open -= 1,
            D2 => rightmost = Some(pos),
            _ => {}
        }
    }
    rightmost
}

fn flipped(word: &FinitePrefix, position: usize, to: u32) -> ShiftImage {
    let mut indices = word.indices().to_vec();
    indices[position] = to;
    ShiftImage::Matched {
        word: FinitePrefix::from_trusted(word.model().clone(), indices),
        position,
    }
}

/// Turns the leftmost unmatched `d_1` into `d_2`.
pub fn g_sharp(word: &FinitePrefix) -> ShiftImage {
    match sharp_flip_position(word.indices()) {
        Some(p) => flipped(word, p, D2),
        None => ShiftImage::Unmatched,
    }
}

/// Turns the rightmost unmatched `d_2` into `d_1`; inverse of [`g_sharp`].
pub fn g_flat(word: &FinitePrefix) -> ShiftImage {
    match flat_flip_position(word.indices()) {
        Some(p) => flipped(word, p, D1),
        None => ShiftImage::Unmatched,
    }
}

/// The class of a word: which positions carry `d_1`/`d_2` and what sits elsewhere.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PositionClass {
    pub n: usize,
    /// 0-based positions holding `d_1` or `d_2`.
    pub positions: Vec<usize>,
    /// Frozen `(position, value index)` pairs, never `d_1` or `d_2`.
    pub fixed: Vec<(usize, u32)>,
}

impl PositionClass {
    pub fn of(word: &FinitePrefix) -> Self {
        let mut positions = Vec::new();
        let mut fixed = Vec::new();
        for (pos, &idx) in word.indices().iter().enumerate() {
            if idx == D1 || idx == D2 {
                positions.push(pos);
            } else {
                fixed.push((pos, idx));
            }
        }
        Self {
            n: word.len(),
            positions,
            fixed,
        }
    }

    pub fn l(&self) -> usize {
        self.positions.len()
    }
}

/// `g_sharp` / `g_flat` restricted to words of one length over one model.
#[derive(Debug, Clone)]
pub struct ShiftMatching {
    model: CoefficientModel,
    n: usize,
}

impl ShiftMatching {
    pub fn new(model: CoefficientModel, n: usize) -> Self {
        Self { model, n }
    }

    fn check(&self, word: &FinitePrefix) -> Result<(), CombError> {
        if word.model() != &self.model {
            return Err(CombError::ModelMismatch);
        }
        if word.len() != self.n {
            return Err(CombError::Length {
                expected: self.n,
                got: word.len(),
            });
        }
        Ok(())
    }

    pub fn sharp(&self, word: &FinitePrefix) -> Result<ShiftImage, CombError> {
        self.check(word)?;
        Ok(g_sharp(word))
    }

    pub fn flat(&self, word: &FinitePrefix) -> Result<ShiftImage, CombError> {
        self.check(word)?;
        Ok(g_flat(word))
    }

    /// The word with enumeration code `code` (base `k`, first coordinate most significant).
    pub fn word(&self, code: u64) -> FinitePrefix {
        FinitePrefix::from_trusted(self.model.clone(), decode(code, self.model.k(), self.n))
    }
}

fn total_words(k: usize, n: usize, budget: u64) -> Result<u64, CombError> {
    let over = || CombError::BudgetExceeded { k, n, budget };
    let total = (k as u64).checked_pow(n as u32).ok_or_else(over)?;
    if total > budget {
        return Err(over());
    }
    Ok(total)
}

fn decode(mut code: u64, k: usize, n: usize) -> Vec<u32> {
    let mut word = vec![0u32; n];
    for slot in word.iter_mut().rev() {
        *slot = (code % k as u64) as u32;
        code /= k as u64;
    }
    word
}

fn encode(word: &[u32], k: usize) -> u64 {
    word.iter().fold(0u64, |acc, &d| acc * k as u64 + d as u64)
}

/// Advances `word` to the next code; returns false on wrap-around.
fn increment(word: &mut [u32], k: usize) -> bool {
    for slot in word.iter_mut().rev() {
        *slot += 1;
        if (*slot as usize) < k {
            return true;
        }
        *slot = 0;
    }
    false
}

const CHUNK: u64 = 1 << 14;

fn chunks(total: u64) -> impl ParallelIterator<Item = (u64, u64)> {
    let count = total.div_ceil(CHUNK);
    (0..count)
        .into_par_iter()
        .map(move |c| (c * CHUNK, ((c + 1) * CHUNK).min(total)))
}

/// `#dom g_sharp / k^N` by exhaustive enumeration.
pub fn domain_fraction(
    model: &CoefficientModel,
    n: usize,
    budget: u64,
) -> Result<BigRational, CombError> {
    let k = model.k();
    let total = total_words(k, n, budget)?;
    let matched: u64 = chunks(total)
        .map(|(start, end)| {
            let mut word = decode(start, k, n);
            let mut count = 0u64;
            for _ in start..end {
                if sharp_flip_position(&word).is_some() {
                    count += 1;
                }
                increment(&mut word, k);
            }
            count
        })
        .sum();
    Ok(BigRational::new(matched.into(), total.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// Two domain words share an image.
    NotInjective,
    /// The image sum is not the original sum plus `d_2 - d_1`.
    SumShift,
    /// The image differs from the word other than by one `d_1 -> d_2`.
    NotSingleFlip,
    /// `g_flat(g_sharp(w)) != w`.
    InverseMismatch,
    /// The image is less likely than the word although `p_2 >= p_1`.
    ProbabilityDecrease,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub word: Vec<String>,
}

/// Outcome of exhaustively checking `g_sharp` on `D^N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchingReport {
    pub values: Vec<String>,
    pub weights: Vec<String>,
    pub n: usize,
    pub total_words: u64,
    pub domain_size: u64,
    pub range_size: u64,
    pub unmatched: u64,
    /// `domain_size / total_words` as an exact rational string.
    pub fraction: String,
    pub fraction_f64: f64,
    pub injective: bool,
    /// Smallest and largest observed `P(g(w)) / P(w)`, exact.
    pub probability_ratio_min: Option<String>,
    pub probability_ratio_max: Option<String>,
    pub violation_count: u64,
    pub violations: Vec<Violation>,
}

impl MatchingReport {
    pub fn is_clean(&self) -> bool {
        self.violation_count == 0 && self.injective && self.domain_size == self.range_size
    }
}

#[derive(Default)]
struct ChunkStats {
    domain: u64,
    range: u64,
    violation_count: u64,
    violations: Vec<(u64, ViolationKind)>,
    ratio_min: Option<BigRational>,
    ratio_max: Option<BigRational>,
}

impl ChunkStats {
    fn note(&mut self, code: u64, kind: ViolationKind) {
        self.violation_count += 1;
        if self.violations.len() < MAX_REPORTED_VIOLATIONS {
            self.violations.push((code, kind));
        }
    }

    fn ratio(&mut self, r: BigRational) {
        if self.ratio_min.as_ref().is_none_or(|m| r < *m) {
            self.ratio_min = Some(r.clone());
        }
        if self.ratio_max.as_ref().is_none_or(|m| r > *m) {
            self.ratio_max = Some(r);
        }
    }

    fn merge(mut self, other: ChunkStats) -> ChunkStats {
        self.domain += other.domain;
        self.range += other.range;
        self.violation_count += other.violation_count;
        self.violations.extend(other.violations);
        if let Some(r) = other.ratio_min {
            self.ratio(r);
        }
        if let Some(r) = other.ratio_max {
            self.ratio(r);
        }
        self
    }
}

/// Exact word probability from its value counts, memoised per count vector.
struct WordProbability<'a> {
    model: &'a CoefficientModel,
    cache: HashMap<Vec<u16>, BigRational>,
}

impl<'a> WordProbability<'a> {
    fn new(model: &'a CoefficientModel) -> Self {
        Self {
            model,
            cache: HashMap::new(),
        }
    }

    fn of(&mut self, word: &[u32]) -> BigRational {
        let mut counts = vec![0u16; self.model.k()];
        for &i in word {
            counts[i as usize] += 1;
        }
        let model = self.model;
        self.cache
            .entry(counts)
            .or_insert_with_key(|counts| {
                counts
                    .iter()
                    .enumerate()
                    .fold(BigRational::one(), |acc, (j, &c)| {
                        acc * num_traits::pow(model.weight(j as u32).clone(), c as usize)
                    })
            })
            .clone()
    }
}

/// Exhaustively checks injectivity, the exact sum shift, the inverse pairing
/// and the effect on word probabilities.
pub fn verify_matching(
    model: &CoefficientModel,
    n: usize,
    budget: u64,
) -> Result<MatchingReport, CombError> {
    let k = model.k();
    let total = total_words(k, n, budget)?;
    let expected_shift = model.scaled(D2) - model.scaled(D1);
    let p1 = model.weight(D1).clone();
    let p2 = model.weight(D2).clone();
    let seen: Vec<AtomicU64> = (0..total.div_ceil(64)).map(|_| AtomicU64::new(0)).collect();
    let collisions = AtomicU64::new(0);

    let stats = chunks(total)
        .map(|(start, end)| {
            let mut stats = ChunkStats::default();
            let mut probability = WordProbability::new(model);
            let mut word = decode(start, k, n);
            let mut image = word.clone();
            for code in start..end {
                if flat_flip_position(&word).is_some() {
                    stats.range += 1;
                }
                if let Some(p) = sharp_flip_position(&word) {
                    stats.domain += 1;
                    image.copy_from_slice(&word);
                    image[p] = D2;

                    let differing = word.iter().zip(&image).filter(|(a, b)| a != b).count();
                    if differing != 1 || word[p] != D1 {
                        stats.note(code, ViolationKind::NotSingleFlip);
                    }
                    let sum = |w: &[u32]| w.iter().map(|&i| model.scaled(i)).sum::<i128>();
                    if sum(&image) - sum(&word) != expected_shift {
                        stats.note(code, ViolationKind::SumShift);
                    }
                    if flat_flip_position(&image) != Some(p) {
                        stats.note(code, ViolationKind::InverseMismatch);
                    }
                    let img = encode(&image, k);
                    let bit = 1u64 << (img % 64);
                    if seen[(img / 64) as usize].fetch_or(bit, Ordering::Relaxed) & bit != 0 {
                        collisions.fetch_add(1, Ordering::Relaxed);
                    }
                    let ratio = probability.of(&image) / probability.of(&word);
                    let one = BigRational::one();
                    let decreased = (p2 >= p1 && ratio < one) || (p2 > p1 && ratio <= one);
                    if decreased {
                        stats.note(code, ViolationKind::ProbabilityDecrease);
                    }
                    stats.ratio(ratio);
                }
                increment(&mut word, k);
            }
            stats
        })
        .reduce(ChunkStats::default, ChunkStats::merge);

    let collisions = collisions.into_inner();
    let mut violations = stats.violations;
    violations.sort();
    violations.truncate(MAX_REPORTED_VIOLATIONS);
    let mut violation_count = stats.violation_count;
    if collisions > 0 {
        violation_count += collisions;
        violations.extend(find_collisions(model, n, total));
    }
    let describe = |code: u64| {
        FinitePrefix::from_trusted(model.clone(), decode(code, k, n)).value_strings()
    };
    let fraction = BigRational::new(stats.domain.into(), BigInt::from(total));
    Ok(MatchingReport {
        values: model.value_strings(),
        weights: model.weight_strings(),
        n,
        total_words: total,
        domain_size: stats.domain,
        range_size: stats.range,
        unmatched: total - stats.domain,
        fraction: format_rational(&fraction),
        fraction_f64: fraction.to_f64().unwrap_or(f64::NAN),
        injective: collisions == 0,
        probability_ratio_min: stats.ratio_min.as_ref().map(format_rational),
        probability_ratio_max: stats.ratio_max.as_ref().map(format_rational),
        violation_count,
        violations: violations
            .into_iter()
            .map(|(code, kind)| Violation {
                kind,
                word: describe(code),
            })
            .collect(),
    })
}

/// Sequential pass naming the first words whose image was already taken.
fn find_collisions(model: &CoefficientModel, n: usize, total: u64) -> Vec<(u64, ViolationKind)> {
    let k = model.k();
    let mut owner: HashMap<u64, u64> = HashMap::new();
    let mut out = Vec::new();
    let mut word = decode(0, k, n);
    for code in 0..total {
        if let Some(p) = sharp_flip_position(&word) {
            let mut image = word.clone();
            image[p] = D2;
            if owner.insert(encode(&image, k), code).is_some() && out.len() < MAX_REPORTED_VIOLATIONS {
                out.push((code, ViolationKind::NotInjective));
            }
        }
        increment(&mut word, k);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftPoint {
    pub x: f64,
    pub original: BoundedValue,
    pub modified: BoundedValue,
    /// `modified.value - original.value`.
    pub observed_shift: f64,
    /// `|observed_shift - (d_2 - d_1)|`.
    pub deviation: f64,
    /// Float rounding allowed on top of the band.
    pub allowance: f64,
    pub within: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftReport {
    /// 1-based coordinate changed by `g_sharp`.
    pub position: usize,
    pub shift: f64,
    pub shift_exact: String,
    /// Shallowest grid point.
    pub x0: f64,
    /// `sum_{n<=N} |b_n - a_n| (1 - x0^n)`.
    pub band: f64,
    pub points: Vec<ShiftPoint>,
    pub all_within: bool,
    pub original_running: (f64, f64),
    pub modified_running: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ShiftEffect {
    Unmatched,
    Shifted(ShiftReport),
}

/// Certified band `sum_{n} |b_n - a_n| (1 - x0^n)` computed with upward rounding.
fn shift_band(original: &FinitePrefix, image: &FinitePrefix, x0: f64) -> f64 {
    let model = original.model();
    let ln_x0 = x0.ln();
    original
        .indices()
        .iter()
        .zip(image.indices())
        .enumerate()
        .filter(|(_, (a, b))| a != b)
        .map(|(pos, (&a, &b))| {
            let diff = (model.value_f64(b) - model.value_f64(a)).abs();
            let one_minus_power = -((pos as f64 + 1.0) * ln_x0).exp_m1();
            diff * one_minus_power * (1.0 + 1e-12)
        })
        .sum::<f64>()
        .next_up()
}

/// Compares scans of a sequence and of its `G_N^sharp` image.
///
/// The tails agree beyond `N`, so every grid-point value moves by
/// `sum_{n<=N} (b_n - a_n) x^n`, which lies within the band of `d_2 - d_1`.
pub fn shift_effect_on_scan<S: CoefficientSource>(
    source: &S,
    n: usize,
    grid: &ScanGrid,
    eps_rule: &EpsRule,
    budget: TermBudget,
) -> Result<ShiftEffect, CombError> {
    grid.validate()?;
    let prefix = sample_prefix(source, n);
    let (image, position) = match g_sharp(&prefix) {
        ShiftImage::Matched { word, position } => (word, position),
        ShiftImage::Unmatched => return Ok(ShiftEffect::Unmatched),
    };
    Ok(ShiftEffect::Shifted(compare_shifted(
        source, &prefix, &image, position, grid, eps_rule, budget,
    )?))
}

/// Like [`shift_effect_on_scan`] with an explicit replacement of the first coordinates.
pub fn compare_shifted<S: CoefficientSource>(
    source: &S,
    prefix: &FinitePrefix,
    image: &FinitePrefix,
    position: usize,
    grid: &ScanGrid,
    eps_rule: &EpsRule,
    budget: TermBudget,
) -> Result<ShiftReport, CombError> {
    let modified = SplicedSource::new(image, source);
    let deltas = grid.deltas();
    let requests: Vec<EvalRequest> = deltas
        .iter()
        .map(|&d| {
            let x = 1.0 - d;
            EvalRequest {
                x,
                eps: eps_rule.eps_at(x),
                min_terms: prefix.len() as u64,
            }
        })
        .collect();
    let to_scan_err = |e: crate::series_eval::PointError| {
        CombError::Scan(crate::boundary_scan::ScanError::Eval {
            m: e.index,
            x: requests[e.index].x,
            source: e.error,
        })
    };
    let original = eval_many(source, &requests, budget).map_err(to_scan_err)?;
    let shifted = eval_many(&modified, &requests, budget).map_err(to_scan_err)?;

    let shift_exact = image.sum() - prefix.sum();
    let shift = shift_exact.to_f64().unwrap_or(f64::NAN);
    let x0 = requests.first().map_or(0.0, |r| r.x);
    let band = shift_band(prefix, image, x0);
    let points: Vec<ShiftPoint> = original
        .iter()
        .zip(&shifted)
        .map(|(a, b)| {
            let observed_shift = b.value - a.value;
            let deviation = (observed_shift - shift).abs();
            let allowance = (a.rounding_slack
                + b.rounding_slack
                + 4.0 * f64::EPSILON * (a.value.abs() + b.value.abs() + shift.abs()))
            .next_up();
            ShiftPoint {
                x: a.x,
                original: *a,
                modified: *b,
                observed_shift,
                deviation,
                allowance,
                within: deviation <= band + allowance,
            }
        })
        .collect();
    let before = ScanReport::from_bounds(&deltas, &original);
    let after = ScanReport::from_bounds(&deltas, &shifted);
    Ok(ShiftReport {
        position: position + 1,
        shift,
        shift_exact: format_rational(&shift_exact),
        x0,
        band,
        all_within: points.iter().all(|p| p.within),
        points,
        original_running: (before.running_sup_lower(), before.running_inf_upper()),
        modified_running: (after.running_sup_lower(), after.running_inf_upper()),
    })
}
