//! Binomial confidence intervals and fixed-bin histograms.

use serde::Serialize;

/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959963984540054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn overlaps(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn contains(&self, p: f64) -> bool {
        self.lo <= p && p <= self.hi
    }
}

/// Wilson score interval at 95% for `successes` out of `n`; `[0, 1]` when `n = 0`.
pub fn wilson(successes: u64, n: u64) -> Interval {
    if n == 0 {
        return Interval { lo: 0.0, hi: 1.0 };
    }
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = Z_95 * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    Interval {
        lo: if successes == 0 { 0.0 } else { (center - half).max(0.0) },
        hi: if successes == n { 1.0 } else { (center + half).min(1.0) },
    }
}

/// Equal-width bins on `[lo, hi)` with explicit underflow and overflow counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub bin_width: f64,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
    /// Values that were NaN.
    pub undefined: u64,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bin_width: f64) -> Self {
        assert!(lo < hi && bin_width > 0.0, "invalid histogram range");
        let bins = ((hi - lo) / bin_width).round() as usize;
        Self {
            lo,
            hi,
            bin_width,
            counts: vec![0; bins],
            underflow: 0,
            overflow: 0,
            undefined: 0,
        }
    }

    /// Bin width 0.5 on `[-100, 100)`.
    pub fn boundary_proxy() -> Self {
        Self::new(-100.0, 100.0, 0.5)
    }

    pub fn add(&mut self, v: f64) {
        if v.is_nan() {
            self.undefined += 1;
        } else if v < self.lo {
            self.underflow += 1;
        } else if v >= self.hi {
            self.overflow += 1;
        } else {
            let bin = (((v - self.lo) / self.bin_width) as usize).min(self.counts.len() - 1);
            self.counts[bin] += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.underflow + self.overflow + self.undefined
    }
}
