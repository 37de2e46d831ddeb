//! Effective run configuration: config-file values overlaid by command line flags.

use std::fs;
use std::path::{Path, PathBuf};

use rpseries_core::{CoefficientModel, TermBudget};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

/// Reads a flat TOML table of settings and overlays the flags that were given.
///
/// Keys use the flag names with `-` replaced by `_`. Unknown keys are errors.
pub fn resolve<C: DeserializeOwned>(flags: &impl Serialize, config: Option<&Path>) -> Result<C, CliError> {
    let mut merged = match config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
            let v: Value = toml::from_str(&text)
                .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))?;
            match v {
                Value::Object(map) => map,
                _ => Map::new(),
            }
        }
        None => Map::new(),
    };
    let flags = serde_json::to_value(flags).map_err(|e| CliError::Config(e.to_string()))?;
    if let Value::Object(map) = flags {
        for (k, v) in map {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Config(e.to_string()))
}

/// Fields every subcommand shares.
pub trait Common {
    fn out(&self) -> Option<&PathBuf>;
    fn term_budget(&self) -> Option<u64>;

    fn budget(&self) -> TermBudget {
        self.term_budget().map_or_else(TermBudget::from_env, TermBudget)
    }
}

fn model(set: &Option<String>, weights: &Option<String>) -> Result<CoefficientModel, CliError> {
    let set = set
        .as_deref()
        .ok_or_else(|| CliError::Config("a coefficient set is required (--set)".into()))?;
    CoefficientModel::parse(set, weights.as_deref()).map_err(|e| CliError::Config(e.to_string()))
}

macro_rules! common_impl {
    ($t:ty) => {
        impl Common for $t {
            fn out(&self) -> Option<&PathBuf> {
                self.out.as_ref()
            }
            fn term_budget(&self) -> Option<u64> {
                self.term_budget
            }
        }

        impl $t {
            pub fn model(&self) -> Result<CoefficientModel, CliError> {
                model(&self.set, &self.weights)
            }
        }
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub set: Option<String>,
    pub weights: Option<String>,
    pub seed: u64,
    pub index: u64,
    pub start: f64,
    pub ratio: f64,
    pub depth: f64,
    pub eps: f64,
    pub threshold: f64,
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub workers: Option<usize>,
    pub term_budget: Option<u64>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            set: None,
            weights: None,
            seed: 0,
            index: 0,
            start: 0.1,
            ratio: 0.5,
            depth: 1e-5,
            eps: 1e-2,
            threshold: 10.0,
            out: None,
            svg: None,
            workers: None,
            term_budget: None,
        }
    }
}
common_impl!(ScanConfig);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimateConfig {
    pub set: Option<String>,
    pub weights: Option<String>,
    pub samples: u64,
    pub seed: u64,
    pub start: f64,
    pub ratio: f64,
    pub depth: f64,
    pub eps: f64,
    pub threshold: f64,
    /// Defaults to every power of ten between `start` and `depth`, plus `depth`.
    pub report_depths: Option<Vec<f64>>,
    pub walk_m: Option<Vec<u64>>,
    pub walk_horizons: Option<Vec<u64>>,
    pub zero_one_thresholds: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub term_budget: Option<u64>,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            set: None,
            weights: None,
            samples: 2000,
            seed: 0,
            start: 0.1,
            ratio: 0.5,
            depth: 1e-5,
            eps: 1e-2,
            threshold: 5.0,
            report_depths: None,
            walk_m: None,
            walk_horizons: None,
            zero_one_thresholds: None,
            out: None,
            workers: None,
            term_budget: None,
        }
    }
}
common_impl!(EstimateConfig);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BijectionConfig {
    pub set: Option<String>,
    pub weights: Option<String>,
    pub n: Option<usize>,
    pub max_words: u64,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub term_budget: Option<u64>,
}

impl Default for BijectionConfig {
    fn default() -> Self {
        Self {
            set: None,
            weights: None,
            n: None,
            max_words: rpseries_core::combinatorics::DEFAULT_ENUMERATION_BUDGET,
            out: None,
            workers: None,
            term_budget: None,
        }
    }
}
common_impl!(BijectionConfig);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrbitConfig {
    pub set: Option<String>,
    pub weights: Option<String>,
    pub seed: u64,
    pub index: u64,
    pub x: f64,
    pub n: usize,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub term_budget: Option<u64>,
}

impl Default for OrbitConfig {
    fn default() -> Self {
        Self {
            set: None,
            weights: None,
            seed: 0,
            index: 0,
            x: 0.999,
            n: 100_000,
            out: None,
            workers: None,
            term_budget: None,
        }
    }
}
common_impl!(OrbitConfig);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrossingsConfig {
    pub set: Option<String>,
    pub weights: Option<String>,
    pub seed: u64,
    pub index: u64,
    pub y: f64,
    /// `depth_hi:depth_lo`, the window `[1 - depth_hi, 1 - depth_lo]`.
    pub window: String,
    pub eps: f64,
    pub max_brackets: Option<usize>,
    pub subdivision_budget: u32,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub term_budget: Option<u64>,
}

impl Default for CrossingsConfig {
    fn default() -> Self {
        Self {
            set: None,
            weights: None,
            seed: 0,
            index: 0,
            y: 0.0,
            window: "1e-2:1e-5".into(),
            eps: 1e-3,
            max_brackets: None,
            subdivision_budget: rpseries_core::crossings::DEFAULT_SUBDIVISION_BUDGET,
            out: None,
            workers: None,
            term_budget: None,
        }
    }
}
common_impl!(CrossingsConfig);

impl CrossingsConfig {
    pub fn window_depths(&self) -> Result<(f64, f64), CliError> {
        let bad = || CliError::Config(format!("window must look like 1e-2:1e-6, got {:?}", self.window));
        let (hi, lo) = self.window.split_once(':').ok_or_else(bad)?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
        let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(bad());
        }
        Ok((hi, lo))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum WitnessKind {
    /// Nonzero coordinate when `D` has one sign, positive witness otherwise.
    Auto,
    Positive,
    NonzeroCoordinate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WitnessConfig {
    pub set: Option<String>,
    pub weights: Option<String>,
    pub prefix: Option<String>,
    pub target: Option<f64>,
    pub kind: WitnessKind,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub term_budget: Option<u64>,
}

impl Default for WitnessConfig {
    fn default() -> Self {
        Self {
            set: None,
            weights: None,
            prefix: None,
            target: None,
            kind: WitnessKind::Auto,
            out: None,
            workers: None,
            term_budget: None,
        }
    }
}
common_impl!(WitnessConfig);
