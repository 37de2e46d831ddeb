//! Random power series `sum a_n x^n` with coefficients drawn from a finite set,
//! studied near the boundary point `x = 1`.
//!
//! The crate provides certified truncated evaluation, finite-scale scans of the
//! boundary behaviour, the explicit sum-shifting bijections on `D^N`, the
//! cyclic-permutation orbit identity, certified root brackets for `f(x) = y`,
//! nowhere-density witnesses, and Monte Carlo estimators over all of these.

pub mod boundary_scan;
pub mod coefficients;
pub mod combinatorics;
pub mod crossings;
pub mod montecarlo;
pub mod rational;
pub mod residuality;
pub mod series_eval;
pub mod stats;
pub mod symmetry;

pub use boundary_scan::{scan, verdict, EpsRule, PropertyVerdict, ScanGrid, ScanReport, Verdict};
pub use coefficients::{
    sample_prefix, CoefficientModel, CoefficientSource, FinitePrefix, MeanSign, ModelError,
    PeriodicSource, PermutedSource, SequenceStream, SplicedSource,
};
pub use series_eval::{
    eval_abel_form, eval_many, eval_polynomial, eval_to_eps, eval_truncated, BoundedValue,
    EvalError, EvalRequest, TermBudget,
};
pub use combinatorics::{domain_fraction, g_flat, g_sharp, verify_matching, MatchingReport, ShiftImage};
pub use crossings::{crossing_counts_by_depth, find_crossings, CrossingSearch, RootBracket};
pub use montecarlo::{estimate_properties, EstimateReport, ExperimentConfig};
pub use residuality::{
    prefix_infimum, witness_nonzero_coordinate, witness_positive, PositiveWitness, PrefixInfimum,
};
pub use symmetry::{apply_perm, orbit_sum, sign_witness, CyclicPermutation};
