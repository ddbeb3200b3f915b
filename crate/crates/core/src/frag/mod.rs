//! Continuous stick-fragmentation models.
//!
//! * [`tree`]: every piece splits at every level (2^N pieces after N levels),
//!   with one shared or per-level cut density, including the per-level
//!   log-box counterexample.
//! * [`chain`]: only the last piece keeps splitting (N pieces).
//! * [`fixed`]: every cut uses the same proportion `p`, giving N + 1 distinct
//!   lengths with binomial frequencies; rational `log10((1-p)/p)` is detected.
//!
//! A unit stick is used throughout; rescaling the stick does not change
//! significand behaviour.

pub mod chain;
pub mod fixed;
pub mod tree;

use serde::{Deserialize, Serialize};

use crate::density::LevelDensities;

/// Largest depth for full tree enumeration (2^30 leaves).
pub const MAX_TREE_LEVELS: usize = 30;
/// Largest chain length for the restricted model.
pub const MAX_CHAIN_PIECES: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Unrestricted,
    Restricted,
}

/// Configuration of one continuous fragmentation run.
#[derive(Debug, Clone, PartialEq)]
pub struct FragConfig {
    pub model: Model,
    /// Tree depth (unrestricted) or number of pieces (restricted).
    pub levels: usize,
    pub densities: LevelDensities,
    pub seed: u64,
}

impl FragConfig {
    pub fn new(model: Model, levels: usize, densities: LevelDensities, seed: u64) -> Self {
        Self {
            model,
            levels,
            densities,
            seed,
        }
    }
}

pub use chain::{simulate_restricted, ChainOutcome};
pub use fixed::{
    convergents, detect_rational_y, fixed_proportion_spectrum, multisection_probability,
    ratio_exponent, spectrum_digit_distribution, FixedProportionSpectrum, Multisection, RationalY,
    SpectrumEntry,
};
pub use tree::{
    counterexample_run, for_each_leaf, simulate_unrestricted, simulate_unrestricted_trials,
    CounterexampleOutcome, TreeOutcome,
};
