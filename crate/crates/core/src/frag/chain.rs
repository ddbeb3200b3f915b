//! Restricted decomposition: only the last piece keeps splitting.

use super::{FragConfig, Model, MAX_CHAIN_PIECES};
use crate::error::{invalid, Result};
use crate::rng::unit_rng;
use crate::significand::{DigitHistogram, LogLength};

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutcome {
    /// `X_1 = 1 - p_1`, `X_k = p_1 ⋯ p_{k-1} (1 - p_k)`, `X_N = p_1 ⋯ p_{N-1}`.
    pub pieces: Vec<LogLength>,
    pub histogram: DigitHistogram,
    pub linear_sum: f64,
}

/// Simulates chain number `trial`: `levels - 1` cuts produce `levels` pieces.
pub fn simulate_restricted(cfg: &FragConfig, trial: u64) -> Result<ChainOutcome> {
    if cfg.model != Model::Restricted {
        return invalid("simulate_restricted needs the restricted model");
    }
    if !(2..=MAX_CHAIN_PIECES).contains(&cfg.levels) {
        return invalid(format!(
            "restricted piece count must lie in 2..={MAX_CHAIN_PIECES}, got {}",
            cfg.levels
        ));
    }
    let mut rng = unit_rng(cfg.seed, trial);
    let mut pieces = Vec::with_capacity(cfg.levels);
    let mut remaining = 0.0; // log10 of p_1 ⋯ p_{k-1}
    for k in 1..cfg.levels {
        let cut = cfg.densities.at(k).sample(&mut rng);
        pieces.push(LogLength::new_unchecked(remaining + cut.log10_q));
        remaining += cut.log10_p;
    }
    pieces.push(LogLength::new_unchecked(remaining));

    let mut histogram = DigitHistogram::with_default_grid();
    let mut linear_sum = 0.0;
    for &x in &pieces {
        histogram.add(x, 1.0);
        linear_sum += x.linear();
    }
    Ok(ChainOutcome {
        pieces,
        histogram,
        linear_sum,
    })
}
