//! Unrestricted decomposition: each piece splits at every level.

use rayon::prelude::*;
use serde::Serialize;

use super::{FragConfig, Model, MAX_TREE_LEVELS};
use crate::density::{CutDraw, DensitySpec, LevelDensities};
use crate::error::{invalid, Result};
use crate::mellin::counterexample_schedule;
use crate::rng::unit_rng;
use crate::significand::{DigitHistogram, LogLength};

/// Visits the 2^levels leaves of a binary cut tree depth-first.
///
/// `draw(level)` supplies the cut for the next internal node at `level`
/// (1-based); the left child receives `p`, the right `1 - p`. Leaves are
/// visited left to right. Memory is O(levels).
pub fn for_each_leaf<D, V>(levels: usize, mut draw: D, mut visit: V)
where
    D: FnMut(usize) -> CutDraw,
    V: FnMut(LogLength),
{
    let mut stack: Vec<(usize, f64)> = Vec::with_capacity(levels + 1);
    stack.push((0, 0.0));
    while let Some((depth, log)) = stack.pop() {
        if depth == levels {
            visit(LogLength::new_unchecked(log));
            continue;
        }
        let cut = draw(depth + 1);
        stack.push((depth + 1, log + cut.log10_q));
        stack.push((depth + 1, log + cut.log10_p));
    }
}

/// Summary of one simulated tree.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeOutcome {
    /// First digits and the `P_N(s)` grid over all leaves (unit weights).
    pub histogram: DigitHistogram,
    pub leaves: u64,
    /// Sum of linear leaf lengths; 1 up to rounding and underflow.
    pub linear_sum: f64,
    pub min_log10: f64,
    pub max_log10: f64,
}

impl TreeOutcome {
    /// `P_N(s)` at the default grid point closest to `s`.
    pub fn pn(&self, s: f64) -> f64 {
        self.histogram
            .pn_grid()
            .and_then(|g| {
                g.into_iter()
                    .min_by(|a, b| (a.0 - s).abs().total_cmp(&(b.0 - s).abs()))
                    .map(|(_, v)| v)
            })
            .unwrap_or(f64::NAN)
    }
}

fn check_tree(cfg: &FragConfig) -> Result<()> {
    if cfg.model != Model::Unrestricted {
        return invalid("simulate_unrestricted needs the unrestricted model");
    }
    if !(1..=MAX_TREE_LEVELS).contains(&cfg.levels) {
        return invalid(format!(
            "unrestricted levels must lie in 1..={MAX_TREE_LEVELS}, got {}",
            cfg.levels
        ));
    }
    Ok(())
}

/// Simulates tree number `trial` of the configured run.
pub fn simulate_unrestricted(cfg: &FragConfig, trial: u64) -> Result<TreeOutcome> {
    check_tree(cfg)?;
    let mut rng = unit_rng(cfg.seed, trial);
    let mut histogram = DigitHistogram::with_default_grid();
    let mut leaves = 0u64;
    let mut linear_sum = 0.0;
    let (mut min_log10, mut max_log10) = (f64::INFINITY, f64::NEG_INFINITY);
    let densities = &cfg.densities;
    for_each_leaf(
        cfg.levels,
        |level| densities.at(level).sample(&mut rng),
        |x| {
            histogram.add(x, 1.0);
            leaves += 1;
            linear_sum += x.linear();
            min_log10 = min_log10.min(x.log10());
            max_log10 = max_log10.max(x.log10());
        },
    );
    Ok(TreeOutcome {
        histogram,
        leaves,
        linear_sum,
        min_log10,
        max_log10,
    })
}

/// Simulates trees `0..trials` in parallel; results are in trial order.
pub fn simulate_unrestricted_trials(cfg: &FragConfig, trials: u64) -> Result<Vec<TreeOutcome>> {
    check_tree(cfg)?;
    (0..trials)
        .into_par_iter()
        .map(|t| simulate_unrestricted(cfg, t))
        .collect()
}

/// Result of the per-level log-box construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleOutcome {
    pub delta: f64,
    pub levels: usize,
    /// Largest over smallest leaf length.
    pub max_min_ratio: f64,
    pub histogram: DigitHistogram,
    pub support_size: usize,
    /// Whether the populated digits form one contiguous run.
    pub support_adjacent: bool,
    /// `Π_{n<=N} |φ̂_n(1)|`, N = 1..=levels.
    pub partial_fourier_products: Vec<f64>,
}

/// Runs the unrestricted model with level-n cuts drawn from the n-th
/// log-box of the epsilon schedule for `delta`.
pub fn counterexample_run(delta: f64, levels: usize, seed: u64) -> Result<CounterexampleOutcome> {
    let densities: LevelDensities = DensitySpec::Counterexample { delta }.resolve(levels)?;
    let cfg = FragConfig::new(Model::Unrestricted, levels, densities, seed);
    let tree = simulate_unrestricted(&cfg, 0)?;
    let schedule = counterexample_schedule(delta, levels)?;
    let populated: Vec<usize> = tree
        .histogram
        .digits()
        .iter()
        .enumerate()
        .filter(|(_, w)| **w > 0.0)
        .map(|(i, _)| i)
        .collect();
    let support_adjacent = populated.windows(2).all(|w| w[1] == w[0] + 1);
    Ok(CounterexampleOutcome {
        delta,
        levels,
        max_min_ratio: 10f64.powf(tree.max_log10 - tree.min_log10),
        support_size: populated.len(),
        support_adjacent,
        histogram: tree.histogram,
        partial_fourier_products: schedule.partial_fourier_products()?,
    })
}
