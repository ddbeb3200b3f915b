//! Fixed-proportion decomposition: every cut uses the same `p`.
//!
//! After `N` levels the `2^N` pieces take the `N + 1` lengths
//! `x_n = p^(N-n) (1-p)^n` with multiplicities `C(N, n)`. With
//! `y = log10((1-p)/p)` we have `log10 x_n = N log10 p + n y`, so the
//! significands are governed by `n y mod 1`: periodic when `y = r/q` is
//! rational, equidistributed (under binomial weights) when it is not.

use std::f64::consts::{LN_10, LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::significand::{DigitHistogram, LogLength};
use crate::special::ln_binomial;

/// Largest `N` for which the spectrum is materialized.
pub const MAX_SPECTRUM_LEVELS: u64 = 1_000_000;
/// Maximum continued-fraction depth.
pub const MAX_CONVERGENT_DEPTH: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumEntry {
    /// Number of `1 - p` factors.
    pub n: u64,
    pub log_length: LogLength,
    /// `ln(C(N, n) / 2^N)`: the fraction of the `2^N` pieces with this length.
    pub log_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedProportionSpectrum {
    pub levels: u64,
    pub p: f64,
    pub entries: Vec<SpectrumEntry>,
}

impl FixedProportionSpectrum {
    /// Total frequency, 1 up to rounding.
    pub fn total_weight(&self) -> f64 {
        self.entries.iter().map(|e| e.log_weight.exp()).sum()
    }

    /// `Σ_n C(N, n) x_n`: the summed length of all `2^N` pieces, which is 1.
    pub fn total_length(&self) -> f64 {
        let shift = self.levels as f64 * LN_2;
        self.entries
            .iter()
            .map(|e| (e.log_weight + shift + e.log_length.log10() * LN_10).exp())
            .sum()
    }

    /// `(log-length, frequency)` pairs.
    pub fn weighted_pieces(&self) -> Vec<(LogLength, f64)> {
        self.entries
            .iter()
            .map(|e| (e.log_length, e.log_weight.exp()))
            .collect()
    }
}

fn log10_complement(p: f64) -> f64 {
    (-p).ln_1p() / LN_10
}

/// Distinct lengths and frequencies after `levels` fixed-proportion cuts.
///
/// For `p = 1/2` all lengths coincide and a single entry is returned.
pub fn fixed_proportion_spectrum(levels: u64, p: f64) -> Result<FixedProportionSpectrum> {
    if !(p > 0.0 && p < 1.0) {
        return invalid(format!("p must lie in (0, 1), got {p}"));
    }
    if levels > MAX_SPECTRUM_LEVELS {
        return invalid(format!(
            "levels must be at most {MAX_SPECTRUM_LEVELS}, got {levels}"
        ));
    }
    let (lp, lq) = (p.log10(), log10_complement(p));
    if p == 0.5 {
        return Ok(FixedProportionSpectrum {
            levels,
            p,
            entries: vec![SpectrumEntry {
                n: 0,
                log_length: LogLength::new_unchecked(levels as f64 * lp),
                log_weight: 0.0,
            }],
        });
    }
    let shift = levels as f64 * LN_2;
    let entries = (0..=levels)
        .map(|n| SpectrumEntry {
            n,
            log_length: LogLength::new_unchecked((levels - n) as f64 * lp + n as f64 * lq),
            log_weight: ln_binomial(levels, n) - shift,
        })
        .collect();
    Ok(FixedProportionSpectrum { levels, p, entries })
}

/// Weighted first-digit histogram of a spectrum (frequencies summing to 1).
///
/// Scale by the piece count `2^N` (see [`DigitHistogram::scaled`]) before a
/// chi-square test that should reflect the number of pieces.
pub fn spectrum_digit_distribution(spectrum: &FixedProportionSpectrum) -> DigitHistogram {
    let mut h = DigitHistogram::with_default_grid();
    for e in &spectrum.entries {
        h.add(e.log_length, e.log_weight.exp());
    }
    h
}

/// Probability that a piece index falls in the class `j mod q`, together
/// with the bound `(q - 1) cos(π/q)^N` on its distance from `1/q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Multisection {
    pub probability: f64,
    pub error_bound: f64,
}

/// `(1/q) Σ_{s=0}^{q-1} cos(πs/q)^N cos(π(N - 2j)s/q)`, which equals
/// `Σ_ℓ C(N, j + ℓq) / 2^N`.
pub fn multisection_probability(levels: u64, q: u64, j: u64) -> Result<Multisection> {
    if q < 1 {
        return invalid("q must be at least 1");
    }
    if j >= q {
        return invalid(format!("residue j = {j} must be below q = {q}"));
    }
    if levels < 1 {
        return invalid("levels must be at least 1");
    }
    if q == 1 {
        return Ok(Multisection {
            probability: 1.0,
            error_bound: 0.0,
        });
    }
    let qf = q as f64;
    let n = levels as f64;
    let shift = n - 2.0 * j as f64;
    let mut sum = 1.0;
    for s in 1..q {
        let s = s as f64;
        sum += (PI * s / qf).cos().powf(n) * (PI * shift * s / qf).cos();
    }
    Ok(Multisection {
        probability: sum / qf,
        error_bound: (qf - 1.0) * (PI / qf).cos().powf(n),
    })
}

/// `y = r/q` in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalY {
    pub r: i64,
    pub q: u64,
}

/// `y = log10((1 - p)/p)`.
pub fn ratio_exponent(p: f64) -> f64 {
    log10_complement(p) - p.log10()
}

/// Heuristic rationality test for `y = log10((1-p)/p)`: the smallest
/// `q <= q_max` with `|y - r/q| < tol`, confirmed by the periodicity
/// `S(x_{n+q}) = S(x_n)` on a short spectrum. Exact rationality cannot be
/// decided from a float; `None` means "irrational up to `q_max`".
pub fn detect_rational_y(p: f64, q_max: u64, tol: f64) -> Result<Option<RationalY>> {
    if !(p > 0.0 && p < 1.0) {
        return invalid(format!("p must lie in (0, 1), got {p}"));
    }
    if q_max < 1 {
        return invalid("q_max must be at least 1");
    }
    let y = ratio_exponent(p);
    for q in 1..=q_max {
        let r = (y * q as f64).round();
        if (y - r / q as f64).abs() < tol {
            let candidate = RationalY { r: r as i64, q };
            return Ok(significands_periodic(p, q, tol).then_some(candidate));
        }
    }
    Ok(None)
}

fn significands_periodic(p: f64, q: u64, tol: f64) -> bool {
    let levels = 3 * q + 3;
    let Ok(spec) = fixed_proportion_spectrum(levels, p) else {
        return false;
    };
    if spec.entries.len() == 1 {
        return true;
    }
    let slack = (tol * levels as f64).max(1e-9);
    spec.entries
        .iter()
        .zip(spec.entries.iter().skip(q as usize))
        .all(|(a, b)| {
            let d = b.log_length.log10() - a.log_length.log10();
            (d - d.round()).abs() <= slack
        })
}

/// Continued-fraction convergents `r/q` of `y`, at most `depth` of them.
///
/// Stops early once a convergent reproduces `y` to double precision.
pub fn convergents(y: f64, depth: usize) -> Result<Vec<(i64, u64)>> {
    if depth > MAX_CONVERGENT_DEPTH {
        return invalid(format!(
            "depth must be at most {MAX_CONVERGENT_DEPTH}, got {depth}"
        ));
    }
    if !y.is_finite() {
        return invalid("y must be finite");
    }
    let mut out = Vec::with_capacity(depth);
    let (mut h_prev, mut h) = (0i128, 1i128);
    let (mut k_prev, mut k) = (1i128, 0i128);
    let mut x = y;
    for _ in 0..depth {
        let a = x.floor();
        let (h_next, k_next) = (a as i128 * h + h_prev, a as i128 * k + k_prev);
        if h_next.unsigned_abs() > i64::MAX as u128 || k_next > i64::MAX as i128 {
            break;
        }
        (h_prev, h, k_prev, k) = (h, h_next, k, k_next);
        out.push((h as i64, k as u64));
        let frac = x - a;
        let err = (y - h as f64 / k as f64).abs();
        if frac == 0.0 || err <= 4.0 * f64::EPSILON * y.abs().max(1.0) {
            break;
        }
        x = 1.0 / frac;
    }
    Ok(out)
}
