//! Mellin transforms of cut densities on the Benford frequencies, the
//! product-convergence bounds built from them, and the epsilon schedule of
//! the non-Benford counterexample.
//!
//! For a density `f` on `(0, 1)` the transform at `1 - 2πiℓ/ln B` equals
//! `E[p^(-2πiℓ/ln B)]`, i.e. the `ℓ`-th Fourier coefficient of the law of
//! `log_B p` modulo 1. Products of independent cuts converge to Benford
//! exactly when the products of these coefficients vanish for every `ℓ ≠ 0`.

use std::f64::consts::{LN_2, PI, TAU};

use num_complex::Complex64;
use serde::Serialize;

use crate::density::CutDensity;
use crate::error::{invalid, Result};
use crate::quadrature::integrate_by_periods;

/// Absolute tolerance for transform quadrature.
pub const MELLIN_TOLERANCE: f64 = 1e-10;
/// Default truncation of the frequency sums.
pub const DEFAULT_ELL_MAX: u32 = 100;

// Lower cut-off for ln x when a density reaches down to 0: e^-45 < 3e-20.
const LOG_FLOOR: f64 = -45.0;

/// Transform value at frequency `ell`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MellinValue {
    pub ell: i64,
    pub value: Complex64,
}

impl MellinValue {
    pub fn modulus(&self) -> f64 {
        self.value.norm()
    }
}

fn angular_frequency(ell: i64, base: u32) -> f64 {
    TAU * ell as f64 / f64::from(base).ln()
}

fn check_args(ell: i64, base: u32) -> Result<()> {
    if ell == 0 {
        return invalid("the transform at ell = 0 is identically 1; use a nonzero frequency");
    }
    if base < 2 {
        return invalid(format!("base must be at least 2, got {base}"));
    }
    Ok(())
}

/// `M_f(1 - 2πiℓ/ln B)`. Closed form for the uniform density, adaptive
/// quadrature for everything else.
pub fn mellin_transform(f: &CutDensity, ell: i64, base: u32) -> Result<MellinValue> {
    check_args(ell, base)?;
    match f {
        CutDensity::Uniform => {
            let omega = angular_frequency(ell, base);
            Ok(MellinValue {
                ell,
                value: Complex64::new(1.0, -omega).inv(),
            })
        }
        _ => mellin_quadrature(f, ell, base),
    }
}

/// `M_f(1 - 2πiℓ/ln B)` by quadrature in `t = ln x`, split at the
/// oscillation periods of `e^(-iωt)`.
pub fn mellin_quadrature(f: &CutDensity, ell: i64, base: u32) -> Result<MellinValue> {
    check_args(ell, base)?;
    let omega = angular_frequency(ell, base);
    let period = TAU / omega.abs();
    let kernel = Complex64::new(1.0, -omega);
    let value = match f {
        CutDensity::Uniform => integrate_by_periods(
            &|t: f64| (kernel * t).exp(),
            LOG_FLOOR,
            0.0,
            period,
            MELLIN_TOLERANCE * 0.1,
        )?,
        CutDensity::Piecewise {
            breakpoints,
            heights,
        } => {
            let mut sum = Complex64::new(0.0, 0.0);
            let pieces = breakpoints
                .windows(2)
                .zip(heights)
                .filter(|(_, &h)| h > 0.0);
            let n = heights.len() as f64;
            for (w, &h) in pieces {
                let lo = if w[0] > 0.0 {
                    w[0].ln().max(LOG_FLOOR)
                } else {
                    LOG_FLOOR
                };
                let hi = w[1].ln();
                sum += integrate_by_periods(
                    &|t: f64| (kernel * t).exp() * h,
                    lo,
                    hi,
                    period,
                    MELLIN_TOLERANCE * 0.1 / n,
                )?;
            }
            sum
        }
        CutDensity::LogBox {
            center_log,
            epsilon,
        } => {
            // integrate in u = t - center so narrow boxes keep their width exactly
            let scale = 1.0 / (2.0 * epsilon);
            let phase = Complex64::new(0.0, -omega * center_log).exp();
            phase
                * integrate_by_periods(
                    &|u: f64| Complex64::new(0.0, -omega * u).exp() * scale,
                    -epsilon,
                    *epsilon,
                    period,
                    MELLIN_TOLERANCE * 0.1,
                )?
        }
    };
    Ok(MellinValue { ell, value })
}

/// Constant `C` in the decay estimate `|M_f(ℓ)| <= C / ℓ` (integration by
/// parts for piecewise-constant densities; `1/(ωε)` for log-boxes).
pub fn decay_constant(f: &CutDensity, base: u32) -> f64 {
    let per_ell = f64::from(base).ln() / TAU;
    match f {
        CutDensity::Uniform => per_ell,
        CutDensity::Piecewise {
            breakpoints,
            heights,
        } => {
            per_ell
                * breakpoints
                    .windows(2)
                    .zip(heights)
                    .map(|(w, h)| h * (w[0] + w[1]))
                    .sum::<f64>()
        }
        CutDensity::LogBox { epsilon, .. } => per_ell / epsilon,
    }
}

/// A frequency sum truncated at `ell_max`, with an estimate of what was cut.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncatedSum {
    pub value: f64,
    /// Estimate of `Σ_{|ℓ| > ell_max}` from the `C/ℓ` decay assumption;
    /// infinite when that assumption does not make the tail summable.
    pub tail_estimate: f64,
    pub ell_max: u32,
}

/// `|M_f(ℓ)|` for `ℓ = 1..=ell_max`.
pub fn mellin_moduli(f: &CutDensity, ell_max: u32, base: u32) -> Result<Vec<f64>> {
    (1..=i64::from(ell_max))
        .map(|ell| mellin_transform(f, ell, base).map(|m| m.modulus()))
        .collect()
}

/// Upper bound for the modulus of the Mellin condition sum,
/// `Σ_{0<|ℓ|<=ell_max} Π_{m=1}^{N} max(|M_f|, |M_g|)(1 - 2πiℓ/ln 10)`.
///
/// `g` is the density of `1 - p` (for symmetric cuts pass `f` twice).
pub fn mellin_condition_sum(
    f: &CutDensity,
    g: &CutDensity,
    levels: u32,
    ell_max: u32,
) -> Result<TruncatedSum> {
    if levels < 1 {
        return invalid("levels must be at least 1");
    }
    if ell_max < 1 {
        return invalid("ell_max must be at least 1");
    }
    let mf = mellin_moduli(f, ell_max, 10)?;
    let mg = if f == g {
        mf.clone()
    } else {
        mellin_moduli(g, ell_max, 10)?
    };
    // |M(-ℓ)| = |M(ℓ)| for real densities, hence the factor 2.
    let value = 2.0
        * mf.iter()
            .zip(&mg)
            .map(|(a, b)| a.max(*b).powi(levels as i32))
            .sum::<f64>();
    let c = decay_constant(f, 10).max(decay_constant(g, 10));
    let tail_estimate = tail_estimate(&vec![c; levels as usize], ell_max);
    Ok(TruncatedSum {
        value,
        tail_estimate,
        ell_max,
    })
}

/// `Σ_{0<|ℓ|<=ell_max} Π_m |M_{f_m}(1 - 2πiℓ/ln 10)|` for per-level densities.
pub fn mellin_condition_sum_varying(fs: &[CutDensity], ell_max: u32) -> Result<TruncatedSum> {
    if fs.is_empty() {
        return invalid("need at least one density");
    }
    if ell_max < 1 {
        return invalid("ell_max must be at least 1");
    }
    // Reuse moduli for repeated densities (N copies of the same law is common).
    let mut cache: Vec<(&CutDensity, Vec<f64>)> = Vec::new();
    let mut products = vec![1.0; ell_max as usize];
    for f in fs {
        let idx = match cache.iter().position(|(g, _)| *g == f) {
            Some(i) => i,
            None => {
                cache.push((f, mellin_moduli(f, ell_max, 10)?));
                cache.len() - 1
            }
        };
        products
            .iter_mut()
            .zip(&cache[idx].1)
            .for_each(|(p, m)| *p *= m);
    }
    let value = 2.0 * products.iter().sum::<f64>();
    let constants: Vec<f64> = fs.iter().map(|f| decay_constant(f, 10)).collect();
    Ok(TruncatedSum {
        value,
        tail_estimate: tail_estimate(&constants, ell_max),
        ell_max,
    })
}

/// The factor `Σ_{ℓ≠0} Π_m |M_{f_m}|` of the general product-convergence
/// bound `|Prob(log10 S ∈ [a,b]) - (b - a)| <= (b - a) · Σ_{ℓ≠0} Π_m |M_{f_m}|`,
/// truncated at `ell_max`. The caller multiplies by `b - a`.
pub fn product_error_bound_general(fs: &[CutDensity], ell_max: u32) -> Result<TruncatedSum> {
    mellin_condition_sum_varying(fs, ell_max)
}

fn tail_estimate(constants: &[f64], ell_max: u32) -> f64 {
    // Σ_{ℓ>L} 2 Π_m min(1, C_m/ℓ): explicit until every factor is below 1,
    // then Σ_{ℓ>=ℓ0} K ℓ^-N <= K ℓ0^(1-N)/(N-1) + K ℓ0^-N.
    let n = constants.len() as i32;
    let c_max = constants.iter().cloned().fold(0.0, f64::max);
    let mut ell = f64::from(ell_max) + 1.0;
    let mut sum = 0.0;
    while ell <= c_max {
        if ell > 1e7 {
            return f64::INFINITY;
        }
        sum += constants
            .iter()
            .map(|c| (c / ell).min(1.0))
            .product::<f64>();
        ell += 1.0;
    }
    if n < 2 {
        return f64::INFINITY;
    }
    let k_log: f64 = constants.iter().map(|c| c.ln()).sum();
    let tail = (k_log - f64::from(n - 1) * ell.ln()).exp() / f64::from(n - 1)
        + (k_log - f64::from(n) * ell.ln()).exp();
    2.0 * (sum + tail)
}

/// `ζ(n) - 1 = Σ_{k>=2} k^-n` by direct summation plus an Euler–Maclaurin tail.
pub fn zeta_minus_one(n: u32) -> Result<f64> {
    if n < 2 {
        return invalid(format!("zeta diverges at {n}"));
    }
    const K: u32 = 64;
    let s = f64::from(n);
    let k = f64::from(K);
    let mut sum: f64 = (2..K).rev().map(|j| f64::from(j).powf(-s)).sum();
    sum += k.powf(1.0 - s) / (s - 1.0) + 0.5 * k.powf(-s) + s * k.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * k.powf(-s - 3.0) / 720.0;
    Ok(sum)
}

pub fn zeta(n: u32) -> Result<f64> {
    Ok(1.0 + zeta_minus_one(n)?)
}

/// Distribution error bound for the significand of a product of `levels`
/// independent uniform cuts:
/// `|Prob(S <= s) - log10 s| <= (1/2.9^N + (ζ(N) - 1)/2.7^N) · 2 log10 s`,
/// valid for `N >= 4`.
pub fn product_error_bound_uniform(levels: u32, s: f64) -> Result<f64> {
    if levels < 4 {
        return invalid(format!(
            "the uniform product bound holds for N >= 4, got N = {levels}"
        ));
    }
    if !(1.0..10.0).contains(&s) {
        return invalid(format!("s must lie in [1, 10), got {s}"));
    }
    let n = levels as i32;
    let factor = 2.9f64.powi(-n) + zeta_minus_one(levels)? * 2.7f64.powi(-n);
    Ok(factor * 2.0 * s.log10())
}

/// Fourier coefficient of the log-box density centred at `ln(1/2)`:
/// `(1/2ε) ∫ e^(-2πiℓx) dx = e^(-2πiℓ ln(1/2)) · sin(2πℓε)/(2πℓε)`.
pub fn fourier_coefficient_logbox(epsilon: f64, ell: i64) -> Result<Complex64> {
    if !(epsilon > 0.0 && epsilon < LN_2) {
        return invalid(format!("epsilon must lie in (0, ln 2), got {epsilon}"));
    }
    if ell == 0 {
        return invalid("frequency must be nonzero");
    }
    let x = TAU * ell as f64 * epsilon;
    let phase = Complex64::new(0.0, TAU * ell as f64 * LN_2).exp();
    Ok(phase * (x.sin() / x))
}

/// Half-widths `ε_n` of the counterexample log-boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonSchedule {
    pub delta: f64,
    epsilons: Vec<f64>,
}

const SCHEDULE_SAFETY: f64 = 0.99;

impl EpsilonSchedule {
    /// `ε_n = 0.99 · min(sqrt(3/(20π²(n+1)²)), δ/2^(n+1), ln(2)/2)`, `n >= 1`.
    pub fn epsilon(&self, n: usize) -> f64 {
        schedule_term(self.delta, n)
    }

    /// `ε_1, ..., ε_{n_max}`.
    pub fn epsilons(&self) -> &[f64] {
        &self.epsilons
    }

    /// Log-box densities for levels `1..=n_max`.
    pub fn densities(&self) -> Result<Vec<CutDensity>> {
        self.epsilons
            .iter()
            .map(|&e| CutDensity::log_box_half(e))
            .collect()
    }

    /// `Π_{n<=N} |φ̂_n(1)|` for `N = 1..=n_max`.
    pub fn partial_fourier_products(&self) -> Result<Vec<f64>> {
        let mut acc = 1.0;
        self.epsilons
            .iter()
            .map(|&e| {
                acc *= fourier_coefficient_logbox(e, 1)?.norm();
                Ok(acc)
            })
            .collect()
    }
}

fn schedule_term(delta: f64, n: usize) -> f64 {
    let m = (n + 1) as f64;
    let frequency_cap = (3.0 / (20.0 * PI * PI * m * m)).sqrt();
    let ratio_cap = delta / 2f64.powi(n as i32 + 1);
    let support_cap = LN_2 / 2.0;
    SCHEDULE_SAFETY * frequency_cap.min(ratio_cap).min(support_cap)
}

/// Epsilon schedule for the non-Benford per-level construction.
pub fn counterexample_schedule(delta: f64, n_max: usize) -> Result<EpsilonSchedule> {
    if !(delta > 0.0 && delta < 1.0) {
        return invalid(format!("delta must lie in (0, 1), got {delta}"));
    }
    if n_max == 0 {
        return invalid("schedule needs at least one level");
    }
    let epsilons = (1..=n_max).map(|n| schedule_term(delta, n)).collect();
    Ok(EpsilonSchedule { delta, epsilons })
}
