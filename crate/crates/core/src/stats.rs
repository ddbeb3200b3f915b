//! Goodness-of-fit against Benford and equidistribution measurements.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::significand::{benford_digit_probability, DigitHistogram, LogLength};

/// 95% critical value of the chi-square distribution with 8 degrees of freedom.
pub const CHI2_8_CRITICAL_95: f64 = 15.507;
/// Degrees of freedom for a nine-digit first-digit test.
pub const FIRST_DIGIT_DOF: u32 = 8;
/// Number of grid points used by [`discrepancy_mod1`].
pub const DISCREPANCY_GRID_POINTS: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub chi_square: f64,
    pub dof: u32,
    pub max_digit_deviation: f64,
    pub ks_distance: f64,
    /// Total weight of the histogram (the piece count for unit weights).
    pub n_pieces: f64,
}

/// First-digit chi-square `Σ_i (X_i N - Y_i N)² / (N Y_i)` with `X_i` the
/// observed digit frequencies, `Y_i = log10(1 + 1/i)` and `N` the total.
pub fn chi_square_benford(h: &DigitHistogram) -> Result<GofReport> {
    let n = h.total();
    if n.is_nan() || n <= 0.0 {
        return invalid("chi-square needs a histogram with positive total");
    }
    let chi_square = h
        .digits()
        .iter()
        .enumerate()
        .map(|(i, &observed)| {
            let expected = n * benford_digit_probability(i + 1);
            (observed - expected).powi(2) / expected
        })
        .sum();
    Ok(GofReport {
        chi_square,
        dof: FIRST_DIGIT_DOF,
        max_digit_deviation: h.max_benford_deviation(),
        ks_distance: ks_distance_histogram(h),
        n_pieces: n,
    })
}

/// `sup |P_N(s) - log10 s|` over the histogram's grid, or over the digit
/// boundaries `s = 2..=10` when it has none.
pub fn ks_distance_histogram(h: &DigitHistogram) -> f64 {
    let total = h.total();
    if total <= 0.0 {
        return 0.0;
    }
    match h.cdf_grid() {
        Some(grid) => grid
            .iter()
            .map(|&(s, w)| (w / total - s.log10()).abs())
            .fold(0.0, f64::max),
        None => {
            let mut acc = 0.0;
            h.digits()
                .iter()
                .enumerate()
                .map(|(i, w)| {
                    acc += w;
                    (acc / total - ((i + 2) as f64).log10()).abs()
                })
                .fold(0.0, f64::max)
        }
    }
}

/// Exact Kolmogorov distance between the significand law of unweighted
/// pieces and Benford, by a sorted sweep over `log10 S`.
pub fn ks_distance_pieces(pieces: &[LogLength]) -> Result<f64> {
    if pieces.is_empty() {
        return invalid("KS distance needs at least one piece");
    }
    let mut u: Vec<f64> = pieces.iter().map(|x| x.significand().log10()).collect();
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in u.iter().enumerate() {
        let below = i as f64 / n;
        let at = (i + 1) as f64 / n;
        d = d.max((at - v).abs()).max((v - below).abs());
    }
    Ok(d.min(1.0))
}

/// Weighted discrepancy of fractional parts: `sup_t |F_emp(t) - t|` over
/// `t ∈ {0, 0.01, ..., 1}`.
pub fn discrepancy_mod1(values: &[(f64, f64)]) -> Result<f64> {
    if values.is_empty() {
        return invalid("discrepancy needs at least one value");
    }
    let mut fracs = Vec::with_capacity(values.len());
    let mut total = 0.0;
    for &(v, w) in values {
        if !(w >= 0.0 && w.is_finite() && v.is_finite()) {
            return invalid("values must be finite with nonnegative weights");
        }
        fracs.push((v - v.floor(), w));
        total += w;
    }
    if total <= 0.0 {
        return invalid("discrepancy needs positive total weight");
    }
    fracs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let steps = DISCREPANCY_GRID_POINTS - 1;
    let mut idx = 0;
    let mut acc = 0.0;
    let mut d: f64 = 0.0;
    for k in 0..=steps {
        let t = k as f64 / steps as f64;
        while idx < fracs.len() && fracs[idx].0 <= t {
            acc += fracs[idx].1;
            idx += 1;
        }
        d = d.max((acc / total - t).abs());
    }
    Ok(d)
}

/// Values of `P_N(s)` at a fixed `s` across independent trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSeries {
    pub s: f64,
    /// Depth or piece count the trials were run at, when meaningful.
    pub levels: Option<usize>,
    pub values: Vec<f64>,
}

/// Sample mean and unbiased sample variance.
pub fn mean_variance_series(series: &TrialSeries) -> Result<(f64, f64)> {
    let v = &series.values;
    if v.len() < 2 {
        return invalid("mean and variance need at least two trials");
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.iter().all(|&x| x == v[0]) {
        return Ok((v[0], 0.0));
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, var))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::unit_rng;
    use rand::Rng;

    fn benford_exact(n: f64) -> DigitHistogram {
        let mut h = DigitHistogram::new();
        for d in 1..=9 {
            h.add_digit(d, n * benford_digit_probability(d));
        }
        h
    }

    #[test]
    fn exact_benford_has_zero_chi_square() {
        let r = chi_square_benford(&benford_exact(1000.0)).unwrap();
        assert!(r.chi_square < 1e-20);
        assert!(r.ks_distance < 1e-15);
        assert_eq!(r.dof, 8);
        assert!(chi_square_benford(&DigitHistogram::new()).is_err());
    }

    #[test]
    fn all_mass_on_nine() {
        // oracle: N (1 - Y9)²/Y9 + N Σ_{i<9} Y_i simplifies to N (1/Y9 - 1)
        let mut h = DigitHistogram::new();
        h.add_digit(9, 100.0);
        let y9 = (10.0f64 / 9.0).log10();
        let r = chi_square_benford(&h).unwrap();
        assert!((r.chi_square - 100.0 * (1.0 / y9 - 1.0)).abs() < 1e-9);
        assert!((r.chi_square - 2085.43).abs() < 0.01);
    }

    #[test]
    fn chi_square_is_linear_in_total() {
        let mut h = DigitHistogram::new();
        for (d, w) in [(1, 30.0), (2, 20.0), (5, 11.0), (9, 2.0)] {
            h.add_digit(d, w);
        }
        let base = chi_square_benford(&h).unwrap().chi_square;
        for lambda in [0.5, 3.0, 1e6] {
            let scaled = chi_square_benford(&h.scaled(lambda)).unwrap().chi_square;
            assert!((scaled / lambda - base).abs() <= 1e-12 * base);
        }
    }

    #[test]
    fn benford_samples_average_eight() {
        let reps = 500;
        let mut sum = 0.0;
        for r in 0..reps {
            let mut rng = unit_rng(77, r);
            let mut h = DigitHistogram::new();
            for _ in 0..10_000 {
                let u: f64 = rng.random();
                h.add_digit(10f64.powf(u) as usize, 1.0);
            }
            sum += chi_square_benford(&h).unwrap().chi_square;
        }
        let mean = sum / reps as f64;
        assert!((7.0..=9.0).contains(&mean), "{mean}");
    }

    #[test]
    fn ks_examples() {
        let eps = 1e-3;
        let one = [LogLength::from_linear(1.0 + eps).unwrap()];
        let d = ks_distance_pieces(&one).unwrap();
        assert!((d - (1.0 - (1.0 + eps).log10())).abs() < 1e-12);
        let mut h = DigitHistogram::with_default_grid();
        h.add(one[0], 1.0);
        assert!(ks_distance_histogram(&h) > 0.95);
        assert!(ks_distance_pieces(&[]).is_err());
    }

    #[test]
    fn ks_of_uniform_product_is_small() {
        let mut rng = unit_rng(8, 0);
        let pieces: Vec<LogLength> = (0..1_000_000)
            .map(|_| {
                let s: f64 = (0..10).map(|_| (1.0 - rng.random::<f64>()).log10()).sum();
                LogLength::new(s).unwrap()
            })
            .collect();
        assert!(ks_distance_pieces(&pieces).unwrap() <= 0.005);
    }

    #[test]
    fn discrepancy_examples() {
        let m = 1000;
        let lattice: Vec<_> = (0..m).map(|k| (k as f64 / m as f64, 1.0)).collect();
        assert!(discrepancy_mod1(&lattice).unwrap() <= 1.0 / m as f64 + 1e-12);
        let rotation: Vec<_> = (1..=10_000)
            .map(|n| (n as f64 * 2f64.log10(), 1.0))
            .collect();
        assert!(discrepancy_mod1(&rotation).unwrap() <= 0.01);
        let point = vec![(0.5, 1.0); 10];
        assert!((discrepancy_mod1(&point).unwrap() - 0.5).abs() < 1e-12);
        assert!(discrepancy_mod1(&[]).is_err());
        assert!(discrepancy_mod1(&[(0.1, 0.0)]).is_err());
    }

    #[test]
    fn series_statistics() {
        let constant = TrialSeries {
            s: 2.0,
            levels: None,
            values: vec![0.1; 7],
        };
        assert_eq!(mean_variance_series(&constant).unwrap(), (0.1, 0.0));
        let s = TrialSeries {
            s: 2.0,
            levels: Some(3),
            values: vec![0.2, 0.4],
        };
        let (m, v) = mean_variance_series(&s).unwrap();
        assert!((m - 0.3).abs() < 1e-15 && (v - 0.02).abs() < 1e-15);
        let short = TrialSeries {
            s: 2.0,
            levels: None,
            values: vec![0.3],
        };
        assert!(mean_variance_series(&short).is_err());
    }
}
