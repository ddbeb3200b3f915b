//! Significands, the Benford reference law and the `P_N(s)` statistic.
//!
//! Piece lengths are carried as base-10 logarithms ([`LogLength`]) from the
//! moment they are produced. After thousands of multiplicative cuts the
//! linear lengths underflow `f64`, while their logarithms stay well scaled
//! and keep the fractional part (which is all the significand depends on).

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Base-10 logarithm of a positive length.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogLength(f64);

impl LogLength {
    pub fn new(log10_value: f64) -> Result<Self> {
        if !log10_value.is_finite() {
            return invalid(format!("log-length must be finite, got {log10_value}"));
        }
        Ok(Self(log10_value))
    }

    /// Wraps a value the caller already knows is finite.
    #[inline]
    pub(crate) fn new_unchecked(log10_value: f64) -> Self {
        debug_assert!(log10_value.is_finite());
        Self(log10_value)
    }

    pub fn from_linear(x: f64) -> Result<Self> {
        if !(x.is_finite() && x > 0.0) {
            return invalid(format!("length must be positive and finite, got {x}"));
        }
        Ok(Self(x.log10()))
    }

    #[inline]
    pub fn log10(self) -> f64 {
        self.0
    }

    /// Linear length; underflows to zero for very short pieces.
    pub fn linear(self) -> f64 {
        10f64.powf(self.0)
    }

    /// Base-10 significand in `[1, 10)`.
    #[inline]
    pub fn significand(self) -> f64 {
        significand_from_log10(self.0)
    }

    /// Shift by an integer number of decades. The significand is unchanged.
    pub fn scale_by_decades(self, k: i32) -> Self {
        Self(self.0 + f64::from(k))
    }
}

/// Fractional part of `log10 x` in `[0, 1)`.
#[inline]
fn log_fraction(v: f64) -> f64 {
    let u = v - v.floor();
    // rounds to 1.0 for values just below an integer
    if u >= 1.0 {
        0.0
    } else {
        u
    }
}

// log10(2), ..., log10(9): digit boundaries in the log domain.
fn digit_thresholds() -> &'static [f64; 8] {
    static T: OnceLock<[f64; 8]> = OnceLock::new();
    T.get_or_init(|| std::array::from_fn(|i| ((i + 2) as f64).log10()))
}

/// Leading digit from the fractional part of `log10 x`.
///
/// Classifying in the log domain keeps exact powers on the right side of a
/// digit boundary: `10^log10(8)` evaluates to 7.999…, but `log10(8)` compares
/// equal to itself.
#[inline]
fn digit_from_fraction(u: f64) -> usize {
    1 + digit_thresholds().iter().take_while(|&&t| u >= t).count()
}

#[inline]
fn significand_from_log10(v: f64) -> f64 {
    let frac = v - v.floor();
    let s = 10f64.powf(frac);
    // frac can round to 1.0 for values just below an integer.
    if s >= 10.0 {
        1.0
    } else {
        s.max(1.0)
    }
}

/// Significand of the length in the given base, in `[1, base)`.
pub fn significand(log_length: LogLength, base: u32) -> Result<f64> {
    if base < 2 {
        return invalid(format!("base must be at least 2, got {base}"));
    }
    if base == 10 {
        return Ok(log_length.significand());
    }
    let b = f64::from(base);
    let t = log_length.0 / b.log10();
    let frac = t - t.floor();
    let s = b.powf(frac);
    Ok(if s >= b { 1.0 } else { s.max(1.0) })
}

/// Benford distribution function `log_base(s)` on `[1, base]`.
pub fn benford_cdf(s: f64, base: u32) -> Result<f64> {
    if base < 2 {
        return invalid(format!("base must be at least 2, got {base}"));
    }
    let b = f64::from(base);
    if !(1.0..=b).contains(&s) {
        return invalid(format!("s must lie in [1, {base}], got {s}"));
    }
    Ok(s.ln() / b.ln())
}

/// Benford probability of leading digit `d` in base 10.
#[inline]
pub fn benford_digit_probability(d: usize) -> f64 {
    debug_assert!((1..=9).contains(&d));
    (1.0 + 1.0 / d as f64).log10()
}

/// The first-digit law for a base.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenfordReference {
    pub base: u32,
}

impl Default for BenfordReference {
    fn default() -> Self {
        Self { base: 10 }
    }
}

impl BenfordReference {
    pub fn new(base: u32) -> Result<Self> {
        if base < 2 {
            return invalid(format!("base must be at least 2, got {base}"));
        }
        Ok(Self { base })
    }

    /// Probabilities of leading digits `1..base`.
    pub fn probabilities(&self) -> Vec<f64> {
        let ln_b = f64::from(self.base).ln();
        (1..self.base)
            .map(|d| (1.0 + 1.0 / f64::from(d)).ln() / ln_b)
            .collect()
    }
}

/// Indicator that the base-10 significand is at most `s`.
///
/// Equality counts: a significand of exactly `s` yields `true`.
pub fn phi_s(log_length: LogLength, s: f64) -> bool {
    s >= 10.0 || log_fraction(log_length.log10()) <= s.log10()
}

/// Weighted proportion of pieces whose significand is at most `s`.
pub fn empirical_pn(pieces: &[(LogLength, f64)], s: f64) -> Result<f64> {
    let mut hit = 0.0;
    let mut total = 0.0;
    for &(x, w) in pieces {
        if !(w >= 0.0 && w.is_finite()) {
            return invalid(format!("piece weight must be nonnegative, got {w}"));
        }
        total += w;
        if phi_s(x, s) {
            hit += w;
        }
    }
    if pieces.is_empty() || total <= 0.0 {
        return invalid("empirical P_N needs pieces with positive total weight");
    }
    Ok(hit / total)
}

/// Weighted first-digit histogram (with the default significand grid).
pub fn first_digit_histogram(pieces: &[(LogLength, f64)]) -> Result<DigitHistogram> {
    if pieces.is_empty() {
        return invalid("cannot build a histogram from no pieces");
    }
    let mut h = DigitHistogram::with_default_grid();
    for &(x, w) in pieces {
        if !(w >= 0.0 && w.is_finite()) {
            return invalid(format!("piece weight must be nonnegative, got {w}"));
        }
        h.add(x, w);
    }
    Ok(h)
}

/// Leading digit of a significand in `[1, 10)`.
#[inline]
pub fn leading_digit(significand: f64) -> usize {
    (significand as usize).clamp(1, 9)
}

fn log_points(points: &[f64]) -> Vec<f64> {
    points.iter().map(|p| p.log10()).collect()
}

/// Default significand grid `1.0, 1.1, ..., 9.9, 10.0`.
pub fn default_grid() -> Vec<f64> {
    (10..=100).map(|k| f64::from(k) / 10.0).collect()
}

/// Weighted first-digit counts with an optional significand CDF grid.
///
/// Histograms combine with [`DigitHistogram::merge`]; folding partial
/// histograms in a fixed unit order gives bit-identical totals regardless of
/// how the units were scheduled.
#[derive(Debug, Clone, PartialEq)]
pub struct DigitHistogram {
    digits: [f64; 9],
    total: f64,
    grid: Option<CdfGrid>,
}

#[derive(Debug, Clone, PartialEq)]
struct CdfGrid {
    points: Vec<f64>,
    log_points: Vec<f64>,
    // mass[k]: weight whose significand S satisfies points[k-1] < S <= points[k]
    mass: Vec<f64>,
}

impl Default for DigitHistogram {
    fn default() -> Self {
        Self::new()
    }
}

impl DigitHistogram {
    /// Histogram without a CDF grid.
    pub fn new() -> Self {
        Self {
            digits: [0.0; 9],
            total: 0.0,
            grid: None,
        }
    }

    pub fn with_default_grid() -> Self {
        Self::with_grid(default_grid()).expect("default grid is valid")
    }

    /// Histogram tracking `P(S <= s)` at each grid point. The grid must be
    /// strictly increasing inside `[1, 10]` and end at 10.
    pub fn with_grid(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("grid must be nonempty and strictly increasing");
        }
        if points[0] < 1.0 || *points.last().unwrap() != 10.0 {
            return invalid("grid must lie in [1, 10] and end at 10");
        }
        let n = points.len();
        Ok(Self {
            digits: [0.0; 9],
            total: 0.0,
            grid: Some(CdfGrid {
                log_points: log_points(&points),
                points,
                mass: vec![0.0; n],
            }),
        })
    }

    /// Adds a piece by its log-length.
    #[inline]
    pub fn add(&mut self, x: LogLength, weight: f64) {
        let u = log_fraction(x.log10());
        self.digits[digit_from_fraction(u) - 1] += weight;
        self.total += weight;
        if let Some(g) = &mut self.grid {
            let k = g.log_points.partition_point(|&p| p < u);
            g.mass[k.min(g.points.len() - 1)] += weight;
        }
    }

    /// Adds a piece by its significand in `[1, 10)`.
    pub fn add_significand(&mut self, s: f64, weight: f64) {
        self.digits[leading_digit(s) - 1] += weight;
        self.total += weight;
        if let Some(g) = &mut self.grid {
            let k = g.points.partition_point(|&p| p < s);
            g.mass[k.min(g.points.len() - 1)] += weight;
        }
    }

    /// Adds weight to a leading digit without significand detail. Drops the
    /// CDF grid, which can no longer be kept consistent.
    pub fn add_digit(&mut self, digit: usize, weight: f64) {
        assert!((1..=9).contains(&digit), "digit out of range: {digit}");
        self.digits[digit - 1] += weight;
        self.total += weight;
        self.grid = None;
    }

    pub fn digits(&self) -> &[f64; 9] {
        &self.digits
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// Digit proportions (counts divided by the total).
    pub fn proportions(&self) -> [f64; 9] {
        let mut p = self.digits;
        if self.total > 0.0 {
            p.iter_mut().for_each(|v| *v /= self.total);
        }
        p
    }

    /// Number of digits with positive weight.
    pub fn support_size(&self) -> usize {
        self.digits.iter().filter(|&&w| w > 0.0).count()
    }

    /// Largest `|proportion_d - log10(1 + 1/d)|` over the nine digits.
    pub fn max_benford_deviation(&self) -> f64 {
        self.proportions()
            .iter()
            .enumerate()
            .map(|(i, p)| (p - benford_digit_probability(i + 1)).abs())
            .fold(0.0, f64::max)
    }

    /// Cumulative weight at each grid point, `(s, weight with S <= s)`.
    pub fn cdf_grid(&self) -> Option<Vec<(f64, f64)>> {
        self.grid.as_ref().map(|g| {
            let mut acc = 0.0;
            g.points
                .iter()
                .zip(&g.mass)
                .map(|(&s, &m)| {
                    acc += m;
                    (s, acc)
                })
                .collect()
        })
    }

    /// `P_N(s)` at each grid point.
    pub fn pn_grid(&self) -> Option<Vec<(f64, f64)>> {
        let total = self.total;
        self.cdf_grid().map(|c| {
            c.into_iter()
                .map(|(s, w)| (s, if total > 0.0 { w / total } else { 0.0 }))
                .collect()
        })
    }

    /// All weights multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.digits.iter_mut().for_each(|v| *v *= factor);
        out.total *= factor;
        if let Some(g) = &mut out.grid {
            g.mass.iter_mut().for_each(|v| *v *= factor);
        }
        out
    }

    /// Adds another histogram into this one. Grids must match; a histogram
    /// without a grid absorbs one with a grid by dropping detail.
    pub fn merge(&mut self, other: &DigitHistogram) -> Result<()> {
        match (&mut self.grid, &other.grid) {
            (Some(a), Some(b)) => {
                if a.points != b.points {
                    return invalid("cannot merge histograms with different grids");
                }
                a.mass.iter_mut().zip(&b.mass).for_each(|(x, y)| *x += y);
            }
            (Some(_), None) if other.total > 0.0 => self.grid = None,
            _ => {}
        }
        self.digits
            .iter_mut()
            .zip(&other.digits)
            .for_each(|(x, y)| *x += y);
        self.total += other.total;
        Ok(())
    }

    /// Rows `(digit, weight, benford_expected)` for CSV export.
    pub fn csv_rows(&self) -> Vec<(usize, f64, f64)> {
        (1..=9)
            .map(|d| {
                (
                    d,
                    self.digits[d - 1],
                    self.total * benford_digit_probability(d),
                )
            })
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct HistogramWire {
    total: f64,
    digits: Vec<f64>,
    #[serde(default)]
    cdf_grid: Vec<[f64; 2]>,
}

impl Serialize for DigitHistogram {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        HistogramWire {
            total: self.total,
            digits: self.digits.to_vec(),
            cdf_grid: self
                .cdf_grid()
                .unwrap_or_default()
                .into_iter()
                .map(|(s, w)| [s, w])
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DigitHistogram {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let wire = HistogramWire::deserialize(deserializer)?;
        DigitHistogram::try_from(wire).map_err(D::Error::custom)
    }
}

impl TryFrom<HistogramWire> for DigitHistogram {
    type Error = Error;

    fn try_from(wire: HistogramWire) -> Result<Self> {
        let digits: [f64; 9] = wire.digits.try_into().map_err(|_| {
            Error::InvalidArgument("histogram needs exactly 9 digit weights".into())
        })?;
        if digits.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return invalid("digit weights must be nonnegative");
        }
        let grid = if wire.cdf_grid.is_empty() {
            None
        } else {
            let mut points = Vec::with_capacity(wire.cdf_grid.len());
            let mut mass = Vec::with_capacity(wire.cdf_grid.len());
            let mut prev = 0.0;
            for [s, w] in wire.cdf_grid {
                if w < prev {
                    return invalid("cdf_grid must be nondecreasing");
                }
                points.push(s);
                mass.push(w - prev);
                prev = w;
            }
            Some(CdfGrid {
                log_points: log_points(&points),
                points,
                mass,
            })
        };
        Ok(Self {
            digits,
            total: wire.total,
            grid,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn log_of(x: f64) -> LogLength {
        LogLength::from_linear(x).unwrap()
    }

    #[test]
    fn exact_powers_sit_on_their_digit() {
        // 10^log10(d) evaluates just below d for several d
        for d in 1..=9u32 {
            let x = LogLength::from_linear(f64::from(d)).unwrap();
            let mut h = DigitHistogram::with_default_grid();
            h.add(x, 1.0);
            assert_eq!(h.digits()[d as usize - 1], 1.0, "d = {d}");
            assert!(phi_s(x, f64::from(d)));
        }
        let eight = LogLength::new(3.0 * 2f64.log10()).unwrap();
        let mut h = DigitHistogram::new();
        h.add(eight, 1.0);
        assert_eq!(h.digits()[7], 1.0);
    }

    #[test]
    fn significand_decimal_shifts() {
        assert!((significand(log_of(325.0), 10).unwrap() - 3.25).abs() < 1e-12);
        assert_eq!(significand(log_of(1.0), 10).unwrap(), 1.0);
        assert!((significand(log_of(0.00275), 10).unwrap() - 2.75).abs() < 1e-12);
    }

    #[test]
    fn significand_other_base() {
        // 2^5 * 1.5 = 48 in base 2 has significand 1.5
        assert!((significand(log_of(48.0), 2).unwrap() - 1.5).abs() < 1e-12);
        assert!(significand(log_of(3.0), 1).is_err());
    }

    #[test]
    fn non_finite_log_length_rejected() {
        assert!(LogLength::new(f64::NAN).is_err());
        assert!(LogLength::new(f64::INFINITY).is_err());
        assert!(LogLength::from_linear(0.0).is_err());
    }

    #[test]
    fn benford_cdf_values() {
        assert_eq!(benford_cdf(1.0, 10).unwrap(), 0.0);
        assert!((benford_cdf(2.0, 10).unwrap() - std::f64::consts::LOG10_2).abs() < 1e-15);
        assert!((benford_cdf(10.0, 10).unwrap() - 1.0).abs() < 1e-15);
        assert!(benford_cdf(0.5, 10).is_err());
        assert!(benford_cdf(10.5, 10).is_err());
    }

    #[test]
    fn benford_probabilities_sum_to_one() {
        for base in [2, 3, 10, 16] {
            let p = BenfordReference::new(base).unwrap().probabilities();
            assert_eq!(p.len(), base as usize - 1);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn phi_s_boundary_counts() {
        assert!(phi_s(log_of(3.25), 5.0));
        assert!(!phi_s(log_of(3.25), 2.0));
        assert!(phi_s(log_of(1.0), 1.0));
    }

    #[test]
    fn empirical_pn_examples() {
        let same = vec![(log_of(3.25), 1.0), (log_of(32.5), 2.0)];
        assert_eq!(empirical_pn(&same, 5.0).unwrap(), 1.0);
        let pair = vec![(log_of(1.5), 1.0), (log_of(9.5), 1.0)];
        assert_eq!(empirical_pn(&pair, 2.0).unwrap(), 0.5);
        assert!(empirical_pn(&[], 2.0).is_err());
        assert!(empirical_pn(&[(log_of(2.0), 0.0)], 2.0).is_err());
        assert!(empirical_pn(&[(log_of(2.0), -1.0)], 2.0).is_err());
    }

    #[test]
    fn equal_pieces_give_step_function() {
        // p = 1/2, N = 10: every piece has length 2^-10
        let pieces: Vec<_> = (0..1024)
            .map(|_| (LogLength::new(-10.0 * 2f64.log10()).unwrap(), 1.0))
            .collect();
        let s0 = pieces[0].0.significand();
        assert_eq!(empirical_pn(&pieces, s0 - 1e-9).unwrap(), 0.0);
        assert_eq!(empirical_pn(&pieces, s0).unwrap(), 1.0);
    }

    #[test]
    fn histogram_examples() {
        let h = first_digit_histogram(&[(log_of(9.99), 1.0)]).unwrap();
        assert_eq!(h.digits()[8], 1.0);
        assert_eq!(h.total(), 1.0);

        let grid: Vec<_> = (1..=9).map(|d| (log_of(d as f64 + 0.5), 2.0)).collect();
        let h = first_digit_histogram(&grid).unwrap();
        for w in h.digits() {
            assert!((w - h.total() / 9.0).abs() < 1e-12);
        }
        assert!(first_digit_histogram(&[]).is_err());
    }

    #[test]
    fn cdf_grid_ends_at_total() {
        let pieces: Vec<_> = [1.0, 2.0, 5.5, 9.99]
            .iter()
            .map(|&x| (log_of(x), 1.5))
            .collect();
        let h = first_digit_histogram(&pieces).unwrap();
        let cdf = h.cdf_grid().unwrap();
        assert_eq!(cdf.last().unwrap(), &(10.0, h.total()));
        assert!(cdf.windows(2).all(|w| w[0].1 <= w[1].1));
        // S = 1.0 counts at s = 1.0, S = 2.0 at s = 2.0
        assert_eq!(cdf[0].1, 1.5);
        assert_eq!(cdf[10].1, 3.0);
    }

    #[test]
    fn json_round_trip_and_schema() {
        let pieces: Vec<_> = [1.2, 3.4, 7.7].iter().map(|&x| (log_of(x), 1.0)).collect();
        let h = first_digit_histogram(&pieces).unwrap();
        let json = serde_json::to_value(&h).unwrap();
        assert_eq!(json["total"], 3.0);
        assert_eq!(json["digits"].as_array().unwrap().len(), 9);
        assert_eq!(json["cdf_grid"].as_array().unwrap().len(), 91);
        let back: DigitHistogram = serde_json::from_value(json).unwrap();
        assert_eq!(back, h);
        let bad = serde_json::json!({"total": 1.0, "digits": [1.0, 0.0]});
        assert!(serde_json::from_value::<DigitHistogram>(bad).is_err());
    }

    #[test]
    fn merge_rejects_mismatched_grids() {
        let mut a = DigitHistogram::with_default_grid();
        let b = DigitHistogram::with_grid(vec![2.0, 10.0]).unwrap();
        assert!(a.merge(&b).is_err());
        let mut c = DigitHistogram::new();
        c.merge(&a).unwrap();
    }

    #[test]
    fn csv_rows_carry_expected_weights() {
        let mut h = DigitHistogram::new();
        h.add_digit(1, 10.0);
        let rows = h.csv_rows();
        assert_eq!(rows[0].0, 1);
        assert_eq!(rows[0].1, 10.0);
        assert!((rows[0].2 - 10.0 * 2f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn phi_s_matches_direct_comparison() {
        use rand::Rng;
        let mut rng = crate::rng::unit_rng(11, 0);
        for _ in 0..100_000 {
            let v: f64 = rng.random_range(-300.0..300.0);
            let s: f64 = rng.random_range(1.0..10.0);
            let x = LogLength::new(v).unwrap();
            let direct = 10f64.powf(v - v.floor());
            let direct = if direct >= 10.0 { 1.0 } else { direct };
            assert_eq!(phi_s(x, s), direct <= s);
        }
    }

    proptest! {
        #[test]
        fn significand_is_scale_invariant(v in -250.0f64..250.0, k in -40i32..40) {
            let x = LogLength::new(v).unwrap();
            let a = x.significand();
            let b = x.scale_by_decades(k).significand();
            prop_assert!((1.0..10.0).contains(&a));
            prop_assert!((a - b).abs() <= 1e-9 * a);
        }

        #[test]
        fn pn_is_monotone(logs in proptest::collection::vec(-20.0f64..20.0, 1..50), s1 in 1.0f64..10.0, s2 in 1.0f64..10.0) {
            let pieces: Vec<_> = logs.iter().map(|&v| (LogLength::new(v).unwrap(), 1.0)).collect();
            let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
            prop_assert!(empirical_pn(&pieces, lo).unwrap() <= empirical_pn(&pieces, hi).unwrap());
            prop_assert_eq!(empirical_pn(&pieces, 10.0 - 1e-12).unwrap(), 1.0);
        }

        #[test]
        fn merge_is_commutative(a in proptest::collection::vec(-10.0f64..10.0, 0..30), b in proptest::collection::vec(-10.0f64..10.0, 0..30)) {
            let build = |xs: &[f64]| {
                let mut h = DigitHistogram::with_default_grid();
                xs.iter().for_each(|&v| h.add(LogLength::new(v).unwrap(), 1.0));
                h
            };
            let (ha, hb) = (build(&a), build(&b));
            let mut ab = ha.clone();
            ab.merge(&hb).unwrap();
            let mut ba = hb.clone();
            ba.merge(&ha).unwrap();
            prop_assert_eq!(ab.clone(), ba);
            let sum: f64 = ab.digits().iter().sum();
            prop_assert!((sum - ab.total()).abs() <= 1e-9 * ab.total().max(1.0));
        }
    }
}
