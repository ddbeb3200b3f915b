//! Terms of the determinant expansion and fixed-point statistics of random
//! permutations.
//!
//! The term for a permutation `σ` is `Π_p a_{p,σ(p)}`. Signs are ignored;
//! only the lengths of the terms matter for their significands.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::CutDensity;
use crate::error::{invalid, Result};
use crate::rng::unit_rng;
use crate::significand::{DigitHistogram, LogLength};

pub const MAX_EXHAUSTIVE_N: usize = 10;
pub const MAX_SAMPLED_TERMS: u64 = 100_000_000;
pub const MAX_RENCONTRES_N: u64 = 20;

/// A square matrix with strictly positive entries, stored as `log10` values
/// in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSample {
    n: usize,
    log10_entries: Vec<f64>,
}

impl MatrixSample {
    pub fn from_entries(n: usize, entries: &[f64]) -> Result<Self> {
        if n < 2 {
            return invalid("matrix dimension must be at least 2");
        }
        if entries.len() != n * n {
            return invalid(format!("expected {} entries, got {}", n * n, entries.len()));
        }
        if entries.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return invalid("matrix entries must be finite and strictly positive");
        }
        Ok(Self {
            n,
            log10_entries: entries.iter().map(|a| a.log10()).collect(),
        })
    }

    /// Entries drawn i.i.d. from `density` (the cut position of each draw).
    pub fn random<R: Rng + ?Sized>(n: usize, density: &CutDensity, rng: &mut R) -> Result<Self> {
        if n < 2 {
            return invalid("matrix dimension must be at least 2");
        }
        let log10_entries = (0..n * n).map(|_| density.sample(rng).log10_p).collect();
        Ok(Self { n, log10_entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn at(&self, row: usize, col: usize) -> f64 {
        self.log10_entries[row * self.n + col]
    }

    /// Same matrix with its rows reordered: row `i` of the result is row
    /// `order[i]` of `self`.
    pub fn permute_rows(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.n];
        if order.len() != self.n
            || order
                .iter()
                .any(|&r| r >= self.n || std::mem::replace(&mut seen[r], true))
        {
            return invalid("row order must be a permutation");
        }
        let mut log10_entries = Vec::with_capacity(self.n * self.n);
        for &r in order {
            log10_entries.extend_from_slice(&self.log10_entries[r * self.n..(r + 1) * self.n]);
        }
        Ok(Self {
            n: self.n,
            log10_entries,
        })
    }

    fn term(&self, sigma: &[usize]) -> f64 {
        sigma.iter().enumerate().map(|(p, &c)| self.at(p, c)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum PermMode {
    /// Every permutation of `S_n`.
    Exhaustive,
    /// `count` permutations drawn uniformly with Fisher–Yates.
    Sampled { count: u64, seed: u64 },
}

/// Visits `log10` of every term of the expansion.
///
/// Exhaustive mode walks `S_n` with Heap's algorithm, updating the running
/// sum by the change of the two swapped factors. The sum is recomputed from
/// scratch periodically so rounding cannot drift.
pub fn for_each_term<F: FnMut(f64)>(
    sample: &MatrixSample,
    mode: PermMode,
    mut visit: F,
) -> Result<u64> {
    let n = sample.n;
    match mode {
        PermMode::Exhaustive => {
            if n > MAX_EXHAUSTIVE_N {
                return invalid(format!(
                    "exhaustive mode supports n <= {MAX_EXHAUSTIVE_N}, got {n}"
                ));
            }
            let mut sigma: Vec<usize> = (0..n).collect();
            let mut c = vec![0usize; n];
            let mut sum = sample.term(&sigma);
            let mut count = 1u64;
            visit(sum);
            let mut i = 1;
            while i < n {
                if c[i] < i {
                    let j = if i % 2 == 0 { 0 } else { c[i] };
                    let (a, b) = (sigma[i], sigma[j]);
                    sum += sample.at(i, b) + sample.at(j, a) - sample.at(i, a) - sample.at(j, b);
                    sigma.swap(i, j);
                    count += 1;
                    if count % 4096 == 0 {
                        sum = sample.term(&sigma);
                    }
                    visit(sum);
                    c[i] += 1;
                    i = 1;
                } else {
                    c[i] = 0;
                    i += 1;
                }
            }
            Ok(count)
        }
        PermMode::Sampled { count, seed } => {
            if count > MAX_SAMPLED_TERMS {
                return invalid(format!(
                    "sampled mode supports at most {MAX_SAMPLED_TERMS} terms"
                ));
            }
            let mut rng = unit_rng(seed, 0);
            let mut sigma: Vec<usize> = (0..n).collect();
            for _ in 0..count {
                sigma.shuffle(&mut rng);
                visit(sample.term(&sigma));
            }
            Ok(count)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermHistogram {
    pub histogram: DigitHistogram,
    pub term_count: u64,
}

/// First-digit histogram of the terms of one matrix.
pub fn determinant_terms(sample: &MatrixSample, mode: PermMode) -> Result<TermHistogram> {
    let mut histogram = DigitHistogram::new();
    let term_count = for_each_term(sample, mode, |t| {
        histogram.add(LogLength::new_unchecked(t), 1.0)
    })?;
    Ok(TermHistogram {
        histogram,
        term_count,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeterminantReport {
    pub n: usize,
    pub matrices: u64,
    pub mode: PermMode,
    pub term_count: u64,
    pub histogram: DigitHistogram,
    pub max_deviation: f64,
}

/// Pools term histograms over `matrices` random matrices; matrix `m` uses
/// stream `m` of `seed`. In sampled mode each matrix derives its own
/// permutation seed.
pub fn pooled_determinant_terms(
    n: usize,
    matrices: u64,
    density: &CutDensity,
    mode: PermMode,
    seed: u64,
) -> Result<DeterminantReport> {
    if matrices < 1 {
        return invalid("need at least one matrix");
    }
    let parts: Vec<TermHistogram> = (0..matrices)
        .into_par_iter()
        .map(|m| {
            let mut rng = unit_rng(seed, m);
            let sample = MatrixSample::random(n, density, &mut rng)?;
            let mode = match mode {
                PermMode::Sampled { count, .. } => PermMode::Sampled {
                    count,
                    seed: rng.random(),
                },
                e => e,
            };
            determinant_terms(&sample, mode)
        })
        .collect::<Result<_>>()?;
    let mut histogram = DigitHistogram::new();
    let mut term_count = 0;
    for p in &parts {
        histogram.merge(&p.histogram)?;
        term_count += p.term_count;
    }
    Ok(DeterminantReport {
        n,
        matrices,
        mode,
        term_count,
        max_deviation: histogram.max_benford_deviation(),
        histogram,
    })
}

fn derangements(m: u64) -> BigUint {
    let (mut prev, mut cur) = (BigUint::one(), BigUint::zero());
    if m == 0 {
        return prev;
    }
    for k in 2..=m {
        let next = (&cur + &prev) * (k - 1);
        prev = cur;
        cur = next;
    }
    cur
}

fn binomial(n: u64, k: u64) -> BigUint {
    (0..k).fold(BigUint::one(), |acc, i| acc * (n - i) / (i + 1))
}

/// Permutations of `n` points with exactly `k` fixed points,
/// `C(n, k) · D_{n-k}`.
pub fn rencontres_count(n: u64, k: u64) -> Result<BigUint> {
    if n > MAX_RENCONTRES_N {
        return invalid(format!("n must be at most {MAX_RENCONTRES_N}"));
    }
    if k > n {
        return invalid("k must not exceed n");
    }
    Ok(binomial(n, k) * derangements(n - k))
}

/// Empirical law of `K = #{p : σ(p) = τ(p)}` for independent uniform `σ, τ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedFactorStats {
    pub n: usize,
    pub trials: u64,
    /// `counts[k]` is the number of trials with `K = k`.
    pub counts: Vec<u64>,
    pub mean: f64,
    pub variance: f64,
}

impl SharedFactorStats {
    pub fn probability(&self, k: usize) -> f64 {
        self.counts.get(k).copied().unwrap_or(0) as f64 / self.trials as f64
    }
}

const TRIALS_PER_STREAM: u64 = 4096;

pub fn shared_factor_distribution(n: usize, trials: u64, seed: u64) -> Result<SharedFactorStats> {
    if n < 2 {
        return invalid("n must be at least 2");
    }
    if trials < 2 {
        return invalid("need at least two trials");
    }
    let chunks = trials.div_ceil(TRIALS_PER_STREAM);
    let partial: Vec<Vec<u64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = unit_rng(seed, c);
            let mut counts = vec![0u64; n + 1];
            let mut sigma: Vec<usize> = (0..n).collect();
            let mut tau = sigma.clone();
            let todo = TRIALS_PER_STREAM.min(trials - c * TRIALS_PER_STREAM);
            for _ in 0..todo {
                sigma.shuffle(&mut rng);
                tau.shuffle(&mut rng);
                counts[sigma.iter().zip(&tau).filter(|(a, b)| a == b).count()] += 1;
            }
            counts
        })
        .collect();
    let mut counts = vec![0u64; n + 1];
    for p in partial {
        counts.iter_mut().zip(p).for_each(|(a, b)| *a += b);
    }
    let t = trials as f64;
    let mean = counts
        .iter()
        .enumerate()
        .map(|(k, &c)| k as f64 * c as f64)
        .sum::<f64>()
        / t;
    let variance = counts
        .iter()
        .enumerate()
        .map(|(k, &c)| (k as f64 - mean).powi(2) * c as f64)
        .sum::<f64>()
        / (t - 1.0);
    Ok(SharedFactorStats {
        n,
        trials,
        counts,
        mean,
        variance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;

    fn all_perms(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in all_perms(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    fn sorted_terms(sample: &MatrixSample) -> Vec<f64> {
        let mut v = Vec::new();
        for_each_term(sample, PermMode::Exhaustive, |t| v.push(t)).unwrap();
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn two_by_two() {
        let s = MatrixSample::from_entries(2, &[2.0, 3.0, 5.0, 7.0]).unwrap();
        let terms = sorted_terms(&s);
        assert_eq!(terms.len(), 2);
        assert!((terms[0] - 14f64.log10()).abs() < 1e-15);
        assert!((terms[1] - 15f64.log10()).abs() < 1e-15);
    }

    #[test]
    fn exhaustive_matches_brute_force() {
        let mut rng = unit_rng(3, 0);
        for n in 2..=7 {
            let s = MatrixSample::random(n, &CutDensity::Uniform, &mut rng).unwrap();
            let mut brute: Vec<f64> = all_perms(n).iter().map(|p| s.term(p)).collect();
            brute.sort_by(f64::total_cmp);
            let heap = sorted_terms(&s);
            assert_eq!(heap.len(), brute.len());
            for (a, b) in heap.iter().zip(&brute) {
                assert!((a - b).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn exhaustive_count_is_factorial() {
        let mut rng = unit_rng(4, 0);
        let mut fact = 1u64;
        for n in 2..=8 {
            fact *= n as u64;
            let s = MatrixSample::random(n, &CutDensity::Uniform, &mut rng).unwrap();
            assert_eq!(
                determinant_terms(&s, PermMode::Exhaustive)
                    .unwrap()
                    .term_count,
                fact
            );
        }
        let s = MatrixSample::random(11, &CutDensity::Uniform, &mut rng).unwrap();
        assert!(determinant_terms(&s, PermMode::Exhaustive).is_err());
    }

    #[test]
    fn constant_matrix_is_one_digit() {
        let s = MatrixSample::from_entries(7, &[10.0; 49]).unwrap();
        let h = determinant_terms(&s, PermMode::Exhaustive)
            .unwrap()
            .histogram;
        assert_eq!(h.digits()[0], 5040.0);
        assert_eq!(h.support_size(), 1);
    }

    #[test]
    fn row_permutation_invariance() {
        let mut rng = unit_rng(5, 0);
        let s = MatrixSample::random(6, &CutDensity::Uniform, &mut rng).unwrap();
        let p = s.permute_rows(&[3, 1, 5, 0, 2, 4]).unwrap();
        for (a, b) in sorted_terms(&s).iter().zip(&sorted_terms(&p)) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(s.permute_rows(&[0, 0, 1, 2, 3, 4]).is_err());
    }

    #[test]
    fn n6_histogram_decreases() {
        let r =
            pooled_determinant_terms(6, 50, &CutDensity::Uniform, PermMode::Exhaustive, 6).unwrap();
        assert_eq!(r.term_count, 50 * 720);
        let d = r.histogram.digits();
        assert!(d.windows(2).all(|w| w[0] > w[1]), "{d:?}");
    }

    #[test]
    fn sampled_mode() {
        let mut rng = unit_rng(7, 0);
        let s = MatrixSample::random(12, &CutDensity::Uniform, &mut rng).unwrap();
        let mode = PermMode::Sampled {
            count: 1000,
            seed: 1,
        };
        let a = determinant_terms(&s, mode).unwrap();
        assert_eq!(a.term_count, 1000);
        assert_eq!(a, determinant_terms(&s, mode).unwrap());
    }

    #[test]
    fn rencontres_matches_enumeration() {
        for n in 0..=8usize {
            let mut counts = vec![0u64; n + 1];
            for p in all_perms(n) {
                counts[p.iter().enumerate().filter(|(i, &v)| *i == v).count()] += 1;
            }
            for (k, &c) in counts.iter().enumerate() {
                assert_eq!(
                    rencontres_count(n as u64, k as u64).unwrap(),
                    BigUint::from(c),
                    "n={n} k={k}"
                );
            }
        }
        assert_eq!(rencontres_count(4, 0).unwrap(), BigUint::from(9u32));
        assert!(rencontres_count(4, 5).is_err());
        assert!(rencontres_count(21, 0).is_err());
    }

    #[test]
    fn rencontres_sum_to_factorial() {
        let mut fact = BigUint::one();
        for n in 1..=12u64 {
            fact *= n;
            let total: BigUint = (0..=n).map(|k| rencontres_count(n, k).unwrap()).sum();
            assert_eq!(total, fact);
        }
    }

    #[test]
    fn fixed_points_are_poisson_like() {
        let s = shared_factor_distribution(20, 100_000, 11).unwrap();
        assert!((0.95..=1.05).contains(&s.mean), "{}", s.mean);
        assert!((0.9..=1.1).contains(&s.variance), "{}", s.variance);
        let p0 =
            (derangements(20).to_f64().unwrap()) / (1..=20u64).map(|k| k as f64).product::<f64>();
        assert!((s.probability(0) - p0).abs() < 0.01);
        assert_eq!(s.counts.iter().sum::<u64>(), 100_000);
    }

    #[test]
    fn n4_matches_rencontres_within_three_sigma() {
        let trials = 48_000u64;
        let s = shared_factor_distribution(4, trials, 12).unwrap();
        for k in 0..=4u64 {
            let p = rencontres_count(4, k).unwrap().to_f64().unwrap() / 24.0;
            let sigma = (p * (1.0 - p) / trials as f64).sqrt();
            assert!(
                (s.probability(k as usize) - p).abs() <= 3.0 * sigma + 1e-12,
                "k={k}"
            );
        }
    }
}
