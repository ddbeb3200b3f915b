//! Integer-length fragmentation with stopping sequences.
//!
//! A stick of integer length `ℓ` stops when `ℓ = 1` or `ℓ` belongs to the
//! stopping sequence; otherwise it is cut at `c` drawn uniformly from
//! `[1, ℓ - 1]` and both `c` and `ℓ - c` continue. Lengths strictly decrease,
//! so every run terminates, and the terminal lengths sum to the original
//! length exactly.
//!
//! Lengths are arbitrary-precision. Pieces that fit in a `u64` take a native
//! fast path, which is where nearly all of the work happens.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::unit_rng;
use crate::significand::DigitHistogram;
use crate::stats::{chi_square_benford, CHI2_8_CRITICAL_95};

/// A positive integer stick length.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BigLength(BigUint);

impl BigLength {
    pub fn new(value: BigUint) -> Result<Self> {
        if value.is_zero() {
            return invalid("stick length must be at least 1");
        }
        Ok(Self(value))
    }

    pub fn from_u64(value: u64) -> Result<Self> {
        Self::new(BigUint::from(value))
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn into_inner(self) -> BigUint {
        self.0
    }
}

impl fmt::Display for BigLength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Accepts plain decimal integers, `AeB` (e.g. `1e6`, `3e500`) and `A^B`
/// (e.g. `10^500`).
impl FromStr for BigLength {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidArgument(format!("cannot parse stick length {s:?}"));
        let value = if let Some((m, e)) = s.split_once(['e', 'E']) {
            let m: BigUint = m.parse().map_err(|_| bad())?;
            let e: u32 = e.parse().map_err(|_| bad())?;
            m * BigUint::from(10u32).pow(e)
        } else if let Some((b, e)) = s.split_once('^') {
            let b: BigUint = b.parse().map_err(|_| bad())?;
            let e: u32 = e.parse().map_err(|_| bad())?;
            b.pow(e)
        } else {
            s.parse().map_err(|_| bad())?
        };
        Self::new(value)
    }
}

impl Serialize for BigLength {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0.to_string())
    }
}

impl<'de> Deserialize<'de> for BigLength {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Int(v) => BigLength::from_u64(v).map_err(D::Error::custom),
            Raw::Text(s) => s.parse().map_err(D::Error::custom),
        }
    }
}

/// Sequences at which a piece stops decomposing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoppingSequence {
    /// `2n`
    Evens,
    Primes,
    /// `n²`
    Squares,
    /// `2^n`, `n >= 0`
    PowersOfTwo,
    /// `F_n` with `F_1 = F_2 = 1`
    Fibonacci,
    /// `⌊n ln n⌋`, `n >= 1`
    NLogN,
}

impl StoppingSequence {
    pub const ALL: [StoppingSequence; 6] = [
        Self::Evens,
        Self::Primes,
        Self::Squares,
        Self::PowersOfTwo,
        Self::Fibonacci,
        Self::NLogN,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Evens => "evens",
            Self::Primes => "primes",
            Self::Squares => "squares",
            Self::PowersOfTwo => "powers_of_two",
            Self::Fibonacci => "fibonacci",
            Self::NLogN => "n_log_n",
        }
    }

    /// Membership of a native-size length.
    pub fn contains_u64(self, n: u64) -> bool {
        match self {
            Self::Evens => n % 2 == 0 && n > 0,
            Self::Primes => is_prime_u64(n),
            Self::Squares => {
                let r = n.isqrt();
                r * r == n
            }
            Self::PowersOfTwo => n.is_power_of_two(),
            Self::Fibonacci => is_fibonacci_u64(n),
            Self::NLogN => is_n_log_n_u64(n),
        }
    }

    /// Membership of an arbitrary-precision length.
    pub fn contains_big(self, n: &BigUint) -> bool {
        if let Some(v) = n.to_u64() {
            return self.contains_u64(v);
        }
        match self {
            Self::Evens => n.is_even(),
            Self::Primes => is_probable_prime_big(n),
            Self::Squares => is_square_big(n),
            Self::PowersOfTwo => n.count_ones() == 1,
            Self::Fibonacci => {
                let t = BigUint::from(5u32) * n * n;
                is_square_big(&(&t + 4u32)) || is_square_big(&(&t - 4u32))
            }
            Self::NLogN => is_n_log_n_big(n),
        }
    }

    pub fn contains(self, len: &BigLength) -> bool {
        self.contains_big(&len.0)
    }
}

impl FromStr for StoppingSequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|q| q.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown stopping sequence {s:?}")))
    }
}

/// Whether a piece of this length stops decomposing. Length 1 always stops.
pub fn stops(seq: StoppingSequence, len: &BigLength) -> bool {
    len.0.is_one() || seq.contains(len)
}

// ---------------------------------------------------------------------------
// membership tests

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((u128::from(a) * u128::from(b)) % u128::from(m)) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

const SMALL_PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Deterministic Miller–Rabin; the first twelve prime bases are exact for
/// all 64-bit inputs.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in SMALL_PRIMES {
        if n % p == 0 {
            return n == p;
        }
    }
    let d = (n - 1) >> (n - 1).trailing_zeros();
    let s = (n - 1).trailing_zeros();
    'bases: for a in SMALL_PRIMES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'bases;
            }
        }
        return false;
    }
    true
}

/// Miller–Rabin rounds for big inputs: error below 4^-64 = 2^-128.
const BIG_PRIME_ROUNDS: usize = 64;

fn is_probable_prime_big(n: &BigUint) -> bool {
    if n.is_even() {
        return false;
    }
    for p in SMALL_PRIMES.iter().chain(&[41, 43, 47, 53, 59, 61, 67, 71]) {
        if (n % p).is_zero() {
            return false;
        }
    }
    let one = BigUint::one();
    let n_minus_1 = n - &one;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    // Bases come from a generator keyed by n, so the answer is a pure function of n.
    let mut rng = ChaCha8Rng::seed_from_u64(n.iter_u64_digits().next().unwrap_or(0));
    let two = BigUint::from(2u32);
    let span = n - 3u32;
    'rounds: for _ in 0..BIG_PRIME_ROUNDS {
        let a = uniform_below(&mut rng, &span) + &two;
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'rounds;
            }
        }
        return false;
    }
    true
}

fn is_square_big(n: &BigUint) -> bool {
    let r = n.sqrt();
    &r * &r == *n
}

// All Fibonacci numbers that fit in a u64 (F_2 through F_93).
fn fibonacci_u64() -> &'static [u64] {
    use std::sync::OnceLock;
    static FIB: OnceLock<Vec<u64>> = OnceLock::new();
    FIB.get_or_init(|| {
        let mut v = vec![1u64, 2];
        while let Some(next) = v[v.len() - 1].checked_add(v[v.len() - 2]) {
            v.push(next);
        }
        v
    })
}

fn is_fibonacci_u64(n: u64) -> bool {
    // 5n² ± 4 is a square exactly for Fibonacci n; fits in u128 below 2^62.
    if n < 1 << 62 {
        let t = 5 * u128::from(n) * u128::from(n);
        let square = |v: u128| {
            let r = v.isqrt();
            r * r == v
        };
        square(t + 4) || (t >= 4 && square(t - 4))
    } else {
        fibonacci_u64().binary_search(&n).is_ok()
    }
}

/// `⌊n ln n⌋` for native `n`, or `None` when `f64` cannot decide the floor.
fn floor_n_ln_n_f64(n: u64) -> Option<u64> {
    if n == 1 {
        return Some(0);
    }
    let x = n as f64;
    let v = x * x.ln();
    let err = 8.0 * f64::EPSILON * v;
    let f = v.floor();
    if v - f > err && f + 1.0 - v > err {
        Some(f as u64)
    } else {
        None
    }
}

fn is_n_log_n_u64(len: u64) -> bool {
    if len >= 1 << 50 {
        return is_n_log_n_big(&BigUint::from(len));
    }
    // ⌊n ln n⌋: 0, 1, 3, 5, 8, ... strictly increasing from n = 1
    let target = len as f64;
    let mut n = (target / target.max(3.0).ln()).max(1.0);
    for _ in 0..100 {
        let next = (target + n) / (n.ln() + 1.0);
        if (next - n).abs() < 0.5 {
            n = next;
            break;
        }
        n = next;
    }
    let center = n.round().max(1.0) as u64;
    for m in center.saturating_sub(3).max(1)..=center + 3 {
        let floor = match floor_n_ln_n_f64(m) {
            Some(v) => v,
            None => floor_n_ln_n_big(&BigUint::from(m)),
        };
        if floor == len {
            return true;
        }
    }
    false
}

/// `ln n · 2^bits`, truncated.
fn ln_fixed(n: &BigUint, bits: u64) -> BigUint {
    debug_assert!(!n.is_zero());
    let guard = 32;
    let p = bits + guard;
    let k = n.bits() - 1;
    let pow = BigUint::one() << k;
    // ln n = k ln 2 + 2 atanh((n - 2^k)/(n + 2^k))
    let z = ((n - &pow) << p) / (n + &pow);
    let ln2 = &atanh_fixed(&((BigUint::one() << p) / 3u32), p) << 1;
    let frac = &atanh_fixed(&z, p) << 1;
    (ln2 * k + frac) >> guard
}

fn atanh_fixed(z: &BigUint, p: u64) -> BigUint {
    let z2 = (z * z) >> p;
    let mut term = z.clone();
    let mut sum = z.clone();
    let mut i = 1u64;
    loop {
        term = (&term * &z2) >> p;
        if term.is_zero() {
            break;
        }
        sum += &term / (2 * i + 1);
        i += 1;
    }
    sum
}

fn floor_n_ln_n_big(n: &BigUint) -> u64 {
    floor_n_ln_n_exact(n)
        .to_u64()
        .expect("caller keeps n small")
}

/// Exact `⌊n ln n⌋` via fixed-point logarithms with growing precision.
fn floor_n_ln_n_exact(n: &BigUint) -> BigUint {
    if n.is_one() {
        return BigUint::zero();
    }
    let mut extra = 64;
    loop {
        let p = n.bits() + extra;
        let scaled = n * ln_fixed(n, p);
        let floor = &scaled >> p;
        let frac = &scaled - (&floor << p);
        // truncation error of ln_fixed is a few units, times n
        let slack = n << 6u32;
        let one = BigUint::one() << p;
        if frac > slack && &frac + &slack < one {
            return floor;
        }
        extra *= 2;
        if extra > 1 << 16 {
            // n ln n is (numerically) an integer; it is not for n >= 2.
            return floor;
        }
    }
}

fn is_n_log_n_big(len: &BigUint) -> bool {
    // Newton on g(n) = n ln n - len in fixed point: n <- (len + n)/(ln n + 1)
    let p = len.bits() + 64;
    let one_fixed = BigUint::one() << p;
    // start from len / ln(len)
    let ln_len = (len.bits() as f64 * LN_2) as u64;
    let mut n = len / ln_len.max(1);
    for _ in 0..200 {
        if n.is_zero() {
            n = BigUint::one();
        }
        let next = ((len + &n) << p) / (ln_fixed(&n, p) + &one_fixed);
        let diff = if next > n { &next - &n } else { &n - &next };
        n = next;
        if diff <= BigUint::from(2u32) {
            break;
        }
    }
    let low = if n > BigUint::from(4u32) {
        &n - 4u32
    } else {
        BigUint::one()
    };
    let mut m = low;
    let high = &n + 4u32;
    while m <= high {
        if floor_n_ln_n_exact(&m) == *len {
            return true;
        }
        m += 1u32;
    }
    false
}

// ---------------------------------------------------------------------------
// sampling

/// Uniform integer in `[0, bound)` by rejection from random 32-bit words.
pub fn uniform_below<R: RngCore + ?Sized>(rng: &mut R, bound: &BigUint) -> BigUint {
    assert!(!bound.is_zero(), "empty range");
    let bits = bound.bits();
    let words = bits.div_ceil(32) as usize;
    let top_bits = bits - 32 * (words as u64 - 1);
    let mask = if top_bits == 32 {
        u32::MAX
    } else {
        (1u32 << top_bits) - 1
    };
    let mut buf = vec![0u32; words];
    loop {
        buf.iter_mut().for_each(|w| *w = rng.next_u32());
        buf[words - 1] &= mask;
        let candidate = BigUint::from_slice(&buf);
        if &candidate < bound {
            return candidate;
        }
    }
}

/// Leading decimal digit of a positive integer.
pub fn first_digit_big(len: &BigLength) -> u8 {
    match len.0.to_u64() {
        Some(v) => first_digit_u64(v),
        None => len.0.to_str_radix(10).as_bytes()[0] - b'0',
    }
}

fn first_digit_u64(mut v: u64) -> u8 {
    debug_assert!(v > 0);
    while v >= 10 {
        v /= 10;
    }
    v as u8
}

// ---------------------------------------------------------------------------
// simulation

/// Piece budget used by [`chi_square_experiment`].
pub const DEFAULT_MAX_PIECES: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DiscreteOptions {
    /// Terminal pieces of length at most this are tallied and dropped
    /// instead of being kept in the outcome's multiset.
    pub materialize_threshold: Option<u64>,
    /// Abort with a numeric error once this many terminal pieces exist.
    /// Sparse sequences at astronomically large lengths need about as many
    /// pieces as the length itself.
    pub max_pieces: Option<u64>,
}

/// Terminal pieces of one discrete decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOutcome {
    /// First digits of all terminal pieces (unit weights).
    pub histogram: DigitHistogram,
    pub n_pieces: u64,
    /// Terminal pieces whose length belongs to the stopping sequence.
    pub n_stopped_on_sequence: u64,
    pub n_ones: u64,
    /// Materialized terminal lengths with multiplicities.
    pub pieces: BTreeMap<BigLength, u64>,
    /// Summed length of the terminal pieces that were not materialized.
    pub dropped_length: BigUint,
}

impl DiscreteOutcome {
    /// Sum of all terminal lengths (materialized and dropped).
    pub fn total_length(&self) -> BigUint {
        self.pieces
            .iter()
            .fold(self.dropped_length.clone(), |acc, (len, &count)| {
                acc + len.value() * count
            })
    }

    pub fn fraction_ones(&self) -> f64 {
        self.n_ones as f64 / self.n_pieces as f64
    }
}

enum Piece {
    Small(u64),
    Big(BigUint),
}

impl Piece {
    fn from_big(v: BigUint) -> Self {
        match v.to_u64() {
            Some(s) => Piece::Small(s),
            None => Piece::Big(v),
        }
    }
}

struct Tally<'a> {
    seq: StoppingSequence,
    options: &'a DiscreteOptions,
    out: DiscreteOutcome,
}

impl Tally<'_> {
    fn small(&mut self, v: u64, on_sequence: bool) {
        let out = &mut self.out;
        out.n_pieces += 1;
        out.n_ones += u64::from(v == 1);
        out.n_stopped_on_sequence += u64::from(on_sequence);
        out.histogram
            .add_digit(usize::from(first_digit_u64(v)), 1.0);
        match self.options.materialize_threshold {
            Some(t) if v <= t => out.dropped_length += v,
            _ => *out.pieces.entry(BigLength(BigUint::from(v))).or_default() += 1,
        }
    }

    fn big(&mut self, v: BigUint) {
        let len = BigLength(v);
        let out = &mut self.out;
        out.n_pieces += 1;
        out.n_stopped_on_sequence += 1;
        out.histogram
            .add_digit(usize::from(first_digit_big(&len)), 1.0);
        *out.pieces.entry(len).or_default() += 1;
    }
}

/// Runs one decomposition of a stick of length `len`.
pub fn simulate_discrete<R: Rng + ?Sized>(
    len: &BigLength,
    seq: StoppingSequence,
    rng: &mut R,
    options: &DiscreteOptions,
) -> Result<DiscreteOutcome> {
    if len.0 < BigUint::from(2u32) {
        return invalid("the starting stick must have length at least 2");
    }
    let mut tally = Tally {
        seq,
        options,
        out: DiscreteOutcome {
            histogram: DigitHistogram::new(),
            n_pieces: 0,
            n_stopped_on_sequence: 0,
            n_ones: 0,
            pieces: BTreeMap::new(),
            dropped_length: BigUint::zero(),
        },
    };
    let budget = options.max_pieces.unwrap_or(u64::MAX);
    let mut stack = vec![Piece::from_big(len.0.clone())];
    while let Some(piece) = stack.pop() {
        if tally.out.n_pieces >= budget {
            let digits = len.0.to_str_radix(10).len();
            return Err(Error::Numeric(format!(
                "decomposition of a {digits}-digit length under {} exceeded {budget} pieces",
                seq.name()
            )));
        }
        match piece {
            Piece::Small(v) => {
                let on_sequence = tally.seq.contains_u64(v);
                if v == 1 || on_sequence {
                    tally.small(v, on_sequence);
                } else {
                    let c = rng.random_range(1..v);
                    stack.push(Piece::Small(v - c));
                    stack.push(Piece::Small(c));
                }
            }
            Piece::Big(v) => {
                if tally.seq.contains_big(&v) {
                    tally.big(v);
                } else {
                    let c = uniform_below(rng, &(&v - 1u32)) + 1u32;
                    let rest = &v - &c;
                    stack.push(Piece::from_big(rest));
                    stack.push(Piece::from_big(c));
                }
            }
        }
    }
    Ok(tally.out)
}

/// One row of a chi-square experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: u64,
    pub n_pieces: u64,
    pub n_stopped_on_sequence: u64,
    pub n_ones: u64,
    pub chi_square: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub sequence: StoppingSequence,
    pub length: BigLength,
    pub trials: u64,
    pub mean_chi_square: f64,
    pub critical_value: f64,
    pub fraction_exceeding_critical: f64,
    pub mean_pieces: f64,
    pub mean_stopped_on_sequence: f64,
    pub mean_ones: f64,
    /// Length-1 pieces over all pieces, pooled across trials.
    pub fraction_ones: f64,
    pub pooled_histogram: DigitHistogram,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquareExperiment {
    pub records: Vec<TrialRecord>,
    pub summary: ExperimentSummary,
}

/// Runs `trials` independent decompositions and scores each against Benford.
pub fn chi_square_experiment(
    len: &BigLength,
    seq: StoppingSequence,
    trials: u64,
    seed: u64,
) -> Result<ChiSquareExperiment> {
    if trials < 1 {
        return invalid("need at least one trial");
    }
    let options = DiscreteOptions {
        materialize_threshold: Some(u64::MAX),
        max_pieces: Some(DEFAULT_MAX_PIECES),
    };
    let outcomes: Vec<(TrialRecord, DigitHistogram)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = unit_rng(seed, t);
            let out = simulate_discrete(len, seq, &mut rng, &options)?;
            let chi_square = chi_square_benford(&out.histogram)?.chi_square;
            Ok((
                TrialRecord {
                    trial_id: t,
                    n_pieces: out.n_pieces,
                    n_stopped_on_sequence: out.n_stopped_on_sequence,
                    n_ones: out.n_ones,
                    chi_square,
                },
                out.histogram,
            ))
        })
        .collect::<Result<_>>()?;

    let mut pooled = DigitHistogram::new();
    let mut records = Vec::with_capacity(outcomes.len());
    for (r, h) in outcomes {
        pooled.merge(&h)?;
        records.push(r);
    }
    let n = trials as f64;
    let mean = |f: fn(&TrialRecord) -> f64| records.iter().map(f).sum::<f64>() / n;
    let total_pieces: u64 = records.iter().map(|r| r.n_pieces).sum();
    let total_ones: u64 = records.iter().map(|r| r.n_ones).sum();
    let summary = ExperimentSummary {
        sequence: seq,
        length: len.clone(),
        trials,
        mean_chi_square: mean(|r| r.chi_square),
        critical_value: CHI2_8_CRITICAL_95,
        fraction_exceeding_critical: records
            .iter()
            .filter(|r| r.chi_square > CHI2_8_CRITICAL_95)
            .count() as f64
            / n,
        mean_pieces: mean(|r| r.n_pieces as f64),
        mean_stopped_on_sequence: mean(|r| r.n_stopped_on_sequence as f64),
        mean_ones: mean(|r| r.n_ones as f64),
        fraction_ones: total_ones as f64 / total_pieces as f64,
        pooled_histogram: pooled,
    };
    Ok(ChiSquareExperiment { records, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn len(s: &str) -> BigLength {
        s.parse().unwrap()
    }

    fn trial_division(n: u64) -> bool {
        if n < 2 {
            return false;
        }
        let mut d = 2;
        while d * d <= n {
            if n % d == 0 {
                return false;
            }
            d += 1;
        }
        true
    }

    #[test]
    fn parses_length_notations() {
        assert_eq!(len("1e6"), BigLength::from_u64(1_000_000).unwrap());
        assert_eq!(len("10^3"), BigLength::from_u64(1000).unwrap());
        assert_eq!(len(" 42 "), BigLength::from_u64(42).unwrap());
        assert_eq!(len("10^500").value().to_string().len(), 501);
        assert!("0".parse::<BigLength>().is_err());
        assert!("abc".parse::<BigLength>().is_err());
        let j: BigLength = serde_json::from_str("\"1e3\"").unwrap();
        assert_eq!(j, BigLength::from_u64(1000).unwrap());
        let j: BigLength = serde_json::from_str("77").unwrap();
        assert_eq!(serde_json::to_string(&j).unwrap(), "\"77\"");
    }

    #[test]
    fn stop_examples() {
        use StoppingSequence::*;
        assert!(stops(Evens, &len("2012")));
        assert!(!stops(Evens, &len("2013")));
        assert!(stops(Fibonacci, &len("13")));
        assert!(!stops(Fibonacci, &len("14")));
        for seq in StoppingSequence::ALL {
            assert!(stops(seq, &len("1")));
        }
        assert!(!Evens.contains(&len("1")) && !Primes.contains(&len("1")));
        assert!(Squares.contains(&len("1")) && PowersOfTwo.contains(&len("1")));
        assert!(stops(Squares, &len("1000000")));
        assert!(stops(PowersOfTwo, &len("1024")));
        assert!(!stops(PowersOfTwo, &len("1025")));
        assert_eq!(
            "powers_of_two".parse::<StoppingSequence>().unwrap(),
            PowersOfTwo
        );
        assert!("odds".parse::<StoppingSequence>().is_err());
    }

    #[test]
    fn primes_match_trial_division() {
        for n in 1..=1_000_000u64 {
            assert_eq!(is_prime_u64(n), trial_division(n), "n = {n}");
        }
        // Carmichael numbers and a large prime
        for n in [561u64, 1105, 1729, 2465, 3_215_031_751] {
            assert!(!is_prime_u64(n));
        }
        assert!(is_prime_u64(18_446_744_073_709_551_557));
    }

    #[test]
    fn big_primes() {
        // 2^127 - 1 is prime; 2^128 + 1 is not
        let m127 = (BigUint::one() << 127u32) - 1u32;
        assert!(StoppingSequence::Primes.contains_big(&m127));
        let f7 = (BigUint::one() << 128u32) + 1u32;
        assert!(!StoppingSequence::Primes.contains_big(&f7));
        assert!(!StoppingSequence::Primes.contains_big(&(&m127 * &m127)));
    }

    #[test]
    fn fibonacci_matches_list() {
        let mut fibs = std::collections::HashSet::new();
        let (mut a, mut b) = (1u64, 1u64);
        while a <= 1_000_000 {
            fibs.insert(a);
            (a, b) = (b, a + b);
        }
        for n in 1..=1_000_000u64 {
            assert_eq!(
                StoppingSequence::Fibonacci.contains_u64(n),
                fibs.contains(&n),
                "n = {n}"
            );
        }
        for &f in fibonacci_u64() {
            assert!(is_fibonacci_u64(f));
        }
        // F_100 = 354224848179261915075
        let f100: BigUint = "354224848179261915075".parse().unwrap();
        assert!(StoppingSequence::Fibonacci.contains_big(&f100));
        assert!(!StoppingSequence::Fibonacci.contains_big(&(f100 + 1u32)));
    }

    #[test]
    fn squares_and_powers_big() {
        let b: BigUint = "123456789123456789123456789".parse().unwrap();
        assert!(StoppingSequence::Squares.contains_big(&(&b * &b)));
        assert!(!StoppingSequence::Squares.contains_big(&(&b * &b + 1u32)));
        assert!(StoppingSequence::PowersOfTwo.contains_big(&(BigUint::one() << 300u32)));
        assert!(!StoppingSequence::PowersOfTwo.contains_big(&((BigUint::one() << 300u32) + 2u32)));
        assert!(StoppingSequence::Evens.contains_big(&(BigUint::one() << 300u32)));
    }

    #[test]
    fn n_log_n_matches_enumeration() {
        let mut members = std::collections::HashSet::new();
        for n in 1..=200_000u64 {
            members.insert(((n as f64) * (n as f64).ln()).floor() as u64);
        }
        let limit = (200_000f64 * 200_000f64.ln()) as u64;
        for v in (1..limit).step_by(997).chain(1..5000) {
            assert_eq!(
                StoppingSequence::NLogN.contains_u64(v),
                members.contains(&v),
                "v = {v}"
            );
        }
    }

    #[test]
    fn n_log_n_exact_floor() {
        for n in [2u64, 3, 10, 12345, 1 << 40] {
            let x = n as f64;
            let approx = x * x.ln();
            let exact = floor_n_ln_n_exact(&BigUint::from(n)).to_f64().unwrap();
            assert!((exact - approx.floor()).abs() <= 1.0 + 1e-15 * approx);
        }
        // big member: n = 10^30 + 7
        let n: BigUint = BigUint::from(10u32).pow(30) + 7u32;
        let v = floor_n_ln_n_exact(&n);
        assert!(is_n_log_n_big(&v));
        assert!(!is_n_log_n_big(&(v + 1u32)));
    }

    #[test]
    fn first_digits() {
        assert_eq!(first_digit_big(&BigLength::from_u64(1024).unwrap()), 1);
        assert_eq!(first_digit_big(&len("10^500")), 1);
        let mut rng = unit_rng(5, 0);
        for _ in 0..20 {
            let bound = BigUint::from(10u32).pow(500);
            let v = uniform_below(&mut rng, &bound) + 1u32;
            let s = v.to_string();
            assert_eq!(first_digit_big(&BigLength(v)), s.as_bytes()[0] - b'0');
        }
    }

    #[test]
    fn uniform_below_is_unbiased() {
        let mut rng = unit_rng(6, 0);
        let bound = BigUint::from(6u32);
        let mut counts = [0u32; 6];
        for _ in 0..60_000 {
            counts[uniform_below(&mut rng, &bound).to_usize().unwrap()] += 1;
        }
        for c in counts {
            assert!((c as f64 - 10_000.0).abs() < 400.0, "{counts:?}");
        }
    }

    #[test]
    fn tiny_sticks() {
        let mut rng = unit_rng(1, 0);
        let opts = DiscreteOptions::default();
        let out = simulate_discrete(&len("2"), StoppingSequence::Evens, &mut rng, &opts).unwrap();
        assert_eq!(out.n_pieces, 1);
        let out = simulate_discrete(&len("3"), StoppingSequence::Evens, &mut rng, &opts).unwrap();
        assert_eq!(out.n_pieces, 2);
        assert_eq!(out.n_ones, 1);
        assert_eq!(out.total_length(), BigUint::from(3u32));
        // 2 is not a square, so it must split into (1, 1)
        let out = simulate_discrete(&len("2"), StoppingSequence::Squares, &mut rng, &opts).unwrap();
        assert_eq!(out.n_ones, 2);
        assert!(simulate_discrete(&len("1"), StoppingSequence::Evens, &mut rng, &opts).is_err());
    }

    #[test]
    fn conservation_exact() {
        for (seq, l) in [
            (StoppingSequence::Evens, "1000001"),
            (StoppingSequence::Squares, "100001"),
            (StoppingSequence::Primes, "100003"),
            (StoppingSequence::Evens, "3^300"),
            (StoppingSequence::Fibonacci, "99999"),
        ] {
            let l = len(l);
            for t in 0..3 {
                let mut rng = unit_rng(21, t);
                let out =
                    simulate_discrete(&l, seq, &mut rng, &DiscreteOptions::default()).unwrap();
                assert_eq!(&out.total_length(), l.value(), "{seq:?}");
                assert_eq!(out.pieces.values().sum::<u64>(), out.n_pieces);
                assert_eq!(out.histogram.total(), out.n_pieces as f64);
            }
        }
    }

    #[test]
    fn dropped_pieces_still_conserve() {
        let l = len("10^40");
        let mut rng = unit_rng(2, 0);
        let opts = DiscreteOptions {
            materialize_threshold: Some(1000),
            ..Default::default()
        };
        let out = simulate_discrete(&l, StoppingSequence::Evens, &mut rng, &opts).unwrap();
        assert!(out
            .pieces
            .keys()
            .all(|k| k.value() > &BigUint::from(1000u32)));
        assert_eq!(&out.total_length(), l.value());
    }

    #[test]
    fn piece_budget_stops_runaway_runs() {
        let mut rng = unit_rng(2, 0);
        let opts = DiscreteOptions {
            max_pieces: Some(1000),
            ..Default::default()
        };
        let e = simulate_discrete(
            &len("1000000000000000000000000000001"),
            StoppingSequence::Squares,
            &mut rng,
            &opts,
        )
        .unwrap_err();
        assert!(matches!(e, Error::Numeric(_)));
    }

    #[test]
    fn sparse_sequences_produce_many_ones() {
        let l = len("1000001");
        let evens = chi_square_experiment(&l, StoppingSequence::Evens, 40, 3)
            .unwrap()
            .summary;
        let squares = chi_square_experiment(&l, StoppingSequence::Squares, 4, 3)
            .unwrap()
            .summary;
        assert!(squares.fraction_ones >= 10.0 * evens.fraction_ones);
        for seq in [
            StoppingSequence::Squares,
            StoppingSequence::PowersOfTwo,
            StoppingSequence::Fibonacci,
        ] {
            let s = chi_square_experiment(&l, seq, 4, 3).unwrap().summary;
            assert!(s.mean_ones >= 10.0 * evens.mean_ones, "{seq:?}");
            assert!(s.fraction_ones >= 3.0 * evens.fraction_ones, "{seq:?}");
            assert!(s.fraction_exceeding_critical == 1.0);
        }
    }

    #[test]
    fn experiment_is_reproducible() {
        let l = len("100001");
        let a = chi_square_experiment(&l, StoppingSequence::Evens, 16, 9).unwrap();
        let b = chi_square_experiment(&l, StoppingSequence::Evens, 16, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records.len(), 16);
        assert!(chi_square_experiment(&l, StoppingSequence::Evens, 0, 9).is_err());
    }
}
