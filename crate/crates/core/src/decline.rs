//! The random-decline chain: from `x > 0` jump uniformly into
//! `{0, ..., floor(a x)}`; 0 is absorbing.
//!
//! The decline factor is held as an exact rational so that `floor(a x)` never
//! suffers from decimal-to-binary rounding (`0.1 * 30` is exactly 3 here).

use std::fmt;

use num_rational::Ratio;
use num_traits::ToPrimitive;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{replicate_outcomes, ChainKernel, HittingStats, TransitionRow};
use crate::scalar::Scalar;
use crate::seed::derive_seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeclineError {
    #[error("decline factor must be a positive decimal, got {0}")]
    BadA(String),
    #[error("exact expected time needs a <= 1, got {0}")]
    UnsupportedA(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// `(numer, denom)` of a plain non-negative decimal literal, or `None` if the
/// text is malformed or does not fit in `u64`.
pub(crate) fn decimal_ratio(text: &str) -> Option<(u64, u64)> {
    let t = text.trim();
    let (int_part, frac_part) = t.split_once('.').unwrap_or((t, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part
        .chars()
        .chain(frac_part.chars())
        .all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let significant = digits.trim_start_matches('0');
    let numer: u64 = if significant.is_empty() {
        0
    } else {
        significant.parse().ok()?
    };
    let denom = 10u64.checked_pow(frac_part.len() as u32)?;
    Some((numer, denom))
}

/// Exact positive rational decline factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DeclineFactor(Ratio<u64>);

impl DeclineFactor {
    pub fn new(numer: u64, denom: u64) -> Result<Self, DeclineError> {
        if numer == 0 || denom == 0 {
            return Err(DeclineError::BadA(format!("{numer}/{denom}")));
        }
        Ok(DeclineFactor(Ratio::new(numer, denom)))
    }

    /// Parses a plain decimal literal such as `"2.5"` exactly.
    pub fn from_decimal(text: &str) -> Result<Self, DeclineError> {
        let bad = || DeclineError::BadA(text.to_string());
        let (numer, denom) = decimal_ratio(text).ok_or_else(bad)?;
        Self::new(numer, denom).map_err(|_| bad())
    }

    /// Interprets a float by its shortest round-trip decimal representation,
    /// so `0.1` means exactly one tenth.
    pub fn from_f64(a: f64) -> Result<Self, DeclineError> {
        if !(a.is_finite() && a > 0.0) {
            return Err(DeclineError::BadA(a.to_string()));
        }
        Self::from_decimal(&format!("{a}"))
    }

    pub fn numer(&self) -> u64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u64 {
        *self.0.denom()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// `floor(a x)`, saturating at `u64::MAX`.
    pub fn floor_mul(&self, x: u64) -> u64 {
        let prod = u128::from(self.numer()) * u128::from(x) / u128::from(self.denom());
        u64::try_from(prod).unwrap_or(u64::MAX)
    }

    pub fn at_most_one(&self) -> bool {
        self.numer() <= self.denom()
    }
}

impl fmt::Display for DeclineFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

/// Parameters of one random-decline run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomDeclineParams {
    pub a: DeclineFactor,
    pub n: u64,
}

/// The random-decline chain on the non-negative integers. States above
/// `u64::MAX / a` saturate: the successor range is clamped to `u64::MAX`.
#[derive(Debug, Clone, Copy)]
pub struct RandomDecline {
    a: DeclineFactor,
}

pub fn make_random_decline(a: DeclineFactor) -> RandomDecline {
    RandomDecline { a }
}

impl RandomDecline {
    pub fn factor(&self) -> DeclineFactor {
        self.a
    }

    /// Upper end of the successor range from `x`.
    pub fn reach(&self, x: u64) -> u64 {
        self.a.floor_mul(x)
    }
}

impl ChainKernel for RandomDecline {
    type State = u64;

    fn sample_next(&self, state: &u64, rng: &mut dyn RngCore) -> u64 {
        if *state == 0 {
            return 0;
        }
        rng.random_range(0..=self.reach(*state))
    }

    fn exact_transitions(&self, state: &u64) -> Option<TransitionRow<u64>> {
        if *state == 0 {
            return Some(vec![(0, 1.0)]);
        }
        let m = self.reach(*state);
        if m >= 1 << 24 {
            return None;
        }
        let p = 1.0 / (m as f64 + 1.0);
        Some((0..=m).map(|j| (j, p)).collect())
    }
}

/// Exact `E[T]` from `n` for `a <= 1` by the forward recursion
/// `E[x] = 1 + (1/(m+1)) sum_{j<=m} E[j]`, `m = floor(a x)`.
pub fn exact_expected_time<S: Scalar>(a: DeclineFactor, n: u64) -> Result<S, DeclineError> {
    if !a.at_most_one() {
        return Err(DeclineError::UnsupportedA(a.to_string()));
    }
    let chain = make_random_decline(a);
    let len =
        usize::try_from(n).map_err(|_| DeclineError::InvalidArgument("n too large".into()))?;
    // prefix[k] = sum_{j < k} E[j]
    let mut prefix: Vec<S> = Vec::with_capacity(len + 2);
    prefix.push(S::zero());
    prefix.push(S::zero());
    let mut last = S::zero();
    for x in 1..=n {
        let m = chain.reach(x);
        let e = if m == x {
            // E[x] (1 - 1/(x+1)) = 1 + S_{<x} / (x+1)
            let xs = S::from_count(x);
            (xs + S::one() + prefix[x as usize]) / xs
        } else {
            S::one() + prefix[m as usize + 1] / S::from_count(m + 1)
        };
        let next = prefix[x as usize] + e;
        prefix.push(next);
        last = e;
    }
    Ok(last)
}

/// Smallest integer `C` with `1 - ln a - 1/(floor(a C) + 1) >= (1 - ln a) / 2`,
/// and the resulting drift margin of `g = ln` above `C`. Needs `a < e`.
pub fn rescaling_constant(a: DeclineFactor) -> Result<(u64, f64), DeclineError> {
    let gap = 1.0 - a.to_f64().ln();
    if !(gap > 0.0) {
        return Err(DeclineError::UnsupportedA(a.to_string()));
    }
    let mut c = 1u64;
    loop {
        let margin = gap - 1.0 / (a.floor_mul(c) as f64 + 1.0);
        if margin >= gap / 2.0 {
            return Ok((c, margin));
        }
        c += 1;
    }
}

/// One cell of a threshold scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub a: f64,
    pub n: u64,
    pub replications: usize,
    pub budget: u64,
    pub censored: usize,
    /// `None` when every run was censored.
    pub stats: Option<HittingStats>,
}

impl ScanRow {
    pub fn mean(&self) -> Option<f64> {
        self.stats.as_ref().map(|s| s.mean)
    }

    pub fn std_error(&self) -> Option<f64> {
        self.stats.as_ref().map(|s| s.std_error)
    }

    pub fn ratio_mean_over_ln_n(&self) -> Option<f64> {
        self.mean().map(|m| m / (self.n as f64).ln())
    }
}

fn near_threshold(a: DeclineFactor) -> bool {
    let x = a.to_f64();
    x > 2.5 && x < 3.0
}

/// Replicated absorption times over an `(a, n)` grid. Cells with the same `n`
/// share their seed stream, so different `a` are compared on common random
/// numbers.
pub fn threshold_scan(
    a_values: &[DeclineFactor],
    n_values: &[u64],
    replications: usize,
    budget: impl Fn(u64) -> u64,
    master_seed: u64,
) -> Result<Vec<ScanRow>, DeclineError> {
    if replications == 0 {
        return Err(DeclineError::InvalidArgument(
            "replications must be >= 1".into(),
        ));
    }
    if n_values.contains(&0) {
        return Err(DeclineError::InvalidArgument("n must be >= 1".into()));
    }
    let mut rows = Vec::with_capacity(a_values.len() * n_values.len());
    for &a in a_values {
        if near_threshold(a) {
            log::warn!("a = {a} is close to e; finite-size scans converge slowly here");
        }
        let chain = make_random_decline(a);
        for (j, &n) in n_values.iter().enumerate() {
            let b = budget(n);
            let seed = derive_seed(master_seed, j as u64);
            let times = replicate_outcomes(&chain, &n, |x| *x == 0, replications, b, seed);
            let censored = times.iter().filter(|t| t.is_censored()).count();
            rows.push(ScanRow {
                a: a.to_f64(),
                n,
                replications,
                budget: b,
                censored,
                stats: HittingStats::from_times(&times, b, seed).ok(),
            });
        }
    }
    Ok(rows)
}
