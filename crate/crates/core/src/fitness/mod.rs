//! Pseudo-boolean fitness functions.
//!
//! Positions are 0-based: position 0 carries the largest weight of a sorted
//! linear function.

mod hot;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ea::BitString;
use crate::seed::rng_from_seed;

pub use hot::{
    hot_monotone, level, HotMonotone, HotMonotoneConfig, HotMonotoneSnapshot, LevelSets, Mode,
    DEFAULT_LEVEL_CAP_LIMIT, STATIC_SIZE_LIMIT,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitnessError {
    #[error("weight {index} is not positive ({value})")]
    NonpositiveWeight { index: usize, value: f64 },
    #[error("exhaustive check supports n <= 16, got {0}")]
    TooLarge(usize),
    #[error("infeasible configuration: {0}")]
    ConfigInfeasible(String),
    #[error("operation needs a hot-monotone fitness function")]
    WrongFitnessKind,
    #[error("point has length {got}, fitness expects {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// A fitness function to be maximized by the EA.
///
/// `delta` is called with the engine's current point as `parent`; stateful
/// functions rely on `reset` and `accepted` to keep their bookkeeping in sync
/// with that point.
#[allow(clippy::len_without_is_empty)]
pub trait Fitness: Send + Sync {
    fn len(&self) -> usize;

    fn evaluate(&self, point: &BitString) -> f64;

    /// `f(parent with flips applied) - f(parent)`. The sign is exact even
    /// when the magnitude is not representable.
    fn delta(&self, parent: &BitString, flips: &[usize]) -> f64 {
        let mut child = parent.clone();
        child.flip_all(flips);
        self.evaluate(&child) - self.evaluate(parent)
    }

    /// Whether `point` is a global maximum; `None` if the function cannot
    /// tell.
    fn is_optimum(&self, point: &BitString) -> Option<bool>;

    /// True for functions whose value depends on the run history.
    fn is_stateful(&self) -> bool {
        false
    }

    /// Synchronizes internal state with the starting point of a run.
    fn reset(&mut self, _start: &BitString) {}

    /// Notification that the engine moved to `point` by flipping `flips`.
    fn accepted(&mut self, _point: &BitString, _flips: &[usize]) {}

    /// Set once a capped construction has exhausted its levels.
    fn cap_reached(&self) -> bool {
        false
    }

    fn as_hot_monotone(&self) -> Option<&HotMonotone> {
        None
    }
}

/// `f(x) = number of ones`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OneMax {
    n: usize,
}

pub fn onemax(n: usize) -> OneMax {
    OneMax { n }
}

impl Fitness for OneMax {
    fn len(&self) -> usize {
        self.n
    }

    fn evaluate(&self, point: &BitString) -> f64 {
        point.one_count() as f64
    }

    fn delta(&self, parent: &BitString, flips: &[usize]) -> f64 {
        flips
            .iter()
            .map(|&i| if parent.get(i) { -1.0 } else { 1.0 })
            .sum()
    }

    fn is_optimum(&self, point: &BitString) -> Option<bool> {
        Some(point.is_all_ones())
    }
}

/// `f(x) = sum a_i x_i` with `a_1 >= ... >= a_n > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFitness {
    weights: Vec<f64>,
}

/// Linear function from arbitrary positive weights; they are sorted into
/// non-increasing order, which is equivalent up to relabeling positions.
pub fn linear(mut weights: Vec<f64>) -> Result<LinearFitness, FitnessError> {
    if let Some((index, &value)) = weights
        .iter()
        .enumerate()
        .find(|(_, w)| !(**w > 0.0 && w.is_finite()))
    {
        return Err(FitnessError::NonpositiveWeight { index, value });
    }
    weights.sort_by(|a, b| b.total_cmp(a));
    Ok(LinearFitness { weights })
}

impl LinearFitness {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl Fitness for LinearFitness {
    fn len(&self) -> usize {
        self.weights.len()
    }

    fn evaluate(&self, point: &BitString) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .filter(|(i, _)| point.get(*i))
            .map(|(_, w)| w)
            .sum()
    }

    fn delta(&self, parent: &BitString, flips: &[usize]) -> f64 {
        flips
            .iter()
            .map(|&i| {
                if parent.get(i) {
                    -self.weights[i]
                } else {
                    self.weights[i]
                }
            })
            .sum()
    }

    fn is_optimum(&self, point: &BitString) -> Option<bool> {
        Some(point.is_all_ones())
    }
}

/// Distribution of i.i.d. weights for [`random_linear`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightDistribution {
    /// Uniform on `(low, high]`.
    Uniform { low: f64, high: f64 },
    Exponential { rate: f64 },
}

impl Default for WeightDistribution {
    fn default() -> Self {
        WeightDistribution::Uniform {
            low: 0.0,
            high: 1.0,
        }
    }
}

/// Linear function with i.i.d. positive random weights, sorted descending.
pub fn random_linear(
    n: usize,
    distribution: WeightDistribution,
    seed: u64,
) -> Result<LinearFitness, FitnessError> {
    let mut rng = rng_from_seed(seed);
    let weights: Vec<f64> = match distribution {
        WeightDistribution::Uniform { low, high } => {
            if !(low >= 0.0 && high > low && high.is_finite()) {
                return Err(FitnessError::InvalidArgument(format!(
                    "uniform weights need 0 <= low < high, got ({low}, {high}]"
                )));
            }
            (0..n)
                .map(|_| high - (high - low) * rng.random::<f64>())
                .collect()
        }
        WeightDistribution::Exponential { rate } => {
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(FitnessError::InvalidArgument(format!(
                    "exponential rate must be positive, got {rate}"
                )));
            }
            (0..n)
                .map(|_| -(1.0 - rng.random::<f64>()).ln() / rate)
                .map(|w: f64| if w > 0.0 { w } else { f64::MIN_POSITIVE })
                .collect()
        }
    };
    linear(weights)
}

/// Binary value, `a_i = 2^{n-1-i}` for 0-based position `i`.
///
/// Values are exact integers for `n <= 62`; beyond that `evaluate` is a
/// rounded (possibly infinite) float, while `delta` keeps an exact sign: the
/// lowest flipped position dominates all others.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinVal {
    n: usize,
}

/// Largest length with exact integer values.
pub const BINVAL_EXACT_LIMIT: usize = 62;

pub fn binval(n: usize) -> BinVal {
    BinVal { n }
}

impl BinVal {
    /// Exact integer value for `n <= 62`.
    pub fn exact_value(&self, point: &BitString) -> Option<u64> {
        if self.n > BINVAL_EXACT_LIMIT {
            return None;
        }
        Some(
            (0..self.n)
                .filter(|&i| point.get(i))
                .map(|i| 1u64 << (self.n - 1 - i))
                .sum(),
        )
    }
}

impl Fitness for BinVal {
    fn len(&self) -> usize {
        self.n
    }

    fn evaluate(&self, point: &BitString) -> f64 {
        match self.exact_value(point) {
            Some(v) => v as f64,
            None => (0..self.n)
                .filter(|&i| point.get(i))
                .map(|i| 2f64.powi((self.n - 1 - i) as i32))
                .sum(),
        }
    }

    fn delta(&self, parent: &BitString, flips: &[usize]) -> f64 {
        let Some(&top) = flips.iter().min() else {
            return 0.0;
        };
        if self.n <= BINVAL_EXACT_LIMIT {
            let d: i128 = flips
                .iter()
                .map(|&i| {
                    let w = 1i128 << (self.n - 1 - i);
                    if parent.get(i) {
                        -w
                    } else {
                        w
                    }
                })
                .sum();
            return d as f64;
        }
        // Scale by the leading weight: the leading term is +-1 and the rest
        // sum to less than 1 in magnitude, so the sign is exact.
        let scaled: f64 = flips
            .iter()
            .map(|&i| {
                let w = 2f64.powi(-((i - top) as i32));
                if parent.get(i) {
                    -w
                } else {
                    w
                }
            })
            .sum();
        let exponent = (self.n - 1 - top) as i32;
        if exponent > 1000 {
            scaled.signum() * f64::INFINITY
        } else {
            scaled * 2f64.powi(exponent)
        }
    }

    fn is_optimum(&self, point: &BitString) -> Option<bool> {
        Some(point.is_all_ones())
    }
}

/// `-OneMax`, a strictly anti-monotone function for validator tests.
#[derive(Debug, Clone, Copy)]
pub struct MinusOneMax {
    pub n: usize,
}

impl Fitness for MinusOneMax {
    fn len(&self) -> usize {
        self.n
    }

    fn evaluate(&self, point: &BitString) -> f64 {
        -(point.one_count() as f64)
    }

    fn is_optimum(&self, point: &BitString) -> Option<bool> {
        Some(point.zero_count() == self.n)
    }
}

/// Outcome of [`is_strictly_monotone`].
#[derive(Debug, Clone, PartialEq)]
pub enum MonotoneVerdict {
    Strict,
    /// `upper` dominates `lower` but `f(upper) <= f(lower)`.
    Violation { lower: BitString, upper: BitString },
}

impl MonotoneVerdict {
    pub fn is_strict(&self) -> bool {
        matches!(self, MonotoneVerdict::Strict)
    }
}

/// Largest `n` accepted by [`is_strictly_monotone`].
pub const MONOTONE_CHECK_LIMIT: usize = 16;

fn point_from_index(index: usize, n: usize) -> BitString {
    BitString::from_bits((0..n).map(|i| index >> i & 1 == 1))
}

/// Exhaustive strict-monotonicity check over `{0,1}^n`.
///
/// Strict increase along every single 0 -> 1 flip is equivalent to strict
/// increase along every dominance pair (chain the covering flips), so only
/// the `n 2^{n-1}` covering pairs are compared.
pub fn is_strictly_monotone(f: &dyn Fitness, n: usize) -> Result<MonotoneVerdict, FitnessError> {
    if n > MONOTONE_CHECK_LIMIT {
        return Err(FitnessError::TooLarge(n));
    }
    if f.len() != n {
        return Err(FitnessError::LengthMismatch {
            expected: f.len(),
            got: n,
        });
    }
    let values: Vec<f64> = (0..1usize << n)
        .map(|x| f.evaluate(&point_from_index(x, n)))
        .collect();
    for x in 0..1usize << n {
        for i in 0..n {
            if x >> i & 1 == 0 {
                let y = x | 1 << i;
                if !(values[y] > values[x]) {
                    return Ok(MonotoneVerdict::Violation {
                        lower: point_from_index(x, n),
                        upper: point_from_index(y, n),
                    });
                }
            }
        }
    }
    Ok(MonotoneVerdict::Strict)
}

/// Margin of `alpha c - e^{-(1 - alpha) c} > alpha / (1 - alpha)`.
pub fn alpha_margin(alpha: f64, c: f64) -> f64 {
    alpha * c - (-(1.0 - alpha) * c).exp() - alpha / (1.0 - alpha)
}

/// Scans `alpha in (0, 1/2)` on a grid and returns the feasible `alpha` with
/// the largest margin, with that margin.
pub fn find_alpha(c: f64, grid_step: f64) -> Result<Option<(f64, f64)>, FitnessError> {
    if !(c > 0.0) {
        return Err(FitnessError::InvalidArgument(format!("c = {c} must be positive")));
    }
    if !(grid_step > 0.0 && grid_step <= 0.01) {
        return Err(FitnessError::InvalidArgument(format!(
            "grid_step = {grid_step} must lie in (0, 0.01]"
        )));
    }
    let mut best: Option<(f64, f64)> = None;
    let mut k = 1u64;
    loop {
        let alpha = k as f64 * grid_step;
        if alpha >= 0.5 {
            break;
        }
        let m = alpha_margin(alpha, c);
        if m > 0.0 && best.is_none_or(|(_, bm)| m > bm) {
            best = Some((alpha, m));
        }
        k += 1;
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(s: &str) -> BitString {
        s.parse().unwrap()
    }

    #[test]
    fn onemax_examples() {
        let f = onemax(4);
        assert_eq!(f.evaluate(&bits("1010")), 2.0);
        assert_eq!(f.evaluate(&BitString::zeros(4)), 0.0);
        assert_eq!(f.evaluate(&BitString::ones(4)), 4.0);
        assert_eq!(f.is_optimum(&BitString::ones(4)), Some(true));
    }

    #[test]
    fn linear_examples() {
        assert_eq!(binval(4).evaluate(&bits("1010")), 10.0);
        assert_eq!(binval(4).exact_value(&bits("1010")), Some(10));
        let f = linear(vec![3.0, 2.0, 1.0]).unwrap();
        assert_eq!(f.evaluate(&bits("011")), 3.0);
        let unsorted = linear(vec![1.0, 3.0, 2.0]).unwrap();
        assert_eq!(unsorted.weights(), &[3.0, 2.0, 1.0]);
        assert_eq!(
            linear(vec![1.0, 0.0]).unwrap_err(),
            FitnessError::NonpositiveWeight { index: 1, value: 0.0 }
        );
    }

    #[test]
    fn random_linear_is_seeded() {
        let d = WeightDistribution::default();
        let a = random_linear(50, d, 9).unwrap();
        let b = random_linear(50, d, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, random_linear(50, d, 10).unwrap());
        assert!(a.weights().windows(2).all(|w| w[0] >= w[1]));
        assert!(a.weights().iter().all(|&w| w > 0.0));
        let e = random_linear(50, WeightDistribution::Exponential { rate: 2.0 }, 1).unwrap();
        assert!(e.weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn deltas_agree_with_full_evaluation() {
        let p = bits("0110100111");
        let flips = [0usize, 3, 4, 9];
        let mut child = p.clone();
        child.flip_all(&flips);
        let cases: Vec<Box<dyn Fitness>> = vec![
            Box::new(onemax(10)),
            Box::new(binval(10)),
            Box::new(linear(vec![5.0, 4.0, 4.0, 3.0, 2.5, 2.0, 1.0, 1.0, 0.5, 0.25]).unwrap()),
        ];
        for f in cases {
            let full = f.evaluate(&child) - f.evaluate(&p);
            assert!((f.delta(&p, &flips) - full).abs() < 1e-12);
        }
    }

    #[test]
    fn large_binval_delta_sign_is_lexicographic() {
        let n = 2000;
        let f = binval(n);
        let mut p = BitString::zeros(n);
        p.set(10, true);
        // Gaining position 5 beats losing 10 and everything below it.
        assert!(f.delta(&p, &[5, 10]) > 0.0);
        assert!(f.delta(&p, &[10, 11]) < 0.0);
        assert!(f.delta(&p, &[1500, 1999]) > 0.0);
        assert_eq!(f.delta(&p, &[]), 0.0);
        assert!(f.delta(&p, &[3]).is_infinite());
    }

    #[test]
    fn monotonicity_examples() {
        assert!(is_strictly_monotone(&onemax(8), 8).unwrap().is_strict());
        match is_strictly_monotone(&MinusOneMax { n: 4 }, 4).unwrap() {
            MonotoneVerdict::Violation { lower, upper } => {
                let f = MinusOneMax { n: 4 };
                assert!(f.evaluate(&upper) <= f.evaluate(&lower));
                assert_eq!(upper.hamming_distance(&lower), 1);
            }
            MonotoneVerdict::Strict => panic!("minus onemax reported monotone"),
        }
        assert_eq!(
            is_strictly_monotone(&onemax(17), 17).unwrap_err(),
            FitnessError::TooLarge(17)
        );
    }

    #[test]
    fn linear_functions_are_strictly_monotone() {
        for n in [1usize, 5, 12] {
            assert!(is_strictly_monotone(&binval(n), n).unwrap().is_strict());
            let f = random_linear(n, WeightDistribution::default(), n as u64).unwrap();
            assert!(is_strictly_monotone(&f, n).unwrap().is_strict());
        }
    }

    #[test]
    fn find_alpha_examples() {
        // Direct evaluation at alpha = 0.25, c = 2.2.
        let lhs = 0.25 * 2.2 - f64::exp(-0.75 * 2.2);
        assert!(lhs > 1.0 / 3.0);
        let (alpha, margin) = find_alpha(2.2, 1e-3).unwrap().unwrap();
        assert!(margin > 0.0);
        assert!(alpha_margin(alpha, 2.2) > 0.0);
        assert!((0.15..0.35).contains(&alpha));
        assert_eq!(find_alpha(0.5, 1e-3).unwrap(), None);
        assert!(find_alpha(1.0, 0.02).is_err());
    }

    #[test]
    fn find_alpha_feasibility_boundary() {
        for c in [0.1, 0.5, 1.0] {
            assert_eq!(find_alpha(c, 1e-4).unwrap(), None, "c = {c}");
        }
        for c in [2.2, 2.5, 3.0, 5.0] {
            assert!(find_alpha(c, 1e-4).unwrap().is_some(), "c = {c}");
        }
    }
}
