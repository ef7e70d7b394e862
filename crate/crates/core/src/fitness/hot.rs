//! Level-based strictly monotone function that is hard for the (1+1) EA at
//! large mutation parameters.
//!
//! Level `i` (1-based) owns a random set `A_i` of `ceil(alpha n)` positions and
//! a subset `B_i` of `ceil(beta n)` of them. A point is on level `l` if `l` is
//! the largest level whose `B_l` holds at most `epsilon |B_l|` zeros, and
//!
//! ```text
//! f(x) = l n^2 + n * ones(x, A_{l+1}) + ones(x, outside A_{l+1})
//! ```
//!
//! Sets for level `i` are drawn from their own stream `derive_seed(seed, i)`,
//! so drawing lazily and drawing up front give the same function.

use std::borrow::Cow;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{Fitness, FitnessError};
use crate::decline::decimal_ratio;
use crate::ea::BitString;
use crate::seed::{derive_seed, rng_from_seed};

/// Upper bound on `L_max * n` for [`Mode::Static`].
pub const STATIC_SIZE_LIMIT: u64 = 100_000_000;

/// Upper bound on the default level cap.
pub const DEFAULT_LEVEL_CAP_LIMIT: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    /// All levels are considered when evaluating.
    Static,
    /// Only levels up to the current level plus one are considered.
    TimeDependent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HotMonotoneConfig {
    pub n: usize,
    /// Mutation parameter the construction targets; informational.
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub mu: f64,
    /// Defaults to `min(ceil(e^{mu n}), 10^6)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level_cap: Option<u64>,
    pub seed: u64,
}

impl HotMonotoneConfig {
    /// Config with `beta = alpha / 20`, `epsilon = alpha / 10`, `mu = 1`.
    pub fn from_alpha(n: usize, c: f64, alpha: f64, seed: u64) -> Self {
        HotMonotoneConfig {
            n,
            c,
            alpha,
            beta: alpha / 20.0,
            epsilon: alpha / 10.0,
            mu: 1.0,
            level_cap: None,
            seed,
        }
    }

    pub fn effective_level_cap(&self) -> u64 {
        self.level_cap.unwrap_or_else(|| {
            let e = (self.mu * self.n as f64).exp().ceil();
            if e >= DEFAULT_LEVEL_CAP_LIMIT as f64 {
                DEFAULT_LEVEL_CAP_LIMIT
            } else {
                (e as u64).max(1)
            }
        })
    }
}

/// The sets of one level, sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelSets {
    pub level: u64,
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

impl LevelSets {
    fn in_a(&self, i: usize) -> bool {
        self.a.binary_search(&i).is_ok()
    }

    fn in_b(&self, i: usize) -> bool {
        self.b.binary_search(&i).is_ok()
    }
}

/// Replayable description of a hot-monotone instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotMonotoneSnapshot {
    pub config: HotMonotoneConfig,
    pub mode: Mode,
    pub level_cap: u64,
    pub a_size: usize,
    pub b_size: usize,
    pub zero_threshold: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub current_level: Option<u64>,
    /// Present only when `n <= 64`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sets: Option<Vec<LevelSets>>,
}

#[derive(Debug, Clone)]
pub struct HotMonotone {
    config: HotMonotoneConfig,
    mode: Mode,
    level_cap: u64,
    a_size: usize,
    b_size: usize,
    /// Largest zero count in `B` that still satisfies a level.
    zero_threshold: usize,
    /// Static: every level `1..=L_max + 1`. Time-dependent: a window of
    /// levels starting at `window_start`; older levels are regenerated.
    sets: Vec<LevelSets>,
    window_start: u64,
    current_level: u64,
}

fn exact_decimal(name: &str, x: f64) -> Result<(u64, u64), FitnessError> {
    if !x.is_finite() || x < 0.0 {
        return Err(FitnessError::ConfigInfeasible(format!("{name} = {x}")));
    }
    decimal_ratio(&format!("{x}")).ok_or_else(|| {
        FitnessError::ConfigInfeasible(format!("{name} = {x} has too many digits"))
    })
}

fn ceil_mul(x: (u64, u64), n: usize) -> usize {
    let prod = u128::from(x.0) * n as u128;
    prod.div_ceil(u128::from(x.1)) as usize
}

fn floor_mul(x: (u64, u64), n: usize) -> usize {
    (u128::from(x.0) * n as u128 / u128::from(x.1)) as usize
}

/// Builds the hot-monotone function for `config`.
pub fn hot_monotone(config: HotMonotoneConfig, mode: Mode) -> Result<HotMonotone, FitnessError> {
    let infeasible = |m: String| Err(FitnessError::ConfigInfeasible(m));
    let n = config.n;
    if n == 0 {
        return infeasible("n must be positive".into());
    }
    if !(config.alpha > 0.0 && config.alpha < 0.5) {
        return infeasible(format!("alpha = {} must lie in (0, 1/2)", config.alpha));
    }
    if !(config.beta > 0.0) || config.beta > config.alpha {
        return infeasible(format!(
            "beta = {} must lie in (0, alpha = {}]",
            config.beta, config.alpha
        ));
    }
    if !(config.epsilon > 0.0 && config.epsilon < 1.0) {
        return infeasible(format!("epsilon = {} must lie in (0, 1)", config.epsilon));
    }
    if !(config.mu > 0.0) {
        return infeasible(format!("mu = {} must be positive", config.mu));
    }
    let a_size = ceil_mul(exact_decimal("alpha", config.alpha)?, n);
    let b_size = ceil_mul(exact_decimal("beta", config.beta)?, n);
    if b_size < 1 || a_size > n || b_size > a_size {
        return infeasible(format!("set sizes |A| = {a_size}, |B| = {b_size} for n = {n}"));
    }
    let zero_threshold = floor_mul(exact_decimal("epsilon", config.epsilon)?, b_size);
    let level_cap = config.effective_level_cap();
    if level_cap == 0 {
        return infeasible("level cap must be positive".into());
    }
    if mode == Mode::Static && level_cap.saturating_mul(n as u64) > STATIC_SIZE_LIMIT {
        return infeasible(format!(
            "static mode needs L_max * n <= {STATIC_SIZE_LIMIT}, got {level_cap} * {n}"
        ));
    }
    let mut f = HotMonotone {
        config,
        mode,
        level_cap,
        a_size,
        b_size,
        zero_threshold,
        sets: Vec::new(),
        window_start: 1,
        current_level: 0,
    };
    match mode {
        Mode::Static => {
            f.sets = (1..=level_cap + 1).map(|l| f.draw(l)).collect();
        }
        Mode::TimeDependent => {
            f.current_level = f.restricted_level(&BitString::zeros(n), 1);
            f.refresh_window();
        }
    }
    Ok(f)
}

/// Level of `point`: `l` for static functions, the tracked `l~` for
/// time-dependent ones.
pub fn level(point: &BitString, fitness: &dyn Fitness) -> Result<u64, FitnessError> {
    let f = fitness
        .as_hot_monotone()
        .ok_or(FitnessError::WrongFitnessKind)?;
    if point.len() != f.config.n {
        return Err(FitnessError::LengthMismatch {
            expected: f.config.n,
            got: point.len(),
        });
    }
    Ok(match f.mode {
        Mode::Static => f.static_level(point),
        Mode::TimeDependent => f.current_level,
    })
}

impl HotMonotone {
    pub fn config(&self) -> &HotMonotoneConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn level_cap(&self) -> u64 {
        self.level_cap
    }

    pub fn a_size(&self) -> usize {
        self.a_size
    }

    pub fn b_size(&self) -> usize {
        self.b_size
    }

    pub fn zero_threshold(&self) -> usize {
        self.zero_threshold
    }

    /// Tracked level `l~` (time-dependent mode).
    pub fn current_level(&self) -> u64 {
        self.current_level
    }

    fn draw(&self, level: u64) -> LevelSets {
        let mut rng = rng_from_seed(derive_seed(self.config.seed, level));
        let mut a = sample(&mut rng, self.config.n, self.a_size).into_vec();
        let mut b: Vec<usize> = sample(&mut rng, self.a_size, self.b_size)
            .into_iter()
            .map(|k| a[k])
            .collect();
        a.sort_unstable();
        b.sort_unstable();
        LevelSets { level, a, b }
    }

    /// Sets of `level` (1-based, up to `L_max + 1`).
    pub fn level_sets(&self, level: u64) -> Cow<'_, LevelSets> {
        assert!(level >= 1 && level <= self.level_cap + 1, "level {level} out of range");
        let idx = level.wrapping_sub(self.window_start) as usize;
        match self.sets.get(idx) {
            Some(s) if level >= self.window_start => Cow::Borrowed(s),
            _ => Cow::Owned(self.draw(level)),
        }
    }

    fn refresh_window(&mut self) {
        let start = self.current_level.max(1);
        let end = (self.current_level + 2).min(self.level_cap + 1);
        if start == self.window_start && self.sets.len() == (end + 1 - start) as usize {
            return;
        }
        self.sets = (start..=end).map(|l| self.draw(l)).collect();
        self.window_start = start;
    }

    fn satisfies(&self, zeros_in_b: usize) -> bool {
        zeros_in_b <= self.zero_threshold
    }

    /// Largest level in `1..=cap` whose `B` is satisfied by `point`, else 0.
    fn restricted_level(&self, point: &BitString, cap: u64) -> u64 {
        (1..=cap.min(self.level_cap))
            .rev()
            .find(|&l| self.satisfies(point.zeros_in(&self.level_sets(l).b)))
            .unwrap_or(0)
    }

    fn static_level(&self, point: &BitString) -> u64 {
        self.restricted_level(point, self.level_cap)
    }

    fn cap(&self) -> u64 {
        match self.mode {
            Mode::Static => self.level_cap,
            Mode::TimeDependent => (self.current_level + 1).min(self.level_cap),
        }
    }

    fn value_at(&self, point: &BitString, level: u64) -> u128 {
        let n = self.config.n as u128;
        let a_ones = (self.a_size - point.zeros_in(&self.level_sets(level + 1).a)) as u128;
        u128::from(level) * n * n + (n - 1) * a_ones + point.one_count() as u128
    }

    /// Exact value `l n^2 + ...` under the current level window.
    pub fn exact_value(&self, point: &BitString) -> u128 {
        let l = self.restricted_level(point, self.cap());
        self.value_at(point, l)
    }

    /// Level of `parent` with `flips` applied, without materializing it.
    fn child_level(&self, parent: &BitString, flips: &[usize], cap: u64) -> u64 {
        (1..=cap)
            .rev()
            .find(|&l| {
                let sets = self.level_sets(l);
                let mut zeros = parent.zeros_in(&sets.b) as i64;
                for &i in flips {
                    if sets.in_b(i) {
                        zeros += if parent.get(i) { 1 } else { -1 };
                    }
                }
                self.satisfies(zeros as usize)
            })
            .unwrap_or(0)
    }

    pub fn snapshot(&self) -> HotMonotoneSnapshot {
        let sets = (self.config.n <= 64).then(|| {
            let top = match self.mode {
                Mode::Static => self.level_cap + 1,
                Mode::TimeDependent => (self.current_level + 2).min(self.level_cap + 1),
            };
            (1..=top).map(|l| self.level_sets(l).into_owned()).collect()
        });
        HotMonotoneSnapshot {
            config: self.config.clone(),
            mode: self.mode,
            level_cap: self.level_cap,
            a_size: self.a_size,
            b_size: self.b_size,
            zero_threshold: self.zero_threshold,
            current_level: (self.mode == Mode::TimeDependent).then_some(self.current_level),
            sets,
        }
    }
}

impl Fitness for HotMonotone {
    fn len(&self) -> usize {
        self.config.n
    }

    fn evaluate(&self, point: &BitString) -> f64 {
        self.exact_value(point) as f64
    }

    fn delta(&self, parent: &BitString, flips: &[usize]) -> f64 {
        let cap = self.cap();
        let lp = self.restricted_level(parent, cap);
        let lc = self.child_level(parent, flips, cap);
        if lp == lc {
            let sets = self.level_sets(lp + 1);
            let n = self.config.n as f64;
            return flips
                .iter()
                .map(|&i| {
                    let w = if sets.in_a(i) { n } else { 1.0 };
                    if parent.get(i) {
                        -w
                    } else {
                        w
                    }
                })
                .sum();
        }
        let mut child = parent.clone();
        child.flip_all(flips);
        let vc = self.value_at(&child, lc) as i128;
        let vp = self.value_at(parent, lp) as i128;
        (vc - vp) as f64
    }

    fn is_optimum(&self, point: &BitString) -> Option<bool> {
        Some(point.is_all_ones())
    }

    fn is_stateful(&self) -> bool {
        self.mode == Mode::TimeDependent
    }

    fn reset(&mut self, start: &BitString) {
        if self.mode == Mode::TimeDependent {
            self.current_level = self.restricted_level(start, 1);
            self.refresh_window();
        }
    }

    fn accepted(&mut self, point: &BitString, _flips: &[usize]) {
        if self.mode == Mode::TimeDependent {
            let l = self.restricted_level(point, self.cap());
            if l > self.current_level {
                self.current_level = l;
                self.refresh_window();
            }
        }
    }

    fn cap_reached(&self) -> bool {
        self.mode == Mode::TimeDependent && self.current_level >= self.level_cap
    }

    fn as_hot_monotone(&self) -> Option<&HotMonotone> {
        Some(self)
    }
}
