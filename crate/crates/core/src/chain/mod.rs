//! Markov chains, hitting-time simulation and replicated estimation.

mod solver;
pub mod walks;

use std::fmt::Debug;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::{self, rng_from_seed};

pub use solver::{solve_expected_hitting, DIRECT_SOLVE_LIMIT};

/// Tolerance on the row sums of exact transition rows.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// One row of exact transitions: `(successor, probability)` pairs.
pub type TransitionRow<S> = Vec<(S, f64)>;

/// A time-homogeneous Markov chain.
///
/// Kernels are immutable after construction and shared between workers; all
/// mutable trajectory state lives in the caller.
pub trait ChainKernel: Sync {
    type State: Clone + PartialEq + Debug + Send + Sync;

    /// Draws `X_{t+1}` given `X_t = state`.
    fn sample_next(&self, state: &Self::State, rng: &mut dyn RngCore) -> Self::State;

    /// Advances `state` in place. Override when cloning a state is expensive.
    fn advance(&self, state: &mut Self::State, rng: &mut dyn RngCore) {
        *state = self.sample_next(state, rng);
    }

    /// Exact transition row from `state`, when the chain can enumerate it.
    fn exact_transitions(&self, _state: &Self::State) -> Option<TransitionRow<Self::State>> {
        None
    }

    /// Whether the state space is finite and can be enumerated by the caller.
    fn is_finite(&self) -> bool {
        false
    }
}

/// States that carry a real value, used by drift estimation and probes.
pub trait RealState {
    fn as_real(&self) -> f64;
}

impl RealState for u64 {
    fn as_real(&self) -> f64 {
        *self as f64
    }
}

impl RealState for i64 {
    fn as_real(&self) -> f64 {
        *self as f64
    }
}

impl RealState for f64 {
    fn as_real(&self) -> f64 {
        *self
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("all {replications} replications were censored at budget {budget}")]
    AllCensored { replications: usize, budget: u64 },
    #[error("transition from enumerated state {from} leaves the enumeration (successor {to})")]
    NotClosed { from: String, to: String },
    #[error("target unreachable from state {state}")]
    Singular { state: String },
    #[error("chain does not expose exact transitions at state {state}")]
    NoExactTransitions { state: String },
    #[error("transition row at state {state} sums to {sum}")]
    BadRow { state: String, sum: f64 },
    #[error("iterative solver stopped at relative residual {residual:e}")]
    NotConverged { residual: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Result of one hitting-time simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HittingTime {
    Hit(u64),
    Censored(u64),
}

impl HittingTime {
    pub fn steps(self) -> Option<u64> {
        match self {
            HittingTime::Hit(t) => Some(t),
            HittingTime::Censored(_) => None,
        }
    }

    pub fn is_censored(self) -> bool {
        matches!(self, HittingTime::Censored(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HittingOutcome<S> {
    pub time: HittingTime,
    /// First state inside the target, `None` when censored.
    pub first_state_in_target: Option<S>,
}

/// Replicated hitting-time summary. Moments and quantiles are over the
/// uncensored runs only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingStats {
    pub replication_count: usize,
    pub censored_count: usize,
    pub mean: f64,
    pub std_error: f64,
    pub median: f64,
    pub q90: f64,
    pub q99: f64,
    pub master_seed: u64,
}

impl HittingStats {
    /// Summarizes a batch of hitting times.
    pub fn from_times(
        times: &[HittingTime],
        budget: u64,
        master_seed: u64,
    ) -> Result<Self, ChainError> {
        let mut hits: Vec<u64> = times.iter().filter_map(|t| t.steps()).collect();
        if hits.is_empty() {
            return Err(ChainError::AllCensored {
                replications: times.len(),
                budget,
            });
        }
        hits.sort_unstable();
        let values: Vec<f64> = hits.iter().map(|&t| t as f64).collect();
        let (mean, std_error) = mean_and_std_error(&values);
        Ok(HittingStats {
            replication_count: times.len(),
            censored_count: times.len() - hits.len(),
            mean,
            std_error,
            median: nearest_rank(&values, 0.5),
            q90: nearest_rank(&values, 0.9),
            q99: nearest_rank(&values, 0.99),
            master_seed,
        })
    }

    pub fn uncensored_count(&self) -> usize {
        self.replication_count - self.censored_count
    }
}

/// Sample mean and standard error (n-1 denominator). A single value has
/// standard error 0.
pub fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Nearest-rank quantile of sorted data.
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Simulates until `target` holds or `budget` steps have been taken.
pub fn simulate_hitting<C, P>(
    chain: &C,
    start: &C::State,
    target: P,
    budget: u64,
    seed: u64,
) -> HittingOutcome<C::State>
where
    C: ChainKernel + ?Sized,
    P: Fn(&C::State) -> bool,
{
    let mut rng = rng_from_seed(seed);
    let mut state = start.clone();
    for t in 0..=budget {
        if target(&state) {
            return HittingOutcome {
                time: HittingTime::Hit(t),
                first_state_in_target: Some(state),
            };
        }
        if t < budget {
            chain.advance(&mut state, &mut rng);
        }
    }
    HittingOutcome {
        time: HittingTime::Censored(budget),
        first_state_in_target: None,
    }
}

/// Runs `replications` independent hitting simulations, in index order.
pub fn replicate_outcomes<C, P>(
    chain: &C,
    start: &C::State,
    target: P,
    replications: usize,
    budget: u64,
    master_seed: u64,
) -> Vec<HittingTime>
where
    C: ChainKernel + ?Sized,
    P: Fn(&C::State) -> bool + Sync,
{
    seed::replicate(replications, master_seed, |_, s| {
        simulate_hitting(chain, start, &target, budget, s).time
    })
}

/// Monte Carlo estimate of the expected hitting time.
pub fn replicate_hitting<C, P>(
    chain: &C,
    start: &C::State,
    target: P,
    replications: usize,
    budget: u64,
    master_seed: u64,
) -> Result<HittingStats, ChainError>
where
    C: ChainKernel + ?Sized,
    P: Fn(&C::State) -> bool + Sync,
{
    if replications == 0 {
        return Err(ChainError::InvalidArgument("replications must be >= 1".into()));
    }
    let times = replicate_outcomes(chain, start, target, replications, budget, master_seed);
    HittingStats::from_times(&times, budget, master_seed)
}

/// Mean one-step change from `state` and the 95% normal-approximation
/// half-width of its confidence interval.
pub fn empirical_drift<C>(
    chain: &C,
    state: &C::State,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64), ChainError>
where
    C: ChainKernel + ?Sized,
    C::State: RealState,
{
    if samples < 2 {
        return Err(ChainError::InvalidArgument("samples must be >= 2".into()));
    }
    let mut rng = rng_from_seed(seed);
    let x = state.as_real();
    let changes: Vec<f64> = (0..samples)
        .map(|_| chain.sample_next(state, &mut rng).as_real() - x)
        .collect();
    let (mean, se) = mean_and_std_error(&changes);
    Ok((mean, 1.959_963_984_540_054 * se))
}

/// Exact one-step drift `E[X_{t+1} - x | X_t = x]` from the transition row.
pub fn exact_drift<C>(chain: &C, state: &C::State) -> Result<f64, ChainError>
where
    C: ChainKernel + ?Sized,
    C::State: RealState,
{
    let row = chain
        .exact_transitions(state)
        .ok_or_else(|| ChainError::NoExactTransitions {
            state: format!("{state:?}"),
        })?;
    let x = state.as_real();
    Ok(row.iter().map(|(s, p)| p * (s.as_real() - x)).sum())
}

/// Records `probe(X_t)` at `t = 0, stride, 2 stride, ...` up to `budget`.
pub fn trajectory_probe<C, F>(
    chain: &C,
    start: &C::State,
    budget: u64,
    probe: F,
    stride: u64,
    seed: u64,
) -> Result<Vec<(u64, f64)>, ChainError>
where
    C: ChainKernel + ?Sized,
    F: Fn(&C::State) -> f64,
{
    if stride == 0 {
        return Err(ChainError::InvalidArgument("stride must be >= 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut state = start.clone();
    let mut series = Vec::with_capacity((budget / stride + 1) as usize);
    series.push((0, probe(&state)));
    for t in 1..=budget {
        chain.advance(&mut state, &mut rng);
        if t % stride == 0 {
            series.push((t, probe(&state)));
        }
    }
    Ok(series)
}

/// Checks that every exact row for the given states sums to one.
pub fn check_rows<C>(chain: &C, states: &[C::State]) -> Result<(), ChainError>
where
    C: ChainKernel + ?Sized,
{
    for s in states {
        let row = chain
            .exact_transitions(s)
            .ok_or_else(|| ChainError::NoExactTransitions {
                state: format!("{s:?}"),
            })?;
        let sum: f64 = row.iter().map(|(_, p)| p).sum();
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE || row.iter().any(|(_, p)| *p < 0.0) {
            return Err(ChainError::BadRow {
                state: format!("{s:?}"),
                sum,
            });
        }
    }
    Ok(())
}
