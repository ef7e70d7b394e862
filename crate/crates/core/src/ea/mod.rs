//! The (1+1) EA with standard bit mutation, optional adversarial noise and
//! zero-density probes.

mod bits;

use std::io::Write;

use rand::seq::index::sample;
use rand::{Rng, RngCore};
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bits::{density, BitString};

use crate::chain::{ChainKernel, TransitionRow};
use crate::fitness::Fitness;
use crate::seed::rng_from_seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EaError {
    #[error("index set is empty")]
    EmptySet,
    #[error("position {position} out of range for length {len}")]
    PositionOutOfRange { position: usize, len: usize },
    #[error("invalid character {0:?} in bit string")]
    BadBitString(char),
    #[error("point has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("fitness function cannot identify its optimum; only censored probing runs are allowed")]
    NoOptimumPredicate,
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("stateful fitness functions cannot be used as a shared chain kernel")]
    StatefulFitness,
    #[error("probe write failed: {0}")]
    Io(String),
}

/// Length `n` and mutation parameter `c`; each bit flips with probability
/// `c / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EAParams {
    n: usize,
    c: f64,
}

impl EAParams {
    pub fn new(n: usize, c: f64) -> Result<Self, EaError> {
        if n == 0 {
            return Err(EaError::BadParams("n must be positive".into()));
        }
        if !(c > 0.0 && c <= n as f64) {
            return Err(EaError::BadParams(format!("c = {c} must lie in (0, n = {n}]")));
        }
        Ok(EAParams { n, c })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn flip_probability(&self) -> f64 {
        (self.c / self.n as f64).min(1.0)
    }
}

/// Type-1 adversary: overrides the acceptance decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Adversary1 {
    AlwaysAccept,
    AlwaysReject,
    /// The coin is drawn but the fitness comparison decides anyway.
    #[default]
    None,
}

/// Type-2 adversary: a penalty fixed before the offspring is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Penalty {
    #[default]
    Zero,
    Infinite,
    Constant(f64),
}

impl Penalty {
    fn value(&self) -> f64 {
        match *self {
            Penalty::Zero => 0.0,
            Penalty::Infinite => f64::INFINITY,
            Penalty::Constant(v) => v,
        }
    }
}

/// `delta1`: probability the type-1 adversary decides. `delta2`: probability
/// that no penalty is applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub delta1: f64,
    pub delta2: f64,
    #[serde(default)]
    pub adversary1: Adversary1,
    #[serde(default)]
    pub adversary2: Penalty,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig::noiseless()
    }
}

impl NoiseConfig {
    pub fn noiseless() -> Self {
        NoiseConfig {
            delta1: 0.0,
            delta2: 1.0,
            adversary1: Adversary1::None,
            adversary2: Penalty::Zero,
        }
    }

    pub fn validate(&self) -> Result<(), EaError> {
        for (name, p) in [("delta1", self.delta1), ("delta2", self.delta2)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(EaError::BadParams(format!("{name} = {p} must lie in [0, 1]")));
            }
        }
        if let Penalty::Constant(v) = self.adversary2 {
            if !(v >= 0.0) {
                return Err(EaError::BadParams(format!("penalty {v} must be non-negative")));
            }
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.delta1 == 0.0 && self.delta2 == 1.0
    }
}

/// What the noise channels did in one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseEvents {
    pub type1_fired: bool,
    pub type2_fired: bool,
    pub penalty: f64,
}

/// Draws `k ~ Binomial(n, c/n)` and a uniform `k`-subset of positions.
/// The returned positions are in sampling order.
pub fn mutation_flips(params: &EAParams, rng: &mut dyn RngCore) -> Vec<usize> {
    let p = params.flip_probability();
    let k = if p >= 1.0 {
        params.n as u64
    } else {
        Binomial::new(params.n as u64, p)
            .expect("flip probability lies in [0, 1]")
            .sample(rng)
    };
    sample(rng, params.n, k as usize).into_vec()
}

/// Offspring of `parent` under standard bit mutation.
pub fn mutate(
    parent: &BitString,
    params: &EAParams,
    rng: &mut dyn RngCore,
) -> Result<BitString, EaError> {
    if parent.len() != params.n {
        return Err(EaError::LengthMismatch {
            expected: params.n,
            got: parent.len(),
        });
    }
    let mut child = parent.clone();
    child.flip_all(&mutation_flips(params, rng));
    Ok(child)
}

/// Coin with probability `p`; degenerate coins consume no randomness.
fn coin(p: f64, rng: &mut dyn RngCore) -> bool {
    if p <= 0.0 {
        false
    } else if p >= 1.0 {
        true
    } else {
        rng.random_bool(p)
    }
}

/// One round in place. Randomness is consumed as: offspring, type-1 coin,
/// type-2 coin. Returns whether the offspring was accepted.
pub fn ea_step(
    current: &mut BitString,
    f: &mut dyn Fitness,
    params: &EAParams,
    noise: &NoiseConfig,
    rng: &mut dyn RngCore,
) -> (bool, NoiseEvents) {
    let flips = mutation_flips(params, rng);
    let mut events = NoiseEvents::default();
    let accept = if coin(noise.delta1, rng) {
        events.type1_fired = true;
        match noise.adversary1 {
            Adversary1::AlwaysAccept => true,
            Adversary1::AlwaysReject => false,
            Adversary1::None => f.delta(current, &flips) >= 0.0,
        }
    } else if !coin(noise.delta2, rng) {
        events.type2_fired = true;
        events.penalty = noise.adversary2.value();
        events.penalty.is_finite() && f.delta(current, &flips) >= events.penalty
    } else {
        f.delta(current, &flips) >= 0.0
    };
    if accept {
        current.flip_all(&flips);
        f.accepted(current, &flips);
    }
    (accept, events)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Start {
    Random,
    Given(BitString),
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RunStatus {
    /// Optimum found after this many rounds.
    Optimum(u64),
    /// Budget exhausted.
    Censored(u64),
    /// A capped fitness construction ran out of levels after this many rounds.
    CapReached(u64),
}

impl RunStatus {
    pub fn steps(&self) -> u64 {
        match *self {
            RunStatus::Optimum(t) | RunStatus::Censored(t) | RunStatus::CapReached(t) => t,
        }
    }

    pub fn is_optimum(&self) -> bool {
        matches!(self, RunStatus::Optimum(_))
    }
}

/// Named index set whose zero density is recorded every `stride` rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub name: String,
    pub positions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSpec {
    pub probes: Vec<Probe>,
    pub stride: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub t: u64,
    pub probe_name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub status: RunStatus,
    pub final_point: BitString,
    pub accepted_count: u64,
    pub trace: Option<Vec<TracePoint>>,
}

/// Runs the EA until the optimum predicate holds or `budget` rounds pass.
///
/// `f` is reset to the starting point first; stateful functions must not be
/// shared between concurrent runs.
pub fn run_ea(
    f: &mut dyn Fitness,
    params: &EAParams,
    start: &Start,
    noise: &NoiseConfig,
    budget: u64,
    seed: u64,
    probes: Option<&ProbeSpec>,
) -> Result<OptimizationResult, EaError> {
    if f.len() != params.n {
        return Err(EaError::LengthMismatch {
            expected: params.n,
            got: f.len(),
        });
    }
    noise.validate()?;
    if let Some(spec) = probes {
        if spec.stride == 0 {
            return Err(EaError::BadParams("probe stride must be positive".into()));
        }
        for p in &spec.probes {
            if p.positions.is_empty() {
                return Err(EaError::EmptySet);
            }
            if let Some(&position) = p.positions.iter().find(|&&i| i >= params.n) {
                return Err(EaError::PositionOutOfRange {
                    position,
                    len: params.n,
                });
            }
        }
    }
    let mut rng = rng_from_seed(seed);
    let mut x = match start {
        Start::Random => BitString::random(params.n, &mut rng),
        Start::Given(p) if p.len() == params.n => p.clone(),
        Start::Given(p) => {
            return Err(EaError::LengthMismatch {
                expected: params.n,
                got: p.len(),
            })
        }
    };
    let has_predicate = f.is_optimum(&x).is_some();
    f.reset(&x);
    let mut trace = probes.map(|_| Vec::new());
    let record = |t: u64, x: &BitString, trace: &mut Option<Vec<TracePoint>>| {
        if let (Some(spec), Some(trace)) = (probes, trace.as_mut()) {
            if t.is_multiple_of(spec.stride) {
                for p in &spec.probes {
                    trace.push(TracePoint {
                        t,
                        probe_name: p.name.clone(),
                        value: x.zeros_in(&p.positions) as f64 / p.positions.len() as f64,
                    });
                }
            }
        }
    };
    let finish = |status, x, accepted_count, trace| OptimizationResult {
        status,
        final_point: x,
        accepted_count,
        trace,
    };
    let mut accepted_count = 0u64;
    let mut t = 0u64;
    record(0, &x, &mut trace);
    loop {
        if has_predicate && f.is_optimum(&x) == Some(true) {
            return Ok(finish(RunStatus::Optimum(t), x, accepted_count, trace));
        }
        if f.cap_reached() {
            return Ok(finish(RunStatus::CapReached(t), x, accepted_count, trace));
        }
        if t >= budget {
            if !has_predicate && probes.is_none() {
                return Err(EaError::NoOptimumPredicate);
            }
            return Ok(finish(RunStatus::Censored(budget), x, accepted_count, trace));
        }
        let (accepted, _) = ea_step(&mut x, f, params, noise, &mut rng);
        accepted_count += u64::from(accepted);
        t += 1;
        record(t, &x, &mut trace);
    }
}

/// Writes probe traces as CSV with header `t,probe_name,value`.
pub fn write_trace_csv<W: Write>(trace: &[TracePoint], out: W) -> Result<(), EaError> {
    let io = |e: std::io::Error| EaError::Io(e.to_string());
    let mut out = std::io::BufWriter::new(out);
    write!(out, "t,probe_name,value\r\n").map_err(io)?;
    for p in trace {
        let name = if p.probe_name.contains([',', '"', '\r', '\n']) {
            format!("\"{}\"", p.probe_name.replace('"', "\"\""))
        } else {
            p.probe_name.clone()
        };
        write!(out, "{},{},{}\r\n", p.t, name, p.value).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Zero-count chain of the noiseless EA on OneMax: from `x` zeros, `r` of
/// them and `s` of the `n - x` ones flip; the move to `x - r + s` is taken
/// iff `s <= r`.
#[derive(Debug, Clone)]
pub struct OneMaxZeroChain {
    params: EAParams,
}

pub fn onemax_zero_chain(n: usize, c: f64) -> Result<OneMaxZeroChain, EaError> {
    Ok(OneMaxZeroChain {
        params: EAParams::new(n, c)?,
    })
}

fn binomial_pmf(m: usize, p: f64) -> Vec<f64> {
    if p >= 1.0 {
        let mut v = vec![0.0; m + 1];
        v[m] = 1.0;
        return v;
    }
    let q = 1.0 - p;
    let ratio = p / q;
    let mut v = Vec::with_capacity(m + 1);
    let mut cur = q.powi(m as i32);
    for k in 0..=m {
        v.push(cur);
        cur *= ratio * (m - k) as f64 / (k + 1) as f64;
    }
    v
}

impl ChainKernel for OneMaxZeroChain {
    type State = u64;

    fn sample_next(&self, state: &u64, rng: &mut dyn RngCore) -> u64 {
        let x = (*state as usize).min(self.params.n);
        let flips = mutation_flips(&self.params, rng);
        // Positions 0..x hold the zeros.
        let r = flips.iter().filter(|&&i| i < x).count();
        let s = flips.len() - r;
        if s <= r {
            (x - r + s) as u64
        } else {
            x as u64
        }
    }

    fn exact_transitions(&self, state: &u64) -> Option<TransitionRow<u64>> {
        let n = self.params.n;
        let x = *state as usize;
        if x > n {
            return None;
        }
        let p = self.params.flip_probability();
        let zeros = binomial_pmf(x, p);
        let ones = binomial_pmf(n - x, p);
        let mut row = vec![0.0; x + 1];
        for (r, pr) in zeros.iter().enumerate() {
            for (s, ps) in ones.iter().enumerate().take(r + 1) {
                row[x - r + s] += pr * ps;
            }
        }
        let moved: f64 = row[..x].iter().sum();
        row[x] = 1.0 - moved;
        Some(
            row.into_iter()
                .enumerate()
                .filter(|(_, q)| *q > 0.0)
                .map(|(y, q)| (y as u64, q))
                .collect(),
        )
    }

    fn is_finite(&self) -> bool {
        true
    }
}

/// The EA on a stateless fitness function viewed as a Markov chain on points.
pub struct EaChain<'a> {
    fitness: &'a dyn Fitness,
    params: EAParams,
    noise: NoiseConfig,
}

impl<'a> EaChain<'a> {
    pub fn new(
        fitness: &'a dyn Fitness,
        params: EAParams,
        noise: NoiseConfig,
    ) -> Result<Self, EaError> {
        if fitness.is_stateful() {
            return Err(EaError::StatefulFitness);
        }
        if fitness.len() != params.n {
            return Err(EaError::LengthMismatch {
                expected: params.n,
                got: fitness.len(),
            });
        }
        noise.validate()?;
        Ok(EaChain {
            fitness,
            params,
            noise,
        })
    }
}

/// Adapter so a shared `&dyn Fitness` can be driven by [`ea_step`]; it
/// ignores notifications, which stateless functions do not need.
struct Stateless<'a>(&'a dyn Fitness);

impl Fitness for Stateless<'_> {
    fn len(&self) -> usize {
        self.0.len()
    }
    fn evaluate(&self, point: &BitString) -> f64 {
        self.0.evaluate(point)
    }
    fn delta(&self, parent: &BitString, flips: &[usize]) -> f64 {
        self.0.delta(parent, flips)
    }
    fn is_optimum(&self, point: &BitString) -> Option<bool> {
        self.0.is_optimum(point)
    }
}

impl ChainKernel for EaChain<'_> {
    type State = BitString;

    fn sample_next(&self, state: &BitString, rng: &mut dyn RngCore) -> BitString {
        let mut next = state.clone();
        self.advance(&mut next, rng);
        next
    }

    fn advance(&self, state: &mut BitString, rng: &mut dyn RngCore) {
        ea_step(
            state,
            &mut Stateless(self.fitness),
            &self.params,
            &self.noise,
            rng,
        );
    }
}
