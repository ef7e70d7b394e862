//! Drift analysis toolkit: Markov-chain hitting times, closed-form drift
//! bounds, the random-decline chain, and a (1+1) EA with a library of
//! pseudo-boolean fitness functions.
//!
//! Bounds and exact solvers are generic over [`Scalar`] (`f32` or `f64`);
//! the aliases below fix the common `f64` instantiation.

// NaN must fail range checks, so `!(x > 0)` is intended.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod chain;
pub mod decline;
pub mod ea;
pub mod fitness;
pub mod scalar;
pub mod seed;

pub use bounds::{BoundError, BoundValue, Direction, DriftBoundReport, TheoremId};
pub use chain::{ChainError, ChainKernel, HittingStats, HittingTime};
pub use decline::{DeclineError, DeclineFactor};
pub use ea::{BitString, EAParams, EaError, NoiseConfig, OptimizationResult, RunStatus, Start};
pub use fitness::{Fitness, FitnessError};
pub use scalar::Scalar;

/// Bound report in double precision.
pub type DriftBoundReport64 = DriftBoundReport<f64>;
/// Bound report in single precision.
pub type DriftBoundReport32 = DriftBoundReport<f32>;
/// Expected hitting times keyed by state, in double precision.
pub type HittingTimes64<S> = std::collections::HashMap<S, f64>;
