//! Scalar abstraction for the real-valued parts of the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// A floating point scalar: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant, panicking only for non-representable input.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("constant representable in scalar type")
    }

    /// Converts a count.
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable in scalar type")
    }

    /// Tolerance used by iterative solvers: `1e-10` for `f64`, looser for
    /// narrower types where that is unreachable.
    fn solver_tolerance() -> Self {
        let floor = Self::lit(1e-10);
        let eps_based = Self::epsilon() * Self::lit(1e4);
        if eps_based > floor {
            eps_based
        } else {
            floor
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
