//! Floating point abstraction shared by every numerical module.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar the planner can run on: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into this scalar type.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).unwrap_or_else(Self::infinity)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
