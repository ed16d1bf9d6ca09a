//! Scalar abstraction used throughout the crate.
//!
//! Every numerical kernel is generic over [`Real`], which bundles the
//! floating-point surface the algorithms need. `f32` and `f64` implement it;
//! the crate root exports `f64` aliases for the main entry types. Defaults and
//! pinned tolerances target `f64`; `f32` users should loosen them.

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + core::fmt::Debug
    + core::fmt::Display
    + core::iter::Sum
    + core::ops::AddAssign
    + core::ops::SubAssign
    + 'static
{
    /// Converts an `f64` literal. Panics only for values outside the target
    /// type's range, which the literals used in this crate never are.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("literal not representable in scalar type")
    }

    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count not representable in scalar type")
    }

    /// Widens to `f64` for diagnostics and error payloads.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }

    /// Half the distance between consecutive values near 1, used as a
    /// rounding slack in inequality checks.
    fn slack() -> Self {
        Self::epsilon() * Self::of(32.0)
    }
}

impl Real for f32 {}
impl Real for f64 {}
