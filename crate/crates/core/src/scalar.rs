//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::ScalarOperand;
use ndarray_linalg::{Lapack, Scalar};
use num_traits::{Float, FromPrimitive, NumAssign};

/// Real floating-point type usable by the tensor-train and kernel code.
///
/// Implemented for `f32` and `f64`. Both `num_traits::Float` and the LAPACK
/// scalar trait define `abs`, `sqrt`, `cos`, ... so call sites inside the crate
/// use the fully qualified `Float::` form.
pub trait Real:
    Float
    + FromPrimitive
    + NumAssign
    + Sum
    + ScalarOperand
    + Lapack
    + Scalar<Real = Self>
    + Send
    + Sync
    + Debug
    + Display
    + Default
    + 'static
{
    /// Lossy conversion from `f64` (configuration values, file payloads).
    fn of(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("finite f64 converts")
    }

    /// Widening conversion used for serialization and reporting.
    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("float converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
