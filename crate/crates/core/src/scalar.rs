//! Scalar abstraction shared by every numeric module.

use ndarray::NdFloat;
use num_traits::FromPrimitive;

/// Floating-point element type usable by the tape, the models and the attacks.
///
/// Implemented for `f32` and `f64`; the experiment pipeline runs in `f64`.
pub trait Scalar: NdFloat + FromPrimitive + std::iter::Sum {
    /// Lossless for the literals used in this crate (small decimal constants).
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl<T> Scalar for T where T: NdFloat + FromPrimitive + std::iter::Sum {}
