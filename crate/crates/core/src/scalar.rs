//! Scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst};
use rustfft::FftNum;

/// Floating-point sample type: `f32` or `f64`.
///
/// The transforms and solvers are written once against this trait. The
/// solver and all acceptance checks run in `f64`; `f32` is supported for
/// previews and memory-bound experiments.
pub trait Real:
    Float + FloatConst + FftNum + Default + Sum + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` constant, panicking only if the target type cannot
    /// represent it at all (never the case for `f32`/`f64`).
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from(x).expect("constant representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
