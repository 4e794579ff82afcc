//! Floating-point scalar abstraction shared by the numeric modules.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point: f32 or f64.
///
/// The HMM, the Viterbi trellis and the evaluation metrics are written
/// against this trait so the same code runs in single or double precision.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Absolute tolerance used when checking that a distribution sums to one.
    const NORM_TOLERANCE: f64;

    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).unwrap_or_else(Self::nan)
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    const NORM_TOLERANCE: f64 = 1e-4;
}

impl Scalar for f64 {
    const NORM_TOLERANCE: f64 = 1e-9;
}
