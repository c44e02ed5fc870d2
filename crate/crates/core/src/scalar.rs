use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar accepted by every algorithm in the crate.
///
/// Implemented for `f32` and `f64`. The faer bound supplies the dense kernels
/// (SVD, eigenvalues); `Float` supplies the elementary functions.
pub trait Real:
    faer::traits::RealField + Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Copy + Send + Sync + 'static
{
    /// Lossy conversion from `f64`, used for constants and file formats.
    fn of(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 is representable")
    }

    fn of_usize(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize is representable")
    }

    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
