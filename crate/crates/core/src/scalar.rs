//! Scalar abstraction for the geometry kernel.
//!
//! Geometry, sampling and forest construction are written against [`Real`] so
//! the same code runs in `f32` or `f64`. The statistics layer is `f64` only.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar usable by the kernel: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` constant.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Machine epsilon as a plain value.
    fn eps() -> Self {
        Self::epsilon()
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip<T: Real>(v: f64) -> f64 {
        T::lit(v).to_f64_lossy()
    }

    #[test]
    fn literal_conversion() {
        assert_eq!(roundtrip::<f64>(1.25), 1.25);
        assert_eq!(roundtrip::<f32>(1.25), 1.25);
        assert!((roundtrip::<f32>(0.1) - 0.1).abs() < 1e-7);
    }
}
