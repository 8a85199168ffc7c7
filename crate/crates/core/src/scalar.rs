//! Scalar abstraction shared by the simulation modules.

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FloatConst, FromPrimitive, ToPrimitive};

/// Real floating-point scalar: `f32` or `f64`.
pub trait Real:
    RealField + FloatConst + FromPrimitive + ToPrimitive + Copy + Debug + Display + Send + Sync
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("count representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Tolerance for "exact" identities such as normalization: `1e-12` in
    /// double precision, a few ulps-worth of headroom in single precision.
    #[inline]
    fn exact_tol() -> Self {
        let eps = Self::default_epsilon() * Self::lit(64.0);
        if eps > Self::lit(1e-12) {
            eps
        } else {
            Self::lit(1e-12)
        }
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `exp(i t)`.
#[inline]
pub fn cis<T: Real>(t: T) -> Complex<T> {
    Complex::new(t.cos(), t.sin())
}

#[inline]
pub fn norm_sqr<T: Real>(z: Complex<T>) -> T {
    z.re * z.re + z.im * z.im
}
