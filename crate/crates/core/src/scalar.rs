//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All simulation and optimization code is written against [`Real`], so the
//! same circuits can be evaluated in `f64` (the default used by the CLI and
//! the acceptance suite) or in `f32` when memory matters more than accuracy.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real floating-point scalar usable by the simulator.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    /// Lossless-enough conversion back to `f64` for reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex number over a [`Real`] scalar.
pub type C<R> = Complex<R>;

#[inline]
pub(crate) fn c<R: Real>(re: R, im: R) -> C<R> {
    Complex::new(re, im)
}

#[inline]
pub(crate) fn cr<R: Real>(re: R) -> C<R> {
    Complex::new(re, R::zero())
}

/// `e^{i x}`.
#[inline]
pub(crate) fn cis<R: Real>(x: R) -> C<R> {
    Complex::new(x.cos(), x.sin())
}
