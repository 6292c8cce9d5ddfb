//! Scalar abstraction shared by the plain `f64` evaluation path and the
//! reverse-mode tape in [`crate::autodiff`].
//!
//! Geometry and loss kernels are written once, generically over [`Scalar`];
//! evaluating them with `f64` gives values, evaluating them with
//! [`crate::autodiff::Var`] records the computation for backpropagation. Both
//! paths therefore execute the identical sequence of floating-point
//! operations.

use core::ops::{Add, Div, Mul, Neg, Sub};

/// Width of the flat region of the clamped `acosh`: inputs below
/// `1 + ACOSH_GUARD` are treated as exactly 1 and carry zero derivative.
///
/// Round-off can push the distance argument `-c<x,y>_L` slightly below 1 for
/// coincident points; the clamp maps that region to distance 0. The derivative
/// of `acosh` diverges at 1, so the same guard defines the gradient as 0
/// there, which is the only non-differentiable point of the pipeline.
pub const ACOSH_GUARD: f64 = 1e-10;

/// A differentiable scalar: `f64` itself, or a tape variable.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Current numeric value (used for branching; branches are treated as
    /// locally constant by the tape).
    fn value(self) -> f64;

    /// `self + k` for a plain constant.
    fn add_f64(self, k: f64) -> Self;

    /// `self * k` for a plain constant.
    fn mul_f64(self, k: f64) -> Self;

    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn ln_1p(self) -> Self;
    fn sinh(self) -> Self;

    /// `acosh(max(self, 1))`, with derivative 0 for inputs below
    /// `1 + ACOSH_GUARD` (see [`ACOSH_GUARD`]).
    fn acosh_clamped(self) -> Self;
}

impl Scalar for f64 {
    #[inline]
    fn value(self) -> f64 {
        self
    }

    #[inline]
    fn add_f64(self, k: f64) -> Self {
        self + k
    }

    #[inline]
    fn mul_f64(self, k: f64) -> Self {
        self * k
    }

    #[inline]
    fn sqrt(self) -> Self {
        math::sqrt(self)
    }

    #[inline]
    fn exp(self) -> Self {
        math::exp(self)
    }

    #[inline]
    fn ln(self) -> Self {
        math::ln(self)
    }

    #[inline]
    fn ln_1p(self) -> Self {
        math::ln_1p(self)
    }

    #[inline]
    fn sinh(self) -> Self {
        math::sinh(self)
    }

    #[inline]
    fn acosh_clamped(self) -> Self {
        if self <= 1.0 {
            0.0
        } else {
            math::acosh(self)
        }
    }
}

/// Float intrinsics: `std` methods when available, `libm` otherwise.
pub(crate) mod math {
    #[cfg(feature = "std")]
    mod imp {
        #[inline]
        pub fn sqrt(x: f64) -> f64 {
            x.sqrt()
        }
        #[inline]
        pub fn exp(x: f64) -> f64 {
            x.exp()
        }
        #[inline]
        pub fn ln(x: f64) -> f64 {
            x.ln()
        }
        #[inline]
        pub fn ln_1p(x: f64) -> f64 {
            x.ln_1p()
        }
        #[inline]
        pub fn sinh(x: f64) -> f64 {
            x.sinh()
        }
        #[inline]
        pub fn acosh(x: f64) -> f64 {
            x.acosh()
        }
        #[inline]
        pub fn abs(x: f64) -> f64 {
            x.abs()
        }
    }

    #[cfg(not(feature = "std"))]
    mod imp {
        #[inline]
        pub fn sqrt(x: f64) -> f64 {
            libm::sqrt(x)
        }
        #[inline]
        pub fn exp(x: f64) -> f64 {
            libm::exp(x)
        }
        #[inline]
        pub fn ln(x: f64) -> f64 {
            libm::log(x)
        }
        #[inline]
        pub fn ln_1p(x: f64) -> f64 {
            libm::log1p(x)
        }
        #[inline]
        pub fn sinh(x: f64) -> f64 {
            libm::sinh(x)
        }
        #[inline]
        pub fn acosh(x: f64) -> f64 {
            libm::acosh(x)
        }
        #[inline]
        pub fn abs(x: f64) -> f64 {
            libm::fabs(x)
        }
    }

    pub(crate) use imp::*;
}
