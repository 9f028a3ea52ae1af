//! Floating-point abstraction used by the dense-net substrate.
//!
//! Training runs in `f32`; the finite-difference gradient oracle instantiates
//! the same code at `f64`. Transcendentals come from `libm` (via
//! `num-traits`), so results are identical between std and no_std builds.

use core::fmt::Debug;
use core::iter::Sum;
use num_traits::Float;

pub trait Real: Float + Debug + Sum + 'static {
    fn from_f64(x: f64) -> Self;
    fn to_f64_lossy(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

/// Shorthand for lifting an `f64` literal into the working precision.
#[inline]
pub fn real<F: Real>(x: f64) -> F {
    F::from_f64(x)
}
