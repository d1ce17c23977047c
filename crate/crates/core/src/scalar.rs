//! Scalar abstraction for the influence arithmetic and tolerant comparisons.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};

/// A floating-point scalar: `f32` or `f64`.
pub trait Scalar: Float + FromPrimitive + Debug + Display + Send + Sync + 'static {
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Absolute-tolerance comparisons: `x >= t` holds when `x >= t - eps`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance<S> {
    pub eps: S,
}

impl<S: Scalar> Tolerance<S> {
    pub fn new(eps: S) -> Self {
        Tolerance { eps }
    }

    pub fn ge(&self, x: S, t: S) -> bool {
        x >= t - self.eps
    }

    pub fn gt(&self, x: S, t: S) -> bool {
        x > t + self.eps
    }

    pub fn le(&self, x: S, t: S) -> bool {
        x <= t + self.eps
    }

    pub fn lt(&self, x: S, t: S) -> bool {
        x < t - self.eps
    }

    pub fn eq(&self, x: S, t: S) -> bool {
        (x - t).abs() <= self.eps
    }
}

impl Default for Tolerance<f64> {
    fn default() -> Self {
        Tolerance { eps: 1e-9 }
    }
}

impl Default for Tolerance<f32> {
    fn default() -> Self {
        Tolerance { eps: 1e-5 }
    }
}
