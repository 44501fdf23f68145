use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, NumAssignOps, NumCast};

/// Floating-point scalar a [`crate::Graph`] can differentiate through.
pub trait Scalar:
    Float + NumAssignOps + Sum<Self> + Debug + Display + Default + Send + Sync + 'static
{
    fn from_f64(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("f64 value representable in scalar type")
    }

    fn to_f64(self) -> f64 {
        <f64 as NumCast>::from(self).expect("scalar representable as f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
