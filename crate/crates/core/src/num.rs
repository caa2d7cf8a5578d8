//! Scalar abstraction for the numeric core.
//!
//! All graph/QUBO/solver math is generic over [`Scalar`] so the same code runs in
//! f64 (evaluation, oracles) and f32 (the SB core). Concrete aliases live at the
//! crate root.

use num_traits::{Float, FromPrimitive};

pub trait Scalar:
    Float + FromPrimitive + std::fmt::Debug + std::fmt::Display + std::iter::Sum + Default + 'static
{
    fn two() -> Self {
        Self::one() + Self::one()
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + std::fmt::Debug
        + std::fmt::Display
        + std::iter::Sum
        + Default
        + 'static
{
}

/// Lossy cast between scalar types, going through f64.
#[inline]
pub fn cast<A: Scalar, B: Scalar>(a: A) -> B {
    B::from_f64(a.to_f64().unwrap_or(f64::NAN)).unwrap()
}
