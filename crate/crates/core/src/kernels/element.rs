use super::{PrecisionTier, Storage};
use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

/// Scalar type backing a precision tier. Implemented for `f64` and `f32` only.
pub trait Element:
    Copy
    + Send
    + Sync
    + Debug
    + Default
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + Sum
    + 'static
    + private::Sealed
{
    const TIER: PrecisionTier;
    const ZERO: Self;

    /// Round-to-nearest-even for `f32`, identity for `f64`.
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn sqrt(self) -> Self;
    fn is_finite(self) -> bool;

    fn slice(storage: &Storage) -> Option<&[Self]>;
    fn slice_mut(storage: &mut Storage) -> Option<&mut [Self]>;
    fn wrap(values: Vec<Self>) -> Storage;
}

impl Element for f64 {
    const TIER: PrecisionTier = PrecisionTier::High;
    const ZERO: Self = 0.0;

    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn slice(storage: &Storage) -> Option<&[Self]> {
        match storage {
            Storage::High(v) => Some(v),
            Storage::Low(_) => None,
        }
    }
    fn slice_mut(storage: &mut Storage) -> Option<&mut [Self]> {
        match storage {
            Storage::High(v) => Some(v),
            Storage::Low(_) => None,
        }
    }
    fn wrap(values: Vec<Self>) -> Storage {
        Storage::High(values)
    }
}

impl Element for f32 {
    const TIER: PrecisionTier = PrecisionTier::Low;
    const ZERO: Self = 0.0;

    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        f64::from(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f32::sqrt(self)
    }
    #[inline]
    fn is_finite(self) -> bool {
        f32::is_finite(self)
    }
    fn slice(storage: &Storage) -> Option<&[Self]> {
        match storage {
            Storage::Low(v) => Some(v),
            Storage::High(_) => None,
        }
    }
    fn slice_mut(storage: &mut Storage) -> Option<&mut [Self]> {
        match storage {
            Storage::Low(v) => Some(v),
            Storage::High(_) => None,
        }
    }
    fn wrap(values: Vec<Self>) -> Storage {
        Storage::Low(values)
    }
}

mod private {
    pub trait Sealed {}
    impl Sealed for f64 {}
    impl Sealed for f32 {}
}
