//! The scalar abstraction behind every real-valued table in the crate.
//!
//! Tables on the bilinear scheme only ever need ring operations, division by
//! small integers and an ordering, so the same code runs over `f64`/`f32`
//! (fast, approximate) and over `BigRational` (exact).

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

/// Numeric type usable as the value type of a [`crate::bilinear::BilinearFn`].
pub trait Scalar:
    Num + Signed + Clone + PartialOrd + Debug + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// `num / den` in this scalar type.
    fn from_ratio(num: i64, den: i64) -> Self {
        Self::from_i64(num).expect("integer fits scalar") / Self::from_i64(den).expect("integer fits scalar")
    }

    /// `1 / 2^k`.
    fn inv_pow2(k: u32) -> Self {
        let mut out = Self::one();
        let half = Self::from_ratio(1, 2);
        for _ in 0..k {
            out = out * half.clone();
        }
        out
    }

    fn from_usize_exact(v: usize) -> Self {
        Self::from_usize(v).expect("integer fits scalar")
    }

    /// Lossy conversion used for reporting and for non-integer norms.
    fn approx(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Whether `self` and `other` agree to within `tol` (exact types ignore
    /// the tolerance only in the sense that their difference is exact).
    fn close_to(&self, other: &Self, tol: f64) -> bool {
        (self.clone() - other.clone()).abs().approx() <= tol
    }
}

impl Scalar for f64 {}
impl Scalar for f32 {}
impl Scalar for BigRational {
    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn inv_pow2(k: u32) -> Self {
        BigRational::new(BigInt::from(1), BigInt::from(1) << k as usize)
    }
}
