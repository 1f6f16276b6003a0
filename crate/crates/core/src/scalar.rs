//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating-point scalar: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar representable as f64")
    }

    /// Loosest relative tolerance an iterative solve can reasonably reach.
    #[inline]
    fn solver_floor() -> Self {
        Self::epsilon() * Self::of(64.0)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Euclidean norm of a slice.
pub fn norm2<S: Scalar>(v: &[S]) -> S {
    v.iter().map(|&x| x * x).sum::<S>().sqrt()
}

pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Formats a float with 9 significant digits, the precision used by every CSV we write.
pub fn fmt_sig9<S: Scalar>(x: S) -> String {
    let v = x.as_f64();
    if v.is_finite() {
        format!("{v:.8e}")
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt_has_nine_significant_digits() {
        assert_eq!(fmt_sig9(2.718281828459045_f64), "2.71828183e0");
        assert_eq!(fmt_sig9(-0.000123456789_f64), "-1.23456789e-4");
        assert_eq!(fmt_sig9(f64::INFINITY), "inf");
    }

    #[test]
    fn norm_and_dot_agree() {
        let v = [3.0_f32, 4.0];
        assert_eq!(norm2(&v), 5.0);
        assert_eq!(dot(&v, &v), 25.0);
    }
}
