//! Scalar abstraction for the pipeline math.
//!
//! Everything numeric in this crate is generic over [`Real`], which is
//! satisfied by `f32` and `f64`. The trait combines nalgebra's `RealField`
//! (linear algebra) with the num-traits conversion traits so loaders and
//! writers can move values through `f64` text representations.

use std::fmt::LowerExp;

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar the pipeline is generic over: `f32` or `f64`.
pub trait Real: RealField + FromPrimitive + ToPrimitive + LowerExp + Copy {}

impl<T> Real for T where T: RealField + FromPrimitive + ToPrimitive + LowerExp + Copy {}

/// Converts an `f64` literal/parse result into the working scalar.
pub fn from_f64<S: Real>(v: f64) -> S {
    S::from_f64(v).expect("f64 representable in scalar type")
}

/// Lossless-enough view of a scalar as `f64` (identity for `f64`).
pub fn to_f64<S: Real>(v: S) -> f64 {
    v.to_f64().expect("scalar representable as f64")
}

pub(crate) fn is_finite<S: Real>(v: S) -> bool {
    v.to_f64().map(f64::is_finite).unwrap_or(false)
}

/// Formats a scalar with 17 significant digits, enough to round-trip `f64`
/// through text exactly.
pub fn fmt17<S: Real>(v: S) -> String {
    format!("{:.16e}", v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt17_round_trips_f64() {
        for &v in &[0.0f64, 1.0, -1.5, 1.0 / 3.0, 6.02214076e23, -2.2e-308] {
            let s = fmt17(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "{s}");
        }
    }

    #[test]
    fn finite_checks() {
        assert!(is_finite(1.0f64));
        assert!(!is_finite(f64::NAN));
        assert!(!is_finite(f32::INFINITY));
    }
}
