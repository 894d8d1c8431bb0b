use crate::error::{Error, Result};
use crate::scalar::Real;

/// Smallest representable weight exponent.
pub const E_MIN: i8 = -12;
/// Largest representable weight exponent.
pub const E_MAX: i8 = 3;

/// A weight restricted to `sign × 2^exponent`, `sign ∈ {-1, 0, +1}`.
///
/// The zero weight is canonical: `sign == 0` implies `exponent == 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Pow2Weight {
    sign: i8,
    exponent: i8,
}

impl Pow2Weight {
    pub const ZERO: Pow2Weight = Pow2Weight { sign: 0, exponent: 0 };

    pub fn new(sign: i8, exponent: i8) -> Result<Self> {
        match sign {
            0 if exponent == 0 => Ok(Self::ZERO),
            0 => Err(Error::contract(format!("zero weight must have exponent 0, got {exponent}"))),
            -1 | 1 if (E_MIN..=E_MAX).contains(&exponent) => Ok(Self { sign, exponent }),
            -1 | 1 => Err(Error::contract(format!("exponent {exponent} outside [{E_MIN}, {E_MAX}]"))),
            _ => Err(Error::contract(format!("sign must be -1, 0 or 1, got {sign}"))),
        }
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn exponent(&self) -> i8 {
        self.exponent
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    /// Exact decoded value.
    pub fn value<T: Real>(&self) -> T {
        if self.sign == 0 {
            T::zero()
        } else {
            let mag = T::lit(2.0).powi(self.exponent as i32);
            if self.sign < 0 {
                -mag
            } else {
                mag
            }
        }
    }
}

/// Nearest power-of-two weight in the value domain.
///
/// Ties between two exponents go to the smaller one; magnitudes below
/// `2^(E_MIN-1)` become the canonical zero and magnitudes beyond `2^E_MAX`
/// saturate at `E_MAX`.
pub fn quantize_pow2<T: Real>(w: T) -> Pow2Weight {
    let w = w.to_f64_lossy();
    debug_assert!(w.is_finite(), "quantize_pow2 on non-finite weight");
    let mag = w.abs();
    let floor_cut = 2f64.powi(E_MIN as i32 - 1);
    if !(mag >= floor_cut) {
        // also catches NaN
        return Pow2Weight::ZERO;
    }
    let sign = if w < 0.0 { -1 } else { 1 };

    // e = floor(log2(mag)), corrected for rounding in log2.
    let mut e = mag.log2().floor() as i32;
    while 2f64.powi(e) > mag {
        e -= 1;
    }
    while 2f64.powi(e + 1) <= mag {
        e += 1;
    }

    let exponent = if e < E_MIN as i32 {
        E_MIN as i32
    } else if e >= E_MAX as i32 {
        E_MAX as i32
    } else {
        // Both differences are exact: mag lies in [2^e, 2^(e+1)).
        let below = mag - 2f64.powi(e);
        let above = 2f64.powi(e + 1) - mag;
        if below <= above {
            e
        } else {
            e + 1
        }
    };
    Pow2Weight { sign, exponent: exponent as i8 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Enumerate every representable weight and keep the closest one.
    fn brute_force(w: f64) -> Pow2Weight {
        let mut best = Pow2Weight::ZERO;
        let mut best_err = f64::INFINITY;
        for e in E_MIN..=E_MAX {
            for s in [-1i8, 1] {
                let cand = Pow2Weight::new(s, e).unwrap();
                let err = (w - cand.value::<f64>()).abs();
                // strict: earlier (smaller) exponents win ties
                if err < best_err {
                    best = cand;
                    best_err = err;
                }
            }
        }
        // zero only wins strictly; the floor midpoint itself rounds up
        if w.abs() < best_err {
            best = Pow2Weight::ZERO;
        }
        best
    }

    #[test]
    fn exact_power_of_two() {
        assert_eq!(quantize_pow2(0.25f64), Pow2Weight::new(1, -2).unwrap());
        assert_eq!(quantize_pow2(-4.0f32), Pow2Weight::new(-1, 2).unwrap());
    }

    #[test]
    fn zero_is_canonical() {
        let z = quantize_pow2(0.0f64);
        assert_eq!((z.sign(), z.exponent()), (0, 0));
        assert_eq!(quantize_pow2(-0.0f64), Pow2Weight::ZERO);
    }

    #[test]
    fn value_domain_rounding() {
        // |0.36 - 0.25| = 0.11 < |0.36 - 0.5| = 0.14
        assert_eq!(quantize_pow2(0.36f64), Pow2Weight::new(1, -2).unwrap());
        assert_eq!(brute_force(0.36), Pow2Weight::new(1, -2).unwrap());
        // log-domain rounding would pick 0.5 for 0.36 (log2 0.36 ≈ -1.47)
        assert_eq!(quantize_pow2(0.40f64), Pow2Weight::new(1, -1).unwrap());
    }

    #[test]
    fn ties_go_to_smaller_exponent() {
        assert_eq!(quantize_pow2(0.375f64), Pow2Weight::new(1, -2).unwrap());
        assert_eq!(quantize_pow2(-3.0f64), Pow2Weight::new(-1, 1).unwrap());
    }

    #[test]
    fn range_edges() {
        let tiny = 2f64.powi(E_MIN as i32 - 1);
        assert_eq!(quantize_pow2(tiny * 0.999), Pow2Weight::ZERO);
        assert_eq!(quantize_pow2(tiny), Pow2Weight::new(1, E_MIN).unwrap());
        assert_eq!(quantize_pow2(1e9f64), Pow2Weight::new(1, E_MAX).unwrap());
        assert_eq!(quantize_pow2(-11.0f64), Pow2Weight::new(-1, E_MAX).unwrap());
    }

    #[test]
    fn new_rejects_non_canonical() {
        assert!(Pow2Weight::new(0, 2).is_err());
        assert!(Pow2Weight::new(1, E_MAX + 1).is_err());
        assert!(Pow2Weight::new(2, 0).is_err());
    }

    proptest! {
        #[test]
        fn matches_enumeration(w in -20.0f64..20.0) {
            prop_assert_eq!(quantize_pow2(w), brute_force(w));
        }

        #[test]
        fn matches_enumeration_small(w in -0.01f64..0.01) {
            prop_assert_eq!(quantize_pow2(w), brute_force(w));
        }

        #[test]
        fn idempotent(w in -10.0f64..10.0) {
            let q = quantize_pow2(w);
            prop_assert_eq!(quantize_pow2(q.value::<f64>()), q);
            prop_assert_eq!(quantize_pow2(q.value::<f32>()), q);
        }
    }
}
