//! Fixed-point codec bridging real-valued parameter vectors and the integer
//! domains the cryptographic mechanisms operate in.
//!
//! A real `x` is encoded as `round(x * 2^scale_bits)` in centered
//! representation: non-negative values map to themselves, negatives to
//! `modulus - |value|`. Decoding treats anything at or above `modulus / 2`
//! as negative.

use num_bigint::BigUint;
use num_traits::ToPrimitive;

use crate::error::{Error, Result};

/// Encode one real into `[0, modulus)`. Errors when `|x| * 2^scale_bits`
/// reaches `modulus / 2` (the centered range would wrap).
pub fn fp_encode(x: f64, scale_bits: u32, modulus: &BigUint) -> Result<BigUint> {
    if !x.is_finite() {
        return Err(Error::Input(format!("fp_encode: non-finite value {x}")));
    }
    let scaled = x * (1u64 << scale_bits) as f64;
    // i128 easily covers every in-range magnitude for the moduli in use
    // (>= 2^64); the half-modulus comparison below is the real guard.
    if scaled.abs() >= i128::MAX as f64 {
        return Err(Error::Input(format!("fp_encode: overflow encoding {x}")));
    }
    let rounded = scaled.round() as i128;
    let magnitude = BigUint::from(rounded.unsigned_abs());
    if &magnitude * 2u8 >= *modulus {
        return Err(Error::Input(format!(
            "fp_encode: overflow encoding {x} at scale 2^{scale_bits} (modulus {modulus})"
        )));
    }
    if rounded >= 0 {
        Ok(magnitude)
    } else {
        Ok(modulus - magnitude)
    }
}

/// Inverse of [`fp_encode`] extended to accumulated sums: values at or above
/// `modulus / 2` decode as negative.
pub fn fp_decode(v: &BigUint, scale_bits: u32, modulus: &BigUint) -> f64 {
    debug_assert!(v < modulus);
    let negative = &(v * 2u8) >= modulus;
    let magnitude = if negative { modulus - v } else { v.clone() };
    let m = magnitude.to_f64().unwrap_or(f64::INFINITY);
    let signed = if negative { -m } else { m };
    signed / (1u64 << scale_bits) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn modulus() -> BigUint {
        BigUint::from(1u8) << 64
    }

    #[test]
    fn zero_roundtrips_exactly() {
        let m = modulus();
        let e = fp_encode(0.0, 16, &m).unwrap();
        assert_eq!(fp_decode(&e, 16, &m), 0.0);
    }

    #[test]
    fn dyadic_value_roundtrips_exactly() {
        let m = modulus();
        for bits in [1u32, 2, 16, 24] {
            let e = fp_encode(-1.5, bits, &m).unwrap();
            assert_eq!(fp_decode(&e, bits, &m), -1.5);
        }
    }

    #[test]
    fn encode_overflow_is_an_error() {
        let m = BigUint::from(1u32 << 20);
        // 2^4 * 2^16 = 2^20 > m/2
        assert!(fp_encode(16.0, 16, &m).is_err());
        assert!(fp_encode(f64::NAN, 16, &m).is_err());
    }

    #[test]
    fn negative_values_use_upper_half() {
        let m = modulus();
        let e = fp_encode(-1.0, 4, &m).unwrap();
        assert_eq!(e, &m - 16u8);
    }

    proptest! {
        #[test]
        fn prop_roundtrip_error_within_quantization_step(x in -10.0f64..10.0) {
            let m = modulus();
            let scale_bits = 16u32;
            let e = fp_encode(x, scale_bits, &m).unwrap();
            let back = fp_decode(&e, scale_bits, &m);
            let step = (2.0f64).powi(-(scale_bits as i32));
            prop_assert!((back - x).abs() <= step, "{x} -> {back}");
        }

        #[test]
        fn prop_sum_of_encodings_decodes_to_sum(
            xs in prop::collection::vec(-8.0f64..8.0, 1..20)
        ) {
            // Ring addition of encodings must decode to the (quantized) sum.
            let m = modulus();
            let ring = crate::crypto::RingModulus::power_of_two(64);
            let mut acc = ring.zero();
            for &x in &xs {
                let e = ring.reduce(fp_encode(x, 16, &m).unwrap());
                acc = ring.add(&acc, &e);
            }
            let decoded = fp_decode(acc.value(), 16, &m);
            let exact: f64 = xs.iter().sum();
            prop_assert!((decoded - exact).abs() <= xs.len() as f64 * (2.0f64).powi(-17));
        }
    }
}
