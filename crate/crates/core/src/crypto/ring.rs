//! The finite ring the SA masks and SMPC shares live in.
//!
//! Ring elements are arbitrary-precision values reduced modulo `q`; the
//! default modulus is `2^64`, which already does not fit a machine word, so
//! elements stay `BigUint`-backed for any modulus.

use num_bigint::BigUint;
use num_traits::Zero;

use super::rng::{uniform_biguint, SeededRng};

/// Modulus `q = 2^bits` with wrapping (mod-q) arithmetic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingModulus {
    q: BigUint,
    bits: u32,
    byte_width: usize,
}

/// A value in `[0, q)`. Operations go through [`RingModulus`], which owns `q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldElement(BigUint);

impl FieldElement {
    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn into_value(self) -> BigUint {
        self.0
    }
}

impl RingModulus {
    /// Ring of size `2^bits`, `8 <= bits <= 64`.
    pub fn power_of_two(bits: u32) -> Self {
        assert!((8..=64).contains(&bits), "ring bits {bits} out of range");
        RingModulus {
            q: BigUint::from(1u8) << bits,
            bits,
            byte_width: (bits as usize).div_ceil(8),
        }
    }

    pub fn modulus(&self) -> &BigUint {
        &self.q
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Fixed serialized width of one element, in bytes.
    pub fn byte_width(&self) -> usize {
        self.byte_width
    }

    pub fn zero(&self) -> FieldElement {
        FieldElement(BigUint::zero())
    }

    /// Reduce an arbitrary integer into the ring.
    pub fn reduce(&self, v: BigUint) -> FieldElement {
        if v < self.q {
            FieldElement(v)
        } else {
            FieldElement(v % &self.q)
        }
    }

    pub fn add(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        let mut sum = &a.0 + &b.0;
        if sum >= self.q {
            sum -= &self.q;
        }
        FieldElement(sum)
    }

    pub fn add_assign(&self, a: &mut FieldElement, b: &FieldElement) {
        a.0 += &b.0;
        if a.0 >= self.q {
            a.0 -= &self.q;
        }
    }

    pub fn sub(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        if a.0 >= b.0 {
            FieldElement(&a.0 - &b.0)
        } else {
            FieldElement(&self.q - &b.0 + &a.0)
        }
    }

    pub fn neg(&self, a: &FieldElement) -> FieldElement {
        if a.0.is_zero() {
            FieldElement(BigUint::zero())
        } else {
            FieldElement(&self.q - &a.0)
        }
    }

    /// Uniform element of `[0, q)`.
    pub fn uniform(&self, rng: &mut SeededRng) -> FieldElement {
        FieldElement(uniform_biguint(rng, &self.q))
    }

    /// Fixed-width little-endian encoding of one element.
    pub fn encode_element(&self, e: &FieldElement, out: &mut Vec<u8>) {
        let bytes = e.0.to_bytes_le();
        debug_assert!(bytes.len() <= self.byte_width);
        out.extend_from_slice(&bytes);
        out.resize(out.len() + self.byte_width - bytes.len(), 0);
    }

    /// Inverse of [`encode_element`]; `None` when out of range.
    pub fn decode_element(&self, bytes: &[u8]) -> Option<FieldElement> {
        let v = BigUint::from_bytes_le(bytes);
        (v < self.q).then_some(FieldElement(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::rng::seeded_rng;
    use proptest::prelude::*;

    fn ring() -> RingModulus {
        RingModulus::power_of_two(64)
    }

    #[test]
    fn modulus_exceeds_u64() {
        assert!(*ring().modulus() > BigUint::from(u64::MAX));
        assert_eq!(ring().byte_width(), 8);
    }

    #[test]
    fn element_plus_negation_is_zero() {
        let r = ring();
        let mut rng = seeded_rng(1, 1);
        for _ in 0..200 {
            let x = r.uniform(&mut rng);
            assert_eq!(r.add(&x, &r.neg(&x)), r.zero());
        }
    }

    #[test]
    fn encode_decode_roundtrip() {
        let r = RingModulus::power_of_two(48);
        let mut rng = seeded_rng(1, 2);
        for _ in 0..100 {
            let x = r.uniform(&mut rng);
            let mut buf = Vec::new();
            r.encode_element(&x, &mut buf);
            assert_eq!(buf.len(), r.byte_width());
            assert_eq!(r.decode_element(&buf).unwrap(), x);
        }
    }

    proptest! {
        #[test]
        fn addition_commutes_and_associates(a in any::<u64>(), b in any::<u64>(), c in any::<u64>()) {
            let r = ring();
            let (a, b, c) = (
                r.reduce(BigUint::from(a)),
                r.reduce(BigUint::from(b)),
                r.reduce(BigUint::from(c)),
            );
            prop_assert_eq!(r.add(&a, &b), r.add(&b, &a));
            prop_assert_eq!(r.add(&r.add(&a, &b), &c), r.add(&a, &r.add(&b, &c)));
        }

        #[test]
        fn add_matches_wrapping_u64(a in any::<u64>(), b in any::<u64>()) {
            let r = ring();
            let sum = r.add(&r.reduce(BigUint::from(a)), &r.reduce(BigUint::from(b)));
            prop_assert_eq!(sum.value(), &BigUint::from(a.wrapping_add(b)));
        }

        #[test]
        fn sub_is_inverse_of_add(a in any::<u64>(), b in any::<u64>()) {
            let r = ring();
            let (a, b) = (r.reduce(BigUint::from(a)), r.reduce(BigUint::from(b)));
            prop_assert_eq!(r.sub(&r.add(&a, &b), &b), a);
        }
    }
}
