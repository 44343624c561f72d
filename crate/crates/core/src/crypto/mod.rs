//! Arbitrary-precision arithmetic, probabilistic primality, and seeded
//! randomness: the substrate the HE/SA/SMPC mechanisms are built on.

pub mod arith;
pub mod ring;
pub mod rng;

pub use arith::{gen_prime, is_probable_prime, mod_inverse, mod_pow};
pub use num_bigint::BigUint;
pub use ring::{FieldElement, RingModulus};
pub use rng::{derive_stream_id, seeded_rng, SeededRng};
