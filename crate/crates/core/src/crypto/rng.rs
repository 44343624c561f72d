//! Deterministic random streams.
//!
//! Every source of randomness in the simulator is a ChaCha20 stream derived
//! from `(master_seed, stream_id)`. Streams with distinct ids are independent
//! and reproducible, so client work can be executed in any order (or in
//! parallel) without changing results. Reproducibility is the point here:
//! the masks and keys this produces are **not secret** in any real sense.

use num_bigint::BigUint;
use num_traits::Zero;
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type SeededRng = ChaCha20Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic stream keyed by `(master_seed, stream_id)`.
pub fn seeded_rng(master_seed: u64, stream_id: u64) -> SeededRng {
    // One mixing round over the stream id so nearby ids decorrelate.
    let mut sid_state = stream_id ^ 0xbb67_ae85_84ca_a73b;
    let mut state = master_seed ^ 0x6a09_e667_f3bc_c908 ^ splitmix64(&mut sid_state);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha20Rng::from_seed(seed)
}

/// Collapses a multi-part label (round, client pair, purpose tag, ...) into a
/// single stream id.
pub fn derive_stream_id(parts: &[u64]) -> u64 {
    let mut state = 0x243f_6a88_85a3_08d3;
    let mut acc = 0u64;
    for &p in parts {
        state ^= p;
        acc = acc.rotate_left(17) ^ splitmix64(&mut state);
    }
    acc
}

/// Uniform integer in `[0, bound)` by rejection sampling on `bound.bits()` bits.
pub fn uniform_biguint(rng: &mut SeededRng, bound: &BigUint) -> BigUint {
    assert!(!bound.is_zero(), "uniform_biguint: zero bound");
    let bits = bound.bits();
    let bytes = bits.div_ceil(8) as usize;
    let top_mask: u8 = if bits.is_multiple_of(8) {
        0xff
    } else {
        (1u8 << (bits % 8)) - 1
    };
    let mut buf = vec![0u8; bytes];
    loop {
        rng.fill_bytes(&mut buf);
        *buf.last_mut().expect("non-empty") &= top_mask;
        let candidate = BigUint::from_bytes_le(&buf);
        if candidate < *bound {
            return candidate;
        }
    }
}

/// Uniform integer with exactly `bits` bits (top bit forced).
pub fn random_bits_exact(rng: &mut SeededRng, bits: u64) -> BigUint {
    assert!(bits >= 2);
    let bytes = bits.div_ceil(8) as usize;
    let mut buf = vec![0u8; bytes];
    rng.fill_bytes(&mut buf);
    let top_bit = ((bits - 1) % 8) as u8;
    let keep: u8 = if top_bit == 7 {
        0xff
    } else {
        (1u8 << (top_bit + 1)) - 1
    };
    let last = buf.last_mut().expect("non-empty");
    *last = (*last & keep) | (1 << top_bit);
    BigUint::from_bytes_le(&buf)
}
