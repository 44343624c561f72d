//! Modular arithmetic and probabilistic primality on arbitrary-precision
//! integers.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, Zero};

use super::rng::{random_bits_exact, uniform_biguint, SeededRng};
use crate::error::{Error, Result};

/// `base^exp mod modulus`, exact. Errors when `modulus < 2`.
pub fn mod_pow(base: &BigUint, exp: &BigUint, modulus: &BigUint) -> Result<BigUint> {
    if *modulus < BigUint::from(2u8) {
        return Err(Error::Input(format!("mod_pow: modulus {modulus} < 2")));
    }
    Ok(base.modpow(exp, modulus))
}

/// Modular inverse via the extended Euclidean algorithm.
pub fn mod_inverse(a: &BigUint, modulus: &BigUint) -> Result<BigUint> {
    if *modulus < BigUint::from(2u8) {
        return Err(Error::Input(format!("mod_inverse: modulus {modulus} < 2")));
    }
    let m = BigInt::from(modulus.clone());
    let mut r0 = m.clone();
    let mut r1 = BigInt::from(a.clone()) % &m;
    let mut t0 = BigInt::zero();
    let mut t1 = BigInt::one();
    while !r1.is_zero() {
        let q = &r0 / &r1;
        let r = &r0 - &q * &r1;
        r0 = std::mem::replace(&mut r1, r);
        let t = &t0 - &q * &t1;
        t0 = std::mem::replace(&mut t1, t);
    }
    if !r0.is_one() {
        return Err(Error::NoInverse {
            a: a.to_string(),
            modulus: modulus.to_string(),
        });
    }
    let mut inv = t0 % &m;
    if inv.is_negative() {
        inv += &m;
    }
    Ok(inv.to_biguint().expect("non-negative after reduction"))
}

const SMALL_PRIMES: [u32; 54] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193,
    197, 199, 211, 223, 227, 229, 233, 239, 241, 251,
];

/// Miller–Rabin with `rounds` random bases drawn from `rng`.
pub fn is_probable_prime(n: &BigUint, rounds: u32, rng: &mut SeededRng) -> bool {
    let two = BigUint::from(2u8);
    if *n < two {
        return false;
    }
    for p in SMALL_PRIMES {
        let p = BigUint::from(p);
        if *n == p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }
    // n - 1 = d * 2^s with d odd
    let n_minus_1 = n - 1u8;
    let s = n_minus_1.trailing_zeros().expect("n > 1 is odd here");
    let d = &n_minus_1 >> s;

    let span = n - 3u8; // bases in [2, n-2]
    'witness: for _ in 0..rounds {
        let a = uniform_biguint(rng, &span) + &two;
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue 'witness;
        }
        for _ in 0..s - 1 {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Probable prime with exactly `bits` bits (Miller–Rabin, 40 rounds).
pub fn gen_prime(bits: u64, rng: &mut SeededRng) -> Result<BigUint> {
    gen_prime_with_top_bits(bits, 1, rng)
}

/// Like [`gen_prime`], with the top `forced_top` bits forced to 1. Forcing the
/// two leading bits guarantees a product of two such primes keeps full width.
pub fn gen_prime_with_top_bits(bits: u64, forced_top: u32, rng: &mut SeededRng) -> Result<BigUint> {
    if bits < 16 {
        return Err(Error::Input(format!("gen_prime: bits {bits} < 16")));
    }
    loop {
        let mut candidate = random_bits_exact(rng, bits);
        for i in 0..forced_top as u64 {
            candidate.set_bit(bits - 1 - i, true);
        }
        candidate.set_bit(0, true);
        if is_probable_prime(&candidate, 40, rng) {
            return Ok(candidate);
        }
    }
}
