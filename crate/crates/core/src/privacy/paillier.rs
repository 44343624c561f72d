//! Paillier additive homomorphic encryption (the `g = n + 1` variant) and
//! the HE privacy pipeline built on it.
//!
//! Ciphertext multiplication mod `n^2` adds plaintexts, which is the only
//! homomorphism the aggregation needs. The secret key is held by a key
//! authority distinct from the aggregating server: the server folds
//! ciphertexts and never decrypts an individual update.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};

use super::envelope::PrivacyEnvelope;
use super::fixed_point::{fp_decode, fp_encode};
use super::PrivacyConfig;
use crate::crypto::arith::{gen_prime_with_top_bits, mod_inverse};
use crate::crypto::rng::{uniform_biguint, SeededRng};
use crate::error::{Error, Result};
use crate::model::ParamVector;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaillierPublicKey {
    n: BigUint,
    n_squared: BigUint,
}

/// Secret half of the keypair: `lambda = lcm(p-1, q-1)` and
/// `mu = lambda^-1 mod n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaillierKeypair {
    public: PaillierPublicKey,
    lambda: BigUint,
    mu: BigUint,
}

impl PaillierPublicKey {
    pub fn modulus(&self) -> &BigUint {
        &self.n
    }

    pub fn modulus_squared(&self) -> &BigUint {
        &self.n_squared
    }

    /// `Enc(m) = (1 + m*n) * r^n mod n^2` with fresh blinding `r`.
    pub fn encrypt(&self, m: &BigUint, rng: &mut SeededRng) -> Result<BigUint> {
        if m >= &self.n {
            return Err(Error::Input(format!(
                "paillier plaintext {m} >= modulus {}",
                self.n
            )));
        }
        let r = loop {
            let candidate = uniform_biguint(rng, &self.n);
            if !candidate.is_zero() && candidate.gcd(&self.n).is_one() {
                break candidate;
            }
        };
        let g_m = (BigUint::one() + m * &self.n) % &self.n_squared;
        let blind = r.modpow(&self.n, &self.n_squared);
        Ok(g_m * blind % &self.n_squared)
    }

    /// Homomorphic plaintext addition: multiply ciphertexts mod `n^2`.
    pub fn add_ciphertexts(&self, a: &BigUint, b: &BigUint) -> BigUint {
        a * b % &self.n_squared
    }

    /// Homomorphic scalar multiplication: `Enc(a)^k = Enc(k*a)`.
    pub fn scalar_mul(&self, c: &BigUint, k: &BigUint) -> BigUint {
        c.modpow(k, &self.n_squared)
    }
}

impl PaillierKeypair {
    pub fn public(&self) -> &PaillierPublicKey {
        &self.public
    }

    /// `Dec(c) = L(c^lambda mod n^2) * mu mod n` with `L(u) = (u - 1) / n`.
    pub fn decrypt(&self, c: &BigUint) -> Result<BigUint> {
        let n2 = &self.public.n_squared;
        if c >= n2 {
            return Err(Error::Input("paillier ciphertext out of range".into()));
        }
        let u = c.modpow(&self.lambda, n2);
        let ell = (u - BigUint::one()) / &self.public.n;
        Ok(ell * &self.mu % &self.public.n)
    }
}

/// Generate a keypair whose modulus has exactly `key_bits` bits.
pub fn paillier_keygen(key_bits: u64, rng: &mut SeededRng) -> Result<PaillierKeypair> {
    if key_bits < 256 {
        return Err(Error::Config(format!(
            "paillier key_bits {key_bits} below minimum 256"
        )));
    }
    loop {
        // Top two bits forced so p*q keeps full width.
        let p = gen_prime_with_top_bits(key_bits / 2, 2, rng)?;
        let q = gen_prime_with_top_bits(key_bits / 2, 2, rng)?;
        if p == q {
            continue;
        }
        let n = &p * &q;
        debug_assert_eq!(n.bits(), key_bits);
        let lambda = (&p - 1u8).lcm(&(&q - 1u8));
        let Ok(mu) = mod_inverse(&(&lambda % &n), &n) else {
            continue;
        };
        let n_squared = &n * &n;
        return Ok(PaillierKeypair {
            public: PaillierPublicKey { n, n_squared },
            lambda,
            mu,
        });
    }
}

/// Encrypt one fixed-point-encoded update, coordinate by coordinate.
pub fn he_protect(
    update: &ParamVector,
    public: &PaillierPublicKey,
    cfg: &PrivacyConfig,
    rng: &mut SeededRng,
) -> Result<PrivacyEnvelope> {
    let mut cts = Vec::with_capacity(update.len());
    for &x in update.iter() {
        if x.abs() > cfg.max_update_abs {
            return Err(Error::Input(format!(
                "coordinate {x} exceeds configured max |update| {}",
                cfg.max_update_abs
            )));
        }
        let encoded = fp_encode(x, cfg.scale_bits, &public.n)?;
        cts.push(public.encrypt(&encoded, rng)?);
    }
    Ok(PrivacyEnvelope::Ciphertexts(cts))
}

/// Server-side fold: coordinate-wise ciphertext product, i.e. the encrypted
/// sum of all updates. The server never sees a plaintext.
pub fn he_aggregate(
    ciphertext_lists: &[Vec<BigUint>],
    public: &PaillierPublicKey,
) -> Result<Vec<BigUint>> {
    let first = ciphertext_lists
        .first()
        .ok_or_else(|| Error::Input("he_aggregate on empty input".into()))?;
    let dim = first.len();
    let mut folded = first.clone();
    for (idx, list) in ciphertext_lists.iter().enumerate().skip(1) {
        if list.len() != dim {
            return Err(Error::Input(format!(
                "ciphertext list {idx} has {} coordinates, expected {dim}",
                list.len()
            )));
        }
        for (acc, c) in folded.iter_mut().zip(list) {
            if c >= public.modulus_squared() {
                return Err(Error::Protocol("ciphertext out of range".into()));
            }
            *acc = public.add_ciphertexts(acc, c);
        }
    }
    Ok(folded)
}

/// Key-authority side: decrypt the folded sum, decode, divide by the client
/// count. A decoded magnitude beyond `num_clients * max_update_abs` means the
/// configured overflow bound was violated.
pub fn he_recover(
    folded: &[BigUint],
    keypair: &PaillierKeypair,
    num_clients: usize,
    cfg: &PrivacyConfig,
) -> Result<ParamVector> {
    let n = keypair.public.modulus();
    let mut out = Vec::with_capacity(folded.len());
    let limit = num_clients as f64 * cfg.max_update_abs + 1.0;
    for c in folded {
        let plain = keypair.decrypt(c)?;
        let value = fp_decode(&plain, cfg.scale_bits, n);
        if !value.is_finite() || value.abs() > limit {
            return Err(Error::mechanism(
                "he_recover",
                None,
                format!("decoded sum {value} beyond configured bound {limit}"),
            ));
        }
        out.push(value / num_clients as f64);
    }
    Ok(ParamVector::from_vec(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::rng::seeded_rng;
    use crate::privacy::MechanismKind;

    fn test_keypair(bits: u64, seed: u64) -> PaillierKeypair {
        let mut rng = seeded_rng(seed, 0xbe);
        paillier_keygen(bits, &mut rng).unwrap()
    }

    #[test]
    fn modulus_has_exact_bit_length() {
        let kp = test_keypair(256, 1);
        assert_eq!(kp.public().modulus().bits(), 256);
    }

    #[test]
    fn encrypt_decrypt_zero() {
        let kp = test_keypair(256, 2);
        let mut rng = seeded_rng(2, 1);
        let c = kp.public().encrypt(&BigUint::zero(), &mut rng).unwrap();
        assert_eq!(kp.decrypt(&c).unwrap(), BigUint::zero());
    }

    #[test]
    fn encrypt_decrypt_random_roundtrip() {
        let kp = test_keypair(256, 3);
        let mut rng = seeded_rng(3, 1);
        for _ in 0..100 {
            let m = uniform_biguint(&mut rng, kp.public().modulus());
            let c = kp.public().encrypt(&m, &mut rng).unwrap();
            assert_eq!(kp.decrypt(&c).unwrap(), m);
        }
    }

    #[test]
    fn homomorphic_addition_hand_example() {
        // Dec(Enc(2) * Enc(3) mod n^2) = 5
        let kp = test_keypair(256, 4);
        let mut rng = seeded_rng(4, 1);
        let c2 = kp.public().encrypt(&BigUint::from(2u8), &mut rng).unwrap();
        let c3 = kp.public().encrypt(&BigUint::from(3u8), &mut rng).unwrap();
        let sum = kp.public().add_ciphertexts(&c2, &c3);
        assert_eq!(kp.decrypt(&sum).unwrap(), BigUint::from(5u8));
    }

    #[test]
    fn scalar_homomorphism() {
        let kp = test_keypair(256, 5);
        let mut rng = seeded_rng(5, 1);
        let m = BigUint::from(123456u32);
        let c = kp.public().encrypt(&m, &mut rng).unwrap();
        let scaled = kp.public().scalar_mul(&c, &BigUint::from(7u8));
        assert_eq!(kp.decrypt(&scaled).unwrap(), m * 7u8);
    }

    #[test]
    fn pipeline_single_client_roundtrips_update() {
        let cfg = PrivacyConfig {
            mechanism: MechanismKind::He,
            key_bits: 256,
            ..PrivacyConfig::default()
        };
        let kp = test_keypair(256, 6);
        let mut rng = seeded_rng(6, 1);
        let update = ParamVector::from_vec(vec![0.5, -1.25, 3.75, 0.0]);
        let env = he_protect(&update, kp.public(), &cfg, &mut rng).unwrap();
        let PrivacyEnvelope::Ciphertexts(cts) = env else {
            panic!("wrong variant")
        };
        let folded = he_aggregate(&[cts], kp.public()).unwrap();
        let recovered = he_recover(&folded, &kp, 1, &cfg).unwrap();
        let step = (2.0f64).powi(-(cfg.scale_bits as i32));
        for (a, b) in recovered.iter().zip(update.iter()) {
            assert!((a - b).abs() <= step);
        }
    }

    #[test]
    fn recover_rejects_out_of_bound_sums() {
        // A folded value beyond N * max_update_abs means the configured
        // overflow bound was violated somewhere upstream.
        let cfg = PrivacyConfig {
            mechanism: MechanismKind::He,
            key_bits: 256,
            max_update_abs: 10.0,
            ..PrivacyConfig::default()
        };
        let kp = test_keypair(256, 8);
        let mut rng = seeded_rng(8, 1);
        let huge = fp_encode(5000.0, cfg.scale_bits, kp.public().modulus()).unwrap();
        let ct = kp.public().encrypt(&huge, &mut rng).unwrap();
        let err = he_recover(&[ct], &kp, 2, &cfg).unwrap_err();
        assert!(
            matches!(
                err,
                Error::Mechanism {
                    stage: "he_recover",
                    ..
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn pipeline_matches_plaintext_mean() {
        use rand::Rng;
        let cfg = PrivacyConfig {
            mechanism: MechanismKind::He,
            key_bits: 256,
            ..PrivacyConfig::default()
        };
        let kp = test_keypair(256, 7);
        let mut rng = seeded_rng(7, 1);
        let updates: Vec<ParamVector> = (0..8)
            .map(|_| {
                ParamVector::from_vec((0..16).map(|_| (rng.random::<f64>() - 0.5) * 2.0).collect())
            })
            .collect();
        let mut lists = Vec::new();
        for u in &updates {
            let PrivacyEnvelope::Ciphertexts(cts) =
                he_protect(u, kp.public(), &cfg, &mut rng).unwrap()
            else {
                panic!("wrong variant")
            };
            lists.push(cts);
        }
        let folded = he_aggregate(&lists, kp.public()).unwrap();
        let recovered = he_recover(&folded, &kp, updates.len(), &cfg).unwrap();
        let plain = ParamVector::mean(&updates).unwrap();
        let step = (2.0f64).powi(-(cfg.scale_bits as i32));
        for (a, b) in recovered.iter().zip(plain.iter()) {
            assert!((a - b).abs() <= step, "{a} vs {b}");
        }
    }
}
