//! Secure aggregation by pairwise masking.
//!
//! Each unordered client pair `{i, j}` shares a mask stream keyed by
//! `(master_seed, round, i, j)`. The lower-id client adds the mask, the
//! higher-id one subtracts it, so the server-side sum over a complete roster
//! cancels every mask exactly and reveals only the aggregate. Dropout
//! recovery is out of scope: an incomplete roster is a protocol error.

use super::envelope::PrivacyEnvelope;
use super::fixed_point::{fp_decode, fp_encode};
use super::PrivacyConfig;
use crate::crypto::rng::{derive_stream_id, seeded_rng};
use crate::crypto::{FieldElement, RingModulus};
use crate::error::{Error, Result};
use crate::model::ParamVector;

const SA_DOMAIN: u64 = 0x5341;

fn pair_mask(
    master_seed: u64,
    round: u64,
    low: u64,
    high: u64,
    dim: usize,
    ring: &RingModulus,
) -> Vec<FieldElement> {
    let mut rng = seeded_rng(
        master_seed,
        derive_stream_id(&[SA_DOMAIN, round, low, high]),
    );
    (0..dim).map(|_| ring.uniform(&mut rng)).collect()
}

/// Encode the update into the ring and blind it with every pairwise mask.
pub fn sa_protect(
    update: &ParamVector,
    client_id: usize,
    roster: &[usize],
    round: u64,
    master_seed: u64,
    cfg: &PrivacyConfig,
    ring: &RingModulus,
) -> Result<PrivacyEnvelope> {
    let q = ring.modulus();
    let mut coords = Vec::with_capacity(update.len());
    for &x in update.iter() {
        if x.abs() > cfg.max_update_abs {
            return Err(Error::Input(format!(
                "coordinate {x} exceeds configured max |update| {}",
                cfg.max_update_abs
            )));
        }
        coords.push(ring.reduce(fp_encode(x, cfg.scale_bits, q)?));
    }
    for &peer in roster {
        if peer == client_id {
            continue;
        }
        let (low, high) = (client_id.min(peer) as u64, client_id.max(peer) as u64);
        let mask = pair_mask(master_seed, round, low, high, coords.len(), ring);
        if client_id < peer {
            for (c, m) in coords.iter_mut().zip(&mask) {
                *c = ring.add(c, m);
            }
        } else {
            for (c, m) in coords.iter_mut().zip(&mask) {
                *c = ring.sub(c, m);
            }
        }
    }
    Ok(PrivacyEnvelope::Masked {
        client_id: client_id as u64,
        round,
        coords,
    })
}

/// Sum the masked vectors (masks cancel), decode, divide by the roster size.
pub fn sa_aggregate(
    envelopes: &[(u64, u64, Vec<FieldElement>)],
    roster: &[usize],
    round: u64,
    cfg: &PrivacyConfig,
    ring: &RingModulus,
) -> Result<ParamVector> {
    let mut seen: Vec<u64> = envelopes.iter().map(|(id, _, _)| *id).collect();
    seen.sort_unstable();
    let mut expected: Vec<u64> = roster.iter().map(|&r| r as u64).collect();
    expected.sort_unstable();
    if seen != expected {
        return Err(Error::Protocol(format!(
            "roster mismatch: expected clients {expected:?}, received {seen:?} (dropout unsupported)"
        )));
    }
    if let Some((id, bad_round, _)) = envelopes.iter().find(|(_, r, _)| *r != round) {
        return Err(Error::Protocol(format!(
            "client {id} sent round {bad_round}, expected {round}"
        )));
    }
    let dim = envelopes
        .first()
        .map(|(_, _, c)| c.len())
        .ok_or_else(|| Error::Input("sa_aggregate on empty input".into()))?;
    let mut acc: Vec<FieldElement> = vec![ring.zero(); dim];
    for (id, _, coords) in envelopes {
        if coords.len() != dim {
            return Err(Error::Protocol(format!(
                "client {id} sent {} coordinates, expected {dim}",
                coords.len()
            )));
        }
        for (a, c) in acc.iter_mut().zip(coords) {
            ring.add_assign(a, c);
        }
    }
    let n = envelopes.len() as f64;
    let q = ring.modulus();
    Ok(ParamVector::from_vec(
        acc.iter()
            .map(|e| fp_decode(e.value(), cfg.scale_bits, q) / n)
            .collect(),
    ))
}
