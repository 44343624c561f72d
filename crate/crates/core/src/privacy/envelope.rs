//! On-the-wire form of a protected client update, plus its serialization.
//!
//! Wire layout (little-endian length prefixes throughout):
//! - plain/noised: `u32 count || count * f64-le`
//! - masked:       `u64 client_id || u64 round || u32 count || count * ring-element-le`
//!   (ring elements are fixed width, `ceil(ring_bits / 8)` bytes)
//! - shares:       `u32 parties || parties * (u32 count || count * ring-element-le)`
//! - ciphertexts:  `u32 count || count * (u32 len || len bytes, minimal big-endian)`

use num_bigint::BigUint;

use crate::crypto::{FieldElement, RingModulus};
use crate::error::{Error, Result};
use crate::model::ParamVector;

/// Exactly one variant is populated per protected update.
#[derive(Debug, Clone, PartialEq)]
pub enum PrivacyEnvelope {
    /// Unprotected update (mechanism "none").
    Plain(ParamVector),
    /// Clipped and noised update (DP).
    Noised(ParamVector),
    /// One Paillier ciphertext per coordinate (HE).
    Ciphertexts(Vec<BigUint>),
    /// Pairwise-masked ring vector (SA); carries sender identity so the
    /// server can verify roster completeness and round binding.
    Masked {
        client_id: u64,
        round: u64,
        coords: Vec<FieldElement>,
    },
    /// Additive shares, one ring vector per compute party (SMPC).
    Shares(Vec<Vec<FieldElement>>),
}

impl PrivacyEnvelope {
    /// Serialized length in bytes; this is what the byte accounting records.
    pub fn byte_size(&self, ring: &RingModulus) -> usize {
        self.to_wire(ring).len()
    }

    pub fn to_wire(&self, ring: &RingModulus) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            PrivacyEnvelope::Plain(v) | PrivacyEnvelope::Noised(v) => {
                write_f64_list(&mut out, v.as_slice());
            }
            PrivacyEnvelope::Masked {
                client_id,
                round,
                coords,
            } => {
                out.extend_from_slice(&client_id.to_le_bytes());
                out.extend_from_slice(&round.to_le_bytes());
                write_ring_list(&mut out, coords, ring);
            }
            PrivacyEnvelope::Shares(parties) => {
                out.extend_from_slice(&(parties.len() as u32).to_le_bytes());
                for p in parties {
                    write_ring_list(&mut out, p, ring);
                }
            }
            PrivacyEnvelope::Ciphertexts(cts) => {
                out.extend_from_slice(&(cts.len() as u32).to_le_bytes());
                for c in cts {
                    let bytes = c.to_bytes_be();
                    out.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
                    out.extend_from_slice(&bytes);
                }
            }
        }
        out
    }

    pub fn from_wire(kind: EnvelopeKind, bytes: &[u8], ring: &RingModulus) -> Result<Self> {
        let mut cursor = Cursor { bytes, pos: 0 };
        let env = match kind {
            EnvelopeKind::Plain => PrivacyEnvelope::Plain(read_f64_list(&mut cursor)?),
            EnvelopeKind::Noised => PrivacyEnvelope::Noised(read_f64_list(&mut cursor)?),
            EnvelopeKind::Masked => {
                let client_id = cursor.read_u64()?;
                let round = cursor.read_u64()?;
                let coords = read_ring_list(&mut cursor, ring)?;
                PrivacyEnvelope::Masked {
                    client_id,
                    round,
                    coords,
                }
            }
            EnvelopeKind::Shares => {
                let parties = cursor.read_u32()? as usize;
                let mut lists = Vec::with_capacity(parties);
                for _ in 0..parties {
                    lists.push(read_ring_list(&mut cursor, ring)?);
                }
                PrivacyEnvelope::Shares(lists)
            }
            EnvelopeKind::Ciphertexts => {
                let count = cursor.read_u32()? as usize;
                let mut cts = Vec::with_capacity(count);
                for _ in 0..count {
                    let len = cursor.read_u32()? as usize;
                    cts.push(BigUint::from_bytes_be(cursor.read_bytes(len)?));
                }
                PrivacyEnvelope::Ciphertexts(cts)
            }
        };
        if cursor.pos != bytes.len() {
            return Err(Error::Protocol(format!(
                "envelope has {} trailing byte(s)",
                bytes.len() - cursor.pos
            )));
        }
        Ok(env)
    }
}

/// Which envelope variant a mechanism's messages carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeKind {
    Plain,
    Noised,
    Masked,
    Shares,
    Ciphertexts,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn read_bytes(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.pos + len > self.bytes.len() {
            return Err(Error::Protocol("truncated envelope".into()));
        }
        let out = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    fn read_u32(&mut self) -> Result<u32> {
        let b = self.read_bytes(4)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    fn read_u64(&mut self) -> Result<u64> {
        let b = self.read_bytes(8)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }
}

fn write_f64_list(out: &mut Vec<u8>, values: &[f64]) {
    out.extend_from_slice(&(values.len() as u32).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn read_f64_list(cursor: &mut Cursor) -> Result<ParamVector> {
    let count = cursor.read_u32()? as usize;
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        let b = cursor.read_bytes(8)?;
        values.push(f64::from_le_bytes(b.try_into().expect("8 bytes")));
    }
    Ok(ParamVector::from_vec(values))
}

fn write_ring_list(out: &mut Vec<u8>, values: &[FieldElement], ring: &RingModulus) {
    out.extend_from_slice(&(values.len() as u32).to_le_bytes());
    for v in values {
        ring.encode_element(v, out);
    }
}

fn read_ring_list(cursor: &mut Cursor, ring: &RingModulus) -> Result<Vec<FieldElement>> {
    let count = cursor.read_u32()? as usize;
    let width = ring.byte_width();
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        let b = cursor.read_bytes(width)?;
        values.push(
            ring.decode_element(b)
                .ok_or_else(|| Error::Protocol("ring element out of range".into()))?,
        );
    }
    Ok(values)
}
