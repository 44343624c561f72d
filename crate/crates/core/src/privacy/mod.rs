//! The four privacy layers behind one mechanism interface: protect each
//! client update, aggregate protected updates server-side, recover the
//! aggregate.

pub mod dp;
pub mod envelope;
pub mod fixed_point;
pub mod masking;
pub mod paillier;
pub mod sharing;

pub use envelope::{EnvelopeKind, PrivacyEnvelope};
pub use fixed_point::{fp_decode, fp_encode};
pub use paillier::{paillier_keygen, PaillierKeypair, PaillierPublicKey};

use num_bigint::BigUint;

use crate::crypto::rng::{derive_stream_id, seeded_rng};
use crate::crypto::{FieldElement, RingModulus};
use crate::error::{Error, Result};
use crate::model::ParamVector;

const DP_DOMAIN: u64 = 0x4450;
const HE_DOMAIN: u64 = 0x4845;
const HE_KEYGEN_DOMAIN: u64 = 0x4847;
const SMPC_DOMAIN: u64 = 0x534d;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MechanismKind {
    #[default]
    None,
    Dp,
    He,
    Sa,
    Smpc,
}

impl MechanismKind {
    pub fn name(&self) -> &'static str {
        match self {
            MechanismKind::None => "none",
            MechanismKind::Dp => "dp",
            MechanismKind::He => "he",
            MechanismKind::Sa => "sa",
            MechanismKind::Smpc => "smpc",
        }
    }

    pub fn envelope_kind(&self) -> EnvelopeKind {
        match self {
            MechanismKind::None => EnvelopeKind::Plain,
            MechanismKind::Dp => EnvelopeKind::Noised,
            MechanismKind::He => EnvelopeKind::Ciphertexts,
            MechanismKind::Sa => EnvelopeKind::Masked,
            MechanismKind::Smpc => EnvelopeKind::Shares,
        }
    }
}

impl std::str::FromStr for MechanismKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(MechanismKind::None),
            "dp" => Ok(MechanismKind::Dp),
            "he" => Ok(MechanismKind::He),
            "sa" => Ok(MechanismKind::Sa),
            "smpc" => Ok(MechanismKind::Smpc),
            other => Err(Error::Config(format!(
                "unknown mechanism {other:?} (expected none|dp|he|sa|smpc)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseKind {
    #[default]
    Laplace,
    Gaussian,
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "laplace" => Ok(NoiseKind::Laplace),
            "gaussian" => Ok(NoiseKind::Gaussian),
            other => Err(Error::Config(format!(
                "unknown noise kind {other:?} (expected laplace|gaussian)"
            ))),
        }
    }
}

/// Everything the mechanisms need to know, validated up front.
#[derive(Debug, Clone, PartialEq)]
pub struct PrivacyConfig {
    pub mechanism: MechanismKind,
    /// DP privacy budget per round.
    pub epsilon: f64,
    /// DP sensitivity bound S.
    pub clip_norm: f64,
    pub noise: NoiseKind,
    /// Gaussian relaxation parameter.
    pub delta: f64,
    /// Paillier modulus width.
    pub key_bits: u64,
    /// Fixed-point fractional bits.
    pub scale_bits: u32,
    /// SMPC compute parties; `None` means every client doubles as a party
    /// (the cross-silo reading, where participants share with each other).
    pub num_parties: Option<usize>,
    /// Ring size exponent: q = 2^ring_bits.
    pub ring_bits: u32,
    /// Per-coordinate bound the overflow guard assumes; protect stages
    /// enforce it.
    pub max_update_abs: f64,
    /// Test hook: force the DP noise scale (0 disables noise entirely).
    pub noise_override: Option<f64>,
}

impl Default for PrivacyConfig {
    fn default() -> Self {
        PrivacyConfig {
            mechanism: MechanismKind::None,
            epsilon: 1.0,
            clip_norm: 1.0,
            noise: NoiseKind::Laplace,
            delta: 1e-5,
            key_bits: 1024,
            scale_bits: 16,
            num_parties: None,
            ring_bits: 64,
            max_update_abs: 1000.0,
            noise_override: None,
        }
    }
}

impl PrivacyConfig {
    /// Check every invariant, reporting all violations at once.
    pub fn validate(&self, num_clients: usize) -> Result<()> {
        let mut problems = Vec::new();
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            problems.push(format!("epsilon must be > 0, got {}", self.epsilon));
        }
        if self.clip_norm.is_nan() || self.clip_norm <= 0.0 {
            problems.push(format!("clip norm must be > 0, got {}", self.clip_norm));
        }
        if self.key_bits < 256 {
            problems.push(format!("key_bits must be >= 256, got {}", self.key_bits));
        }
        if let Some(k) = self.num_parties {
            if k < 2 {
                problems.push(format!("parties must be >= 2, got {k}"));
            }
        }
        if self.noise == NoiseKind::Gaussian && !(self.delta > 0.0 && self.delta < 1.0) {
            problems.push(format!("delta must be in (0,1), got {}", self.delta));
        }
        if !(1..=40).contains(&self.scale_bits) {
            problems.push(format!(
                "scale_bits must be in 1..=40, got {}",
                self.scale_bits
            ));
        }
        if !(8..=64).contains(&self.ring_bits) {
            problems.push(format!(
                "ring_bits must be in 8..=64, got {}",
                self.ring_bits
            ));
        }
        if self.max_update_abs.is_nan() || self.max_update_abs <= 0.0 {
            problems.push(format!(
                "max_update_abs must be > 0, got {}",
                self.max_update_abs
            ));
        }
        // Overflow guard: the sum of N encoded updates must stay in the
        // centered half of the target modulus.
        if problems.is_empty() && num_clients > 0 {
            let load = num_clients as f64 * self.max_update_abs * (self.scale_bits as f64).exp2();
            match self.mechanism {
                MechanismKind::Sa | MechanismKind::Smpc => {
                    let half_ring = ((self.ring_bits as f64) - 1.0).exp2();
                    if load >= half_ring {
                        problems.push(format!(
                            "overflow guard: {num_clients} * 2^{} * {} = {load:.3e} \
                             >= 2^{}/2 ring capacity",
                            self.scale_bits, self.max_update_abs, self.ring_bits
                        ));
                    }
                }
                MechanismKind::He => {
                    // n has exactly key_bits bits, so n/2 >= 2^(key_bits - 2)
                    let half_plaintext = ((self.key_bits as f64) - 2.0).exp2();
                    if load >= half_plaintext {
                        problems.push(format!(
                            "overflow guard: {num_clients} * 2^{} * {} = {load:.3e} \
                             exceeds the {}-bit plaintext space",
                            self.scale_bits, self.max_update_abs, self.key_bits
                        ));
                    }
                }
                MechanismKind::None | MechanismKind::Dp => {}
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    pub fn ring(&self) -> RingModulus {
        RingModulus::power_of_two(self.ring_bits)
    }

    /// The SMPC committee size for a roster of `num_clients`.
    pub fn resolved_parties(&self, num_clients: usize) -> usize {
        self.num_parties.unwrap_or(num_clients.max(2))
    }
}

/// What the timed server stage hands back: either the finished mean, or the
/// folded ciphertexts still awaiting the key authority.
#[derive(Debug, Clone)]
pub enum ServerAggregate {
    Mean(ParamVector),
    FoldedCiphertexts(Vec<BigUint>),
}

/// Per-experiment mechanism state: the validated config, the ring, and (for
/// HE) the keypair. The public key is what clients see; `recover` plays the
/// key-authority role.
#[derive(Debug, Clone)]
pub struct MechanismContext {
    cfg: PrivacyConfig,
    ring: RingModulus,
    parties: usize,
    paillier: Option<PaillierKeypair>,
}

impl MechanismContext {
    pub fn new(cfg: PrivacyConfig, num_clients: usize, master_seed: u64) -> Result<Self> {
        cfg.validate(num_clients)?;
        let paillier = if cfg.mechanism == MechanismKind::He {
            let mut rng = seeded_rng(master_seed, derive_stream_id(&[HE_KEYGEN_DOMAIN]));
            Some(paillier_keygen(cfg.key_bits, &mut rng)?)
        } else {
            None
        };
        let ring = cfg.ring();
        let parties = cfg.resolved_parties(num_clients);
        Ok(MechanismContext {
            cfg,
            ring,
            parties,
            paillier,
        })
    }

    pub fn config(&self) -> &PrivacyConfig {
        &self.cfg
    }

    pub fn ring(&self) -> &RingModulus {
        &self.ring
    }

    pub fn public_key(&self) -> Option<&PaillierPublicKey> {
        self.paillier.as_ref().map(PaillierKeypair::public)
    }

    /// Client-side: wrap one update for upload.
    pub fn protect(
        &self,
        update: &ParamVector,
        client_id: usize,
        roster: &[usize],
        round: u64,
        master_seed: u64,
    ) -> Result<PrivacyEnvelope> {
        let stage_err = |e: Error| match e {
            e @ Error::Mechanism { .. } => e,
            e => Error::mechanism("protect", Some(client_id), e.to_string()),
        };
        match self.cfg.mechanism {
            MechanismKind::None => Ok(PrivacyEnvelope::Plain(update.clone())),
            MechanismKind::Dp => {
                let mut rng = seeded_rng(
                    master_seed,
                    derive_stream_id(&[DP_DOMAIN, round, client_id as u64]),
                );
                dp::dp_protect(update, &self.cfg, &mut rng).map_err(stage_err)
            }
            MechanismKind::He => {
                let public = self
                    .paillier
                    .as_ref()
                    .expect("paillier keypair present for he")
                    .public();
                let mut rng = seeded_rng(
                    master_seed,
                    derive_stream_id(&[HE_DOMAIN, round, client_id as u64]),
                );
                paillier::he_protect(update, public, &self.cfg, &mut rng).map_err(stage_err)
            }
            MechanismKind::Sa => masking::sa_protect(
                update,
                client_id,
                roster,
                round,
                master_seed,
                &self.cfg,
                &self.ring,
            )
            .map_err(stage_err),
            MechanismKind::Smpc => {
                let mut rng = seeded_rng(
                    master_seed,
                    derive_stream_id(&[SMPC_DOMAIN, round, client_id as u64]),
                );
                sharing::smpc_protect(update, self.parties, &mut rng, &self.cfg, &self.ring)
                    .map_err(stage_err)
            }
        }
    }

    /// Server-side: decode wire envelopes and aggregate. This is the work the
    /// round timer measures. For HE the result is still encrypted; everything
    /// else comes back as the finished mean.
    pub fn server_aggregate(
        &self,
        wires: &[Vec<u8>],
        roster: &[usize],
        round: u64,
    ) -> Result<ServerAggregate> {
        if wires.is_empty() {
            return Err(Error::Input("server_aggregate on empty input".into()));
        }
        let kind = self.cfg.mechanism.envelope_kind();
        let decode = |i: usize, bytes: &Vec<u8>| {
            PrivacyEnvelope::from_wire(kind, bytes, &self.ring)
                .map_err(|e| Error::mechanism("decode", Some(roster[i]), e.to_string()))
        };
        match self.cfg.mechanism {
            MechanismKind::None | MechanismKind::Dp => {
                let mut updates = Vec::with_capacity(wires.len());
                for (i, w) in wires.iter().enumerate() {
                    match decode(i, w)? {
                        PrivacyEnvelope::Plain(v) | PrivacyEnvelope::Noised(v) => updates.push(v),
                        _ => unreachable!("kind pinned by mechanism"),
                    }
                }
                let mean = ParamVector::mean(&updates)
                    .map_err(|e| Error::mechanism("aggregate", None, e.to_string()))?;
                Ok(ServerAggregate::Mean(mean))
            }
            MechanismKind::Sa => {
                let mut envelopes = Vec::with_capacity(wires.len());
                for (i, w) in wires.iter().enumerate() {
                    match decode(i, w)? {
                        PrivacyEnvelope::Masked {
                            client_id,
                            round,
                            coords,
                        } => envelopes.push((client_id, round, coords)),
                        _ => unreachable!("kind pinned by mechanism"),
                    }
                }
                let mean = masking::sa_aggregate(&envelopes, roster, round, &self.cfg, &self.ring)
                    .map_err(|e| Error::mechanism("sa_aggregate", None, e.to_string()))?;
                Ok(ServerAggregate::Mean(mean))
            }
            MechanismKind::Smpc => {
                let k = self.parties;
                let mut per_client: Vec<Vec<Vec<FieldElement>>> = Vec::with_capacity(wires.len());
                for (i, w) in wires.iter().enumerate() {
                    match decode(i, w)? {
                        PrivacyEnvelope::Shares(s) => {
                            if s.len() != k {
                                return Err(Error::mechanism(
                                    "smpc_route",
                                    Some(roster[i]),
                                    format!("{} share lists, expected {k}", s.len()),
                                ));
                            }
                            per_client.push(s);
                        }
                        _ => unreachable!("kind pinned by mechanism"),
                    }
                }
                let mut party_totals = Vec::with_capacity(k);
                for party in 0..k {
                    let inbox: Vec<&[FieldElement]> = per_client
                        .iter()
                        .map(|client| client[party].as_slice())
                        .collect();
                    party_totals.push(
                        sharing::smpc_party_fold(&inbox, &self.ring).map_err(|e| {
                            Error::mechanism("smpc_party_fold", None, e.to_string())
                        })?,
                    );
                }
                let mean =
                    sharing::smpc_recover(&party_totals, k, wires.len(), &self.cfg, &self.ring)
                        .map_err(|e| Error::mechanism("smpc_recover", None, e.to_string()))?;
                Ok(ServerAggregate::Mean(mean))
            }
            MechanismKind::He => {
                let public = self
                    .paillier
                    .as_ref()
                    .expect("paillier keypair present for he")
                    .public();
                let mut lists = Vec::with_capacity(wires.len());
                for (i, w) in wires.iter().enumerate() {
                    match decode(i, w)? {
                        PrivacyEnvelope::Ciphertexts(c) => lists.push(c),
                        _ => unreachable!("kind pinned by mechanism"),
                    }
                }
                let folded = paillier::he_aggregate(&lists, public)
                    .map_err(|e| Error::mechanism("he_aggregate", None, e.to_string()))?;
                Ok(ServerAggregate::FoldedCiphertexts(folded))
            }
        }
    }

    /// Key-authority side: turn the server aggregate into the final mean.
    /// Free for every mechanism except HE, where it decrypts.
    pub fn recover(&self, aggregate: ServerAggregate, num_clients: usize) -> Result<ParamVector> {
        match aggregate {
            ServerAggregate::Mean(m) => Ok(m),
            ServerAggregate::FoldedCiphertexts(folded) => {
                let keypair = self.paillier.as_ref().expect("paillier keypair present");
                paillier::he_recover(&folded, keypair, num_clients, &self.cfg)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_updates(n: usize, dim: usize, seed: u64) -> Vec<ParamVector> {
        let mut rng = seeded_rng(seed, 0);
        (0..n)
            .map(|_| {
                ParamVector::from_vec(
                    (0..dim)
                        .map(|_| (rng.random::<f64>() - 0.5) * 2.0)
                        .collect(),
                )
            })
            .collect()
    }

    fn run_pipeline(cfg: PrivacyConfig, updates: &[ParamVector], seed: u64) -> ParamVector {
        let n = updates.len();
        let roster: Vec<usize> = (0..n).collect();
        let ctx = MechanismContext::new(cfg, n, seed).unwrap();
        let wires: Vec<Vec<u8>> = updates
            .iter()
            .enumerate()
            .map(|(i, u)| {
                ctx.protect(u, i, &roster, 0, seed)
                    .unwrap()
                    .to_wire(ctx.ring())
            })
            .collect();
        let agg = ctx.server_aggregate(&wires, &roster, 0).unwrap();
        ctx.recover(agg, n).unwrap()
    }

    #[test]
    fn every_mechanism_is_aggregation_transparent() {
        let updates = random_updates(6, 20, 21);
        let plain = ParamVector::mean(&updates).unwrap();
        let step = (2.0f64).powi(-16);
        for mechanism in [MechanismKind::Sa, MechanismKind::Smpc, MechanismKind::He] {
            let cfg = PrivacyConfig {
                mechanism,
                key_bits: 256,
                ..PrivacyConfig::default()
            };
            let recovered = run_pipeline(cfg, &updates, 21);
            for (a, b) in recovered.iter().zip(plain.iter()) {
                assert!((a - b).abs() <= step, "{mechanism:?}: {a} vs {b}");
            }
        }
        // DP with the noise hook at 0 and a clip bound far above the norms is
        // exactly the plaintext mean.
        let cfg = PrivacyConfig {
            mechanism: MechanismKind::Dp,
            noise_override: Some(0.0),
            clip_norm: 1e18,
            ..PrivacyConfig::default()
        };
        assert_eq!(run_pipeline(cfg, &updates, 21), plain);
    }

    #[test]
    fn envelope_byte_sizes_are_ordered() {
        // plain <= noised < masked/shares < ciphertexts at equal dimension
        let updates = random_updates(3, 16, 22);
        let roster = [0usize, 1, 2];
        let mut sizes = std::collections::HashMap::new();
        for mechanism in [
            MechanismKind::None,
            MechanismKind::Dp,
            MechanismKind::Sa,
            MechanismKind::Smpc,
            MechanismKind::He,
        ] {
            let cfg = PrivacyConfig {
                mechanism,
                key_bits: 256,
                clip_norm: 1e18,
                ..PrivacyConfig::default()
            };
            let ctx = MechanismContext::new(cfg, 3, 22).unwrap();
            let env = ctx.protect(&updates[0], 0, &roster, 0, 22).unwrap();
            sizes.insert(mechanism.name(), env.byte_size(ctx.ring()));
        }
        assert!(sizes["none"] <= sizes["dp"]);
        assert!(sizes["dp"] < sizes["sa"]);
        assert!(sizes["dp"] < sizes["smpc"]);
        assert!(sizes["sa"] < sizes["he"]);
        assert!(sizes["smpc"] < sizes["he"]);
    }

    #[test]
    fn config_validation_reports_every_violation() {
        let cfg = PrivacyConfig {
            mechanism: MechanismKind::He,
            epsilon: -1.0,
            key_bits: 100,
            num_parties: Some(1),
            ..PrivacyConfig::default()
        };
        let err = cfg.validate(4).unwrap_err().to_string();
        assert!(err.contains("epsilon"), "{err}");
        assert!(err.contains("key_bits"), "{err}");
        assert!(err.contains("parties"), "{err}");
    }

    #[test]
    fn overflow_guard_rejects_tiny_ring() {
        let cfg = PrivacyConfig {
            mechanism: MechanismKind::Sa,
            ring_bits: 24,
            scale_bits: 16,
            max_update_abs: 1000.0,
            ..PrivacyConfig::default()
        };
        // 16 * 2^16 * 1000 ~ 2^30, far beyond the 2^23 half-ring
        let err = cfg.validate(16).unwrap_err().to_string();
        assert!(err.contains("overflow guard"), "{err}");
        // Same parameters fit easily in the default 64-bit ring.
        let ok = PrivacyConfig {
            ring_bits: 64,
            ..cfg
        };
        ok.validate(16).unwrap();
    }

    #[test]
    fn protect_overflow_names_stage_and_client() {
        let cfg = PrivacyConfig {
            mechanism: MechanismKind::Sa,
            max_update_abs: 1.0,
            ..PrivacyConfig::default()
        };
        let ctx = MechanismContext::new(cfg, 2, 3).unwrap();
        let update = ParamVector::from_vec(vec![0.5, 7.5]);
        let err = ctx.protect(&update, 1, &[0, 1], 0, 3).unwrap_err();
        match err {
            Error::Mechanism { stage, client, .. } => {
                assert_eq!(stage, "protect");
                assert_eq!(client, Some(1));
            }
            other => panic!("expected mechanism error, got {other}"),
        }
    }

    #[test]
    fn smpc_share_count_mismatch_names_stage() {
        let cfg = PrivacyConfig {
            mechanism: MechanismKind::Smpc,
            num_parties: Some(3),
            ..PrivacyConfig::default()
        };
        let ctx = MechanismContext::new(cfg, 2, 5).unwrap();
        let update = ParamVector::from_vec(vec![1.0]);
        let roster = [0usize, 1];
        // Hand-craft an envelope with the wrong party count.
        let bad = PrivacyEnvelope::Shares(vec![vec![ctx.ring().zero()]; 2]);
        let wires = vec![
            bad.to_wire(ctx.ring()),
            ctx.protect(&update, 1, &roster, 0, 5)
                .unwrap()
                .to_wire(ctx.ring()),
        ];
        let err = ctx.server_aggregate(&wires, &roster, 0).unwrap_err();
        assert!(
            matches!(
                err,
                Error::Mechanism {
                    stage: "smpc_route",
                    ..
                }
            ),
            "{err}"
        );
    }
}
