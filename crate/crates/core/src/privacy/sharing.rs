//! SMPC aggregation by k-party additive secret sharing.
//!
//! Each encoded coordinate splits into `k` shares: the first `k - 1` are
//! uniform ring elements, the last is the encoding minus their sum. Every
//! compute party folds the share vectors it receives across clients; the
//! recover step sums the party totals, which reconstructs the aggregate and
//! nothing else (any proper subset of party totals stays uniform).

use super::envelope::PrivacyEnvelope;
use super::fixed_point::{fp_decode, fp_encode};
use super::PrivacyConfig;
use crate::crypto::rng::SeededRng;
use crate::crypto::{FieldElement, RingModulus};
use crate::error::{Error, Result};
use crate::model::ParamVector;

/// Split an update into `k` additive share vectors.
pub fn smpc_protect(
    update: &ParamVector,
    k: usize,
    rng: &mut SeededRng,
    cfg: &PrivacyConfig,
    ring: &RingModulus,
) -> Result<PrivacyEnvelope> {
    if k < 2 {
        return Err(Error::Config(format!("smpc needs k >= 2 parties, got {k}")));
    }
    let q = ring.modulus();
    let mut parties: Vec<Vec<FieldElement>> = vec![Vec::with_capacity(update.len()); k];
    for &x in update.iter() {
        if x.abs() > cfg.max_update_abs {
            return Err(Error::Input(format!(
                "coordinate {x} exceeds configured max |update| {}",
                cfg.max_update_abs
            )));
        }
        let encoded = ring.reduce(fp_encode(x, cfg.scale_bits, q)?);
        let mut running = ring.zero();
        for party in parties.iter_mut().take(k - 1) {
            let share = ring.uniform(rng);
            ring.add_assign(&mut running, &share);
            party.push(share);
        }
        parties[k - 1].push(ring.sub(&encoded, &running));
    }
    Ok(PrivacyEnvelope::Shares(parties))
}

/// One party's fold: the coordinate-wise ring sum of the share vectors it
/// received from all clients.
pub fn smpc_party_fold(
    received: &[&[FieldElement]],
    ring: &RingModulus,
) -> Result<Vec<FieldElement>> {
    let dim = received
        .first()
        .map(|v| v.len())
        .ok_or_else(|| Error::Input("smpc_party_fold on empty input".into()))?;
    let mut total: Vec<FieldElement> = vec![ring.zero(); dim];
    for (idx, shares) in received.iter().enumerate() {
        if shares.len() != dim {
            return Err(Error::Protocol(format!(
                "share vector {idx} has {} coordinates, expected {dim}",
                shares.len()
            )));
        }
        for (t, s) in total.iter_mut().zip(*shares) {
            ring.add_assign(t, s);
        }
    }
    Ok(total)
}

/// Combine the `k` party totals, decode, divide by the client count.
pub fn smpc_recover(
    party_totals: &[Vec<FieldElement>],
    k: usize,
    num_clients: usize,
    cfg: &PrivacyConfig,
    ring: &RingModulus,
) -> Result<ParamVector> {
    if party_totals.len() != k {
        return Err(Error::Protocol(format!(
            "expected {k} party totals, received {}",
            party_totals.len()
        )));
    }
    let dim = party_totals[0].len();
    let mut acc: Vec<FieldElement> = vec![ring.zero(); dim];
    for (party, total) in party_totals.iter().enumerate() {
        if total.len() != dim {
            return Err(Error::Protocol(format!(
                "party {party} total has {} coordinates, expected {dim}",
                total.len()
            )));
        }
        for (a, t) in acc.iter_mut().zip(total) {
            ring.add_assign(a, t);
        }
    }
    let n = num_clients as f64;
    let q = ring.modulus();
    Ok(ParamVector::from_vec(
        acc.iter()
            .map(|e| fp_decode(e.value(), cfg.scale_bits, q) / n)
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::rng::seeded_rng;
    use crate::privacy::MechanismKind;
    use num_traits::ToPrimitive;
    use rand::Rng;

    fn cfg() -> PrivacyConfig {
        PrivacyConfig {
            mechanism: MechanismKind::Smpc,
            ..PrivacyConfig::default()
        }
    }

    fn ring() -> RingModulus {
        RingModulus::power_of_two(64)
    }

    fn shares_of(env: PrivacyEnvelope) -> Vec<Vec<FieldElement>> {
        match env {
            PrivacyEnvelope::Shares(s) => s,
            other => panic!("unexpected variant {other:?}"),
        }
    }

    #[test]
    fn two_shares_sum_to_encoding() {
        let (cfg, ring) = (cfg(), ring());
        let mut rng = seeded_rng(1, 1);
        let v = -3.375f64;
        let shares = shares_of(
            smpc_protect(&ParamVector::from_vec(vec![v]), 2, &mut rng, &cfg, &ring).unwrap(),
        );
        let sum = ring.add(&shares[0][0], &shares[1][0]);
        let expected = ring.reduce(fp_encode(v, cfg.scale_bits, ring.modulus()).unwrap());
        assert_eq!(sum, expected);
    }

    #[test]
    fn share_reconstruction_exact_for_k_in_spec_range() {
        let (cfg, ring) = (cfg(), ring());
        let mut rng = seeded_rng(2, 1);
        for k in [2usize, 3, 5] {
            for _ in 0..50 {
                let x = (rng.random::<f64>() - 0.5) * 10.0;
                let shares = shares_of(
                    smpc_protect(&ParamVector::from_vec(vec![x]), k, &mut rng, &cfg, &ring)
                        .unwrap(),
                );
                let mut sum = ring.zero();
                for s in &shares {
                    ring.add_assign(&mut sum, &s[0]);
                }
                let expected = ring.reduce(fp_encode(x, cfg.scale_bits, ring.modulus()).unwrap());
                assert_eq!(sum, expected, "k={k} x={x}");
            }
        }
    }

    #[test]
    fn proper_subset_of_shares_stays_uniform() {
        // The sum held by any k-1 of k parties is still uniform: chi-square
        // on 16 bins over 10^4 sharings of one fixed secret (0.01 critical
        // value for 15 degrees of freedom is 30.578).
        let (cfg, ring) = (cfg(), ring());
        let k = 3;
        let samples = 10_000usize;
        let secret = ParamVector::from_vec(vec![-2.5]);
        for dropped in 0..k {
            let mut counts = [0usize; 16];
            let mut rng = seeded_rng(7, 300 + dropped as u64);
            for _ in 0..samples {
                let shares = shares_of(smpc_protect(&secret, k, &mut rng, &cfg, &ring).unwrap());
                let mut partial = ring.zero();
                for (party, share) in shares.iter().enumerate() {
                    if party != dropped {
                        ring.add_assign(&mut partial, &share[0]);
                    }
                }
                let bin = (partial.value() >> 60u32).to_u64().unwrap_or(0) as usize;
                counts[bin] += 1;
            }
            let expected = samples as f64 / 16.0;
            let chi2: f64 = counts
                .iter()
                .map(|&c| {
                    let d = c as f64 - expected;
                    d * d / expected
                })
                .sum();
            assert!(chi2 < 30.578, "subset without party {dropped}: chi2 {chi2}");
        }
    }

    #[test]
    fn single_party_share_marginal_is_uniform() {
        // Chi-square on 16 bins over 10^4 sharings of one fixed secret; the
        // 0.01 critical value for 15 degrees of freedom is 30.578.
        let (cfg, ring) = (cfg(), ring());
        let k = 3;
        let samples = 10_000usize;
        let bins = 16usize;
        let secret = ParamVector::from_vec(vec![0.8125]);
        for party in 0..k {
            let mut counts = vec![0usize; bins];
            let mut rng_local = seeded_rng(3, 100 + party as u64);
            for _ in 0..samples {
                let shares =
                    shares_of(smpc_protect(&secret, k, &mut rng_local, &cfg, &ring).unwrap());
                let top4 = (shares[party][0].value() >> 60u32).to_u64().unwrap() as usize;
                counts[top4] += 1;
            }
            let expected = samples as f64 / bins as f64;
            let chi2: f64 = counts
                .iter()
                .map(|&c| {
                    let d = c as f64 - expected;
                    d * d / expected
                })
                .sum();
            assert!(chi2 < 30.578, "party {party}: chi2 {chi2}");
        }
    }

    #[test]
    fn pipeline_matches_plaintext_mean() {
        let (cfg, ring) = (cfg(), ring());
        let mut rng = seeded_rng(4, 1);
        let (n, k, dim) = (8usize, 3usize, 24usize);
        let updates: Vec<ParamVector> = (0..n)
            .map(|_| {
                ParamVector::from_vec(
                    (0..dim)
                        .map(|_| (rng.random::<f64>() - 0.5) * 2.0)
                        .collect(),
                )
            })
            .collect();
        let all_shares: Vec<Vec<Vec<FieldElement>>> = updates
            .iter()
            .map(|u| shares_of(smpc_protect(u, k, &mut rng, &cfg, &ring).unwrap()))
            .collect();
        let mut party_totals = Vec::with_capacity(k);
        for party in 0..k {
            let inbox: Vec<&[FieldElement]> = all_shares
                .iter()
                .map(|client| client[party].as_slice())
                .collect();
            party_totals.push(smpc_party_fold(&inbox, &ring).unwrap());
        }
        let recovered = smpc_recover(&party_totals, k, n, &cfg, &ring).unwrap();
        let plain = ParamVector::mean(&updates).unwrap();
        let step = (2.0f64).powi(-(cfg.scale_bits as i32));
        for (a, b) in recovered.iter().zip(plain.iter()) {
            assert!((a - b).abs() <= step);
        }
    }

    #[test]
    fn wrong_party_count_is_protocol_error() {
        let (cfg, ring) = (cfg(), ring());
        let totals = vec![vec![ring.zero()]; 2];
        assert!(matches!(
            smpc_recover(&totals, 3, 4, &cfg, &ring),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn k_below_two_is_config_error() {
        let (cfg, ring) = (cfg(), ring());
        let mut rng = seeded_rng(5, 1);
        assert!(matches!(
            smpc_protect(&ParamVector::from_vec(vec![1.0]), 1, &mut rng, &cfg, &ring),
            Err(Error::Config(_))
        ));
    }
}
