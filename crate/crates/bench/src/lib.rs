//! Shared helpers for the benchmark targets.

use privfed::privacy::MechanismContext;
use privfed::{MechanismKind, ParamVector, PrivacyConfig};

/// Deterministic pseudo-random updates in [-1, 1], sized for benches.
pub fn updates(n: usize, dim: usize) -> Vec<ParamVector> {
    (0..n)
        .map(|i| {
            ParamVector::from_vec(
                (0..dim)
                    .map(|j| {
                        let x = ((i * dim + j) as f64 * 0.7368826) % 2.0;
                        x - 1.0
                    })
                    .collect(),
            )
        })
        .collect()
}

pub fn context(mechanism: MechanismKind, n: usize) -> MechanismContext {
    let cfg = PrivacyConfig {
        mechanism,
        key_bits: 256,
        ..PrivacyConfig::default()
    };
    MechanismContext::new(cfg, n, 42).expect("valid bench config")
}

/// Protect every update and serialize, as the round loop would.
pub fn protected_wires(ctx: &MechanismContext, updates: &[ParamVector]) -> Vec<Vec<u8>> {
    let roster: Vec<usize> = (0..updates.len()).collect();
    updates
        .iter()
        .enumerate()
        .map(|(i, u)| {
            ctx.protect(u, i, &roster, 0, 42)
                .expect("protect succeeds")
                .to_wire(ctx.ring())
        })
        .collect()
}
