//! Differential privacy: norm clipping plus calibrated Laplace or Gaussian
//! noise, applied client-side before upload.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::envelope::PrivacyEnvelope;
use super::{NoiseKind, PrivacyConfig};
use crate::crypto::rng::SeededRng;
use crate::error::Result;
use crate::model::ParamVector;

/// Scale the update by `min(1, clip_norm / norm)`; L1 norm under Laplace
/// noise, L2 under Gaussian. The output never exceeds the clip norm.
pub fn clip_to_norm(update: &ParamVector, noise: NoiseKind, clip_norm: f64) -> ParamVector {
    let norm = match noise {
        NoiseKind::Laplace => update.l1_norm(),
        NoiseKind::Gaussian => update.l2_norm(),
    };
    let mut clipped = update.clone();
    if norm > clip_norm {
        clipped.scale(clip_norm / norm);
    }
    clipped
}

/// Per-coordinate noise scale calibrated to the configured budget:
/// `b = S / epsilon` for Laplace, `sigma = S * sqrt(2 ln(1.25/delta)) / epsilon`
/// for Gaussian. The test hook `noise_override` replaces the scale outright.
pub fn noise_scale(cfg: &PrivacyConfig) -> f64 {
    if let Some(s) = cfg.noise_override {
        return s;
    }
    match cfg.noise {
        NoiseKind::Laplace => cfg.clip_norm / cfg.epsilon,
        NoiseKind::Gaussian => cfg.clip_norm * (2.0 * (1.25 / cfg.delta).ln()).sqrt() / cfg.epsilon,
    }
}

pub fn sample_laplace(scale: f64, rng: &mut SeededRng) -> f64 {
    // Inverse-CDF transform on u in [-0.5, 0.5).
    let u: f64 = rng.random::<f64>() - 0.5;
    let magnitude = (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE);
    -scale * u.signum() * magnitude.ln()
}

/// Clip then add i.i.d. per-coordinate noise.
pub fn dp_protect(
    update: &ParamVector,
    cfg: &PrivacyConfig,
    rng: &mut SeededRng,
) -> Result<PrivacyEnvelope> {
    let mut noised = clip_to_norm(update, cfg.noise, cfg.clip_norm);
    let scale = noise_scale(cfg);
    if scale > 0.0 {
        match cfg.noise {
            NoiseKind::Laplace => {
                for v in noised.as_mut_slice() {
                    *v += sample_laplace(scale, rng);
                }
            }
            NoiseKind::Gaussian => {
                let normal = Normal::new(0.0, scale).expect("positive scale");
                for v in noised.as_mut_slice() {
                    *v += normal.sample(rng);
                }
            }
        }
    }
    Ok(PrivacyEnvelope::Noised(noised))
}

/// Server-side mean of noised updates; shares the summation path with
/// plaintext FedAvg so a zero noise scale reproduces it exactly.
pub fn dp_aggregate(updates: &[ParamVector]) -> Result<ParamVector> {
    ParamVector::mean(updates)
}
