//! Deterministic simulator and library for privacy-preserving personalized
//! federated learning.
//!
//! Clients train small supervised models on local shards, a server aggregates
//! their updates through one of four privacy mechanisms (differential privacy,
//! additive homomorphic encryption, masked secure aggregation, additive-share
//! SMPC), and a harness records accuracy/precision/recall/F1 plus per-round
//! server time and traffic as CSV.
//!
//! All randomness is derived from a master seed, so every run is reproducible
//! bit for bit. That includes the cryptographic masks and keys: this is a
//! simulator, and its determinism is **not production-secure**.

pub mod crypto;
pub mod error;
pub mod federation;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod privacy;

pub use error::{Error, Result};
pub use federation::{
    apple_personalize, apple_weight_gradient, fed_avg, AggregationMode, ClientState, Federation,
    FederationConfig, RoundRecord, ServerState,
};
pub use harness::{DatasetSource, ExperimentConfig, RunOutput, SummaryRow};
pub use metrics::{Averaging, ConfusionCounts, Metric, MetricsReport};
pub use model::{Dataset, Matrix, ModelKind, ModelSpec, OptimizerKind, ParamVector};
pub use privacy::{MechanismKind, NoiseKind, PrivacyConfig, PrivacyEnvelope};
