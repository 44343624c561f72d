//! Experiment configuration, execution, and CSV emission.

pub mod config_file;
pub mod csv;
pub mod runner;

pub use config_file::apply_config_file;
pub use csv::{SummaryRow, ROUNDS_HEADER, SUMMARY_HEADER};
pub use runner::{run, sweep, RunOutput};

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::federation::AggregationMode;
use crate::model::{ModelKind, OptimizerKind};
use crate::privacy::PrivacyConfig;

/// Where the experiment's data comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Synthetic {
        examples: usize,
        input_dim: usize,
        classes: usize,
    },
    Csv(PathBuf),
}

impl std::fmt::Display for DatasetSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DatasetSource::Synthetic { .. } => write!(f, "synthetic"),
            DatasetSource::Csv(path) => write!(f, "csv:{}", path.display()),
        }
    }
}

/// The full experiment description. Defaults are desk-scale; every field can
/// be set from the config file, and the CLI flags override the file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub num_clients: usize,
    pub rounds: usize,
    pub local_epochs: usize,
    pub batch_size: usize,
    pub model: ModelKind,
    pub hidden_dim: usize,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub dataset: DatasetSource,
    pub alpha: f64,
    pub aggregation: AggregationMode,
    pub eta_p: f64,
    pub lambda: f64,
    pub privacy: PrivacyConfig,
    pub master_seed: u64,
    pub eval_every: usize,
    pub out_dir: PathBuf,
    pub sweep_clients: Option<Vec<usize>>,
    /// Sample-size-weighted aggregation instead of the plain mean.
    pub weighted: bool,
    pub parallel: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            num_clients: 16,
            rounds: 50,
            local_epochs: 1,
            batch_size: 32,
            model: ModelKind::Logistic,
            hidden_dim: 32,
            optimizer: OptimizerKind::Adam,
            learning_rate: 0.001,
            dataset: DatasetSource::Synthetic {
                examples: 2000,
                input_dim: 32,
                classes: 4,
            },
            alpha: 0.5,
            aggregation: AggregationMode::FedAvg,
            eta_p: 0.01,
            lambda: 0.1,
            privacy: PrivacyConfig::default(),
            master_seed: 42,
            eval_every: 1,
            out_dir: PathBuf::from("results"),
            sweep_clients: None,
            weighted: false,
            parallel: false,
        }
    }
}

impl ExperimentConfig {
    /// Check every invariant, reporting all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.num_clients < 1 {
            problems.push(format!("clients must be >= 1, got {}", self.num_clients));
        }
        if self.local_epochs < 1 {
            problems.push(format!("epochs must be >= 1, got {}", self.local_epochs));
        }
        if self.batch_size < 1 {
            problems.push(format!("batch size must be >= 1, got {}", self.batch_size));
        }
        if self.eval_every < 1 {
            problems.push(format!("eval-every must be >= 1, got {}", self.eval_every));
        }
        if self.model == ModelKind::Mlp && self.hidden_dim < 1 {
            problems.push(format!("hidden dim must be >= 1, got {}", self.hidden_dim));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            problems.push(format!("lr must be > 0, got {}", self.learning_rate));
        }
        if self.alpha.is_nan() || self.alpha <= 0.0 {
            problems.push(format!("alpha must be > 0, got {}", self.alpha));
        }
        if self.eta_p.is_nan() || self.eta_p <= 0.0 {
            problems.push(format!("eta-p must be > 0, got {}", self.eta_p));
        }
        if self.lambda < 0.0 {
            problems.push(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if let DatasetSource::Synthetic {
            examples,
            input_dim,
            classes,
        } = &self.dataset
        {
            if *examples < 1 || *input_dim < 1 || *classes < 2 {
                problems.push(format!(
                    "synthetic dataset needs examples >= 1, dim >= 1, classes >= 2; \
                     got {examples}/{input_dim}/{classes}"
                ));
            }
        }
        if let Some(list) = &self.sweep_clients {
            if list.is_empty() {
                problems.push("sweep-clients list is empty".into());
            }
            if list.iter().any(|&n| n < 1) {
                problems.push("sweep-clients entries must be >= 1".into());
            }
        }
        match self.privacy.validate(self.num_clients.max(1)) {
            Err(Error::Config(msg)) => problems.push(msg),
            Err(e) => problems.push(e.to_string()),
            Ok(()) => {}
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// The resolved configuration as config-file syntax, used for the echo at
    /// run start (and doubling as documentation of the accepted keys).
    pub fn to_kv_string(&self) -> String {
        let p = &self.privacy;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        kv("clients", self.num_clients.to_string());
        kv("rounds", self.rounds.to_string());
        kv("epochs", self.local_epochs.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv(
            "model",
            match self.model {
                ModelKind::Logistic => "logistic".into(),
                ModelKind::Mlp => "mlp".into(),
            },
        );
        kv("hidden_dim", self.hidden_dim.to_string());
        kv(
            "optimizer",
            match self.optimizer {
                OptimizerKind::Sgd => "sgd".into(),
                OptimizerKind::Adam => "adam".into(),
            },
        );
        kv("lr", self.learning_rate.to_string());
        kv("dataset", self.dataset.to_string());
        if let DatasetSource::Synthetic {
            examples,
            input_dim,
            classes,
        } = &self.dataset
        {
            kv("synthetic_examples", examples.to_string());
            kv("synthetic_dim", input_dim.to_string());
            kv("synthetic_classes", classes.to_string());
        }
        kv("alpha", self.alpha.to_string());
        kv("agg", self.aggregation.name().into());
        kv("eta_p", self.eta_p.to_string());
        kv("lambda", self.lambda.to_string());
        kv("mechanism", p.mechanism.name().into());
        kv("epsilon", p.epsilon.to_string());
        kv("clip", p.clip_norm.to_string());
        kv(
            "noise",
            match p.noise {
                crate::privacy::NoiseKind::Laplace => "laplace".into(),
                crate::privacy::NoiseKind::Gaussian => "gaussian".into(),
            },
        );
        kv("delta", p.delta.to_string());
        kv("key_bits", p.key_bits.to_string());
        kv("scale_bits", p.scale_bits.to_string());
        kv(
            "parties",
            p.num_parties.map_or("auto".into(), |k| k.to_string()),
        );
        kv("ring_bits", p.ring_bits.to_string());
        kv("max_update_abs", p.max_update_abs.to_string());
        kv("seed", self.master_seed.to_string());
        kv("eval_every", self.eval_every.to_string());
        kv("out", self.out_dir.display().to_string());
        if let Some(list) = &self.sweep_clients {
            kv(
                "sweep_clients",
                list.iter()
                    .map(|n| n.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            );
        }
        kv("weighted", self.weighted.to_string());
        kv("parallel", self.parallel.to_string());
        out
    }
}
