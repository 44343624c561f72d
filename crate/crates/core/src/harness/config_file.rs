//! Flat `key=value` configuration files. Blank lines and `#` comments are
//! ignored; unknown keys and malformed values are errors. Precedence is
//! CLI flag > file value > default, enforced by applying the file first and
//! the flags afterwards.

use std::path::{Path, PathBuf};

use super::{DatasetSource, ExperimentConfig};
use crate::error::{Error, Result};
use crate::model::{ModelKind, OptimizerKind};

pub fn apply_config_file(cfg: &mut ExperimentConfig, path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path)?;
    apply_config_text(cfg, &text)
}

pub fn apply_config_text(cfg: &mut ExperimentConfig, text: &str) -> Result<()> {
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse {
                row: idx + 1,
                detail: format!("expected key=value, found {line:?}"),
            });
        };
        set_key(cfg, key.trim(), value.trim()).map_err(|e| Error::Parse {
            row: idx + 1,
            detail: e.to_string(),
        })?;
    }
    Ok(())
}

/// Apply one key. The key names match the CLI flag names (dashes or
/// underscores both accepted).
pub fn set_key(cfg: &mut ExperimentConfig, key: &str, value: &str) -> Result<()> {
    let key = key.replace('-', "_");
    let bad = |what: &str| Error::Config(format!("{key}: {what}: {value:?}"));
    match key.as_str() {
        "clients" => cfg.num_clients = parse(value, &bad)?,
        "rounds" => cfg.rounds = parse(value, &bad)?,
        "epochs" => cfg.local_epochs = parse(value, &bad)?,
        "batch_size" => cfg.batch_size = parse(value, &bad)?,
        "model" => {
            cfg.model = match value {
                "logistic" => ModelKind::Logistic,
                "mlp" => ModelKind::Mlp,
                _ => return Err(bad("expected logistic|mlp")),
            }
        }
        "hidden_dim" => cfg.hidden_dim = parse(value, &bad)?,
        "optimizer" => {
            cfg.optimizer = match value {
                "sgd" => OptimizerKind::Sgd,
                "adam" => OptimizerKind::Adam,
                _ => return Err(bad("expected sgd|adam")),
            }
        }
        "lr" => cfg.learning_rate = parse(value, &bad)?,
        "dataset" => cfg.dataset = parse_dataset(value, &cfg.dataset)?,
        "synthetic_examples" => with_synthetic(cfg, &bad, |e, _, _| *e = value.parse().ok())?,
        "synthetic_dim" => with_synthetic(cfg, &bad, |_, d, _| *d = value.parse().ok())?,
        "synthetic_classes" => with_synthetic(cfg, &bad, |_, _, c| *c = value.parse().ok())?,
        "alpha" => cfg.alpha = parse(value, &bad)?,
        "agg" => cfg.aggregation = value.parse()?,
        "eta_p" => cfg.eta_p = parse(value, &bad)?,
        "lambda" => cfg.lambda = parse(value, &bad)?,
        "mechanism" => cfg.privacy.mechanism = value.parse()?,
        "epsilon" => cfg.privacy.epsilon = parse(value, &bad)?,
        "clip" => cfg.privacy.clip_norm = parse(value, &bad)?,
        "noise" => cfg.privacy.noise = value.parse()?,
        "delta" => cfg.privacy.delta = parse(value, &bad)?,
        "key_bits" => cfg.privacy.key_bits = parse(value, &bad)?,
        "scale_bits" => cfg.privacy.scale_bits = parse(value, &bad)?,
        "parties" => {
            cfg.privacy.num_parties = if value == "auto" {
                None
            } else {
                Some(parse(value, &bad)?)
            }
        }
        "ring_bits" => cfg.privacy.ring_bits = parse(value, &bad)?,
        "max_update_abs" => cfg.privacy.max_update_abs = parse(value, &bad)?,
        "seed" => cfg.master_seed = parse(value, &bad)?,
        "eval_every" => cfg.eval_every = parse(value, &bad)?,
        "out" => cfg.out_dir = PathBuf::from(value),
        "sweep_clients" => cfg.sweep_clients = Some(parse_client_list(value)?),
        "weighted" => cfg.weighted = parse(value, &bad)?,
        "parallel" => cfg.parallel = parse(value, &bad)?,
        _ => return Err(Error::Config(format!("unknown configuration key {key:?}"))),
    }
    Ok(())
}

fn parse<T: std::str::FromStr>(value: &str, bad: &impl Fn(&str) -> Error) -> Result<T> {
    value.parse().map_err(|_| bad("invalid value"))
}

fn with_synthetic(
    cfg: &mut ExperimentConfig,
    bad: &impl Fn(&str) -> Error,
    f: impl Fn(&mut Option<usize>, &mut Option<usize>, &mut Option<usize>),
) -> Result<()> {
    let DatasetSource::Synthetic {
        examples,
        input_dim,
        classes,
    } = &mut cfg.dataset
    else {
        return Err(bad("synthetic_* keys need dataset=synthetic"));
    };
    let (mut e, mut d, mut c) = (Some(*examples), Some(*input_dim), Some(*classes));
    f(&mut e, &mut d, &mut c);
    let (Some(e), Some(d), Some(c)) = (e, d, c) else {
        return Err(bad("invalid value"));
    };
    (*examples, *input_dim, *classes) = (e, d, c);
    Ok(())
}

pub fn parse_dataset(value: &str, current: &DatasetSource) -> Result<DatasetSource> {
    if value == "synthetic" {
        // keep any previously configured synthetic shape
        if let DatasetSource::Synthetic { .. } = current {
            return Ok(current.clone());
        }
        let ExperimentConfig { dataset, .. } = ExperimentConfig::default();
        return Ok(dataset);
    }
    if let Some(path) = value.strip_prefix("csv:") {
        if path.is_empty() {
            return Err(Error::Config("dataset: empty csv path".into()));
        }
        return Ok(DatasetSource::Csv(PathBuf::from(path)));
    }
    Err(Error::Config(format!(
        "dataset: expected synthetic or csv:<path>, got {value:?}"
    )))
}

pub fn parse_client_list(value: &str) -> Result<Vec<usize>> {
    value
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("sweep_clients: bad count {part:?}")))
        })
        .collect()
}
