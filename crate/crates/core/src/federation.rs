//! Round-based client/server orchestration: local training, update
//! collection through a privacy mechanism, FedAvg global aggregation, and
//! adaptive personalized aggregation in which each client learns combination
//! weights over all clients' core models (cross-silo broadcast).

use std::time::Instant;

use crate::crypto::rng::{derive_stream_id, seeded_rng};
use crate::error::{Error, Result};
use crate::metrics::{evaluate as evaluate_metrics, Averaging, MetricsReport};
use crate::model::{
    loss as model_loss, loss_and_gradient, predict, Dataset, ModelSpec, OptimizerKind,
    OptimizerState, ParamVector,
};
use crate::privacy::{MechanismContext, PrivacyConfig, PrivacyEnvelope};

const CLIENT_TRAIN_DOMAIN: u64 = 0x4354;
const SPLIT_DOMAIN: u64 = 0x5350;

/// Fraction of each shard held out for evaluation.
const TEST_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AggregationMode {
    #[default]
    FedAvg,
    Apple,
}

impl AggregationMode {
    pub fn name(&self) -> &'static str {
        match self {
            AggregationMode::FedAvg => "fedavg",
            AggregationMode::Apple => "apple",
        }
    }
}

impl std::str::FromStr for AggregationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fedavg" => Ok(AggregationMode::FedAvg),
            "apple" => Ok(AggregationMode::Apple),
            other => Err(Error::Config(format!(
                "unknown aggregation mode {other:?} (expected fedavg|apple)"
            ))),
        }
    }
}

/// Federation-level knobs; the harness builds this from its experiment
/// configuration.
#[derive(Debug, Clone)]
pub struct FederationConfig {
    pub model: ModelSpec,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub local_epochs: usize,
    pub batch_size: usize,
    pub aggregation: AggregationMode,
    /// Learning rate for the personalization weights.
    pub eta_p: f64,
    /// Strength of the pull toward self-reliance in the weight objective.
    pub lambda: f64,
    pub privacy: PrivacyConfig,
    pub master_seed: u64,
    /// Weight the aggregate by shard sizes instead of the plain mean.
    /// Applied as a client-side scaling of `n_i * N / sum(n)`, so the
    /// server-side mean (through any mechanism) becomes the weighted mean.
    pub weighted: bool,
    /// Run client training on threads; the fold order stays ascending
    /// client id, so traces are identical to the serial path.
    pub parallel: bool,
}

/// One client: its data shards, shareable core model, personalization
/// weights, and optimizer state.
#[derive(Debug, Clone)]
pub struct ClientState {
    pub client_id: usize,
    pub shard: Dataset,
    pub test_shard: Dataset,
    pub core_model: ParamVector,
    /// Combination weights over all clients' core models (one per client).
    pub personal_weights: Vec<f64>,
    pub optimizer: OptimizerState,
}

/// Server-side state across rounds.
#[derive(Debug, Clone)]
pub struct ServerState {
    pub global_model: ParamVector,
    pub round_index: u64,
    pub roster: Vec<usize>,
}

/// Per-round measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round_index: u64,
    pub global_accuracy: f64,
    pub global_precision: f64,
    pub global_recall: f64,
    pub global_f1: f64,
    pub mean_personal_accuracy: f64,
    pub mean_loss: f64,
    /// Wall-clock milliseconds of the server-side aggregation stage
    /// (mechanism server work included; HE decryption belongs to the key
    /// authority and is not server time).
    pub server_ms: f64,
    pub bytes_up: u64,
    pub bytes_down: u64,
}

/// Coordinate-wise arithmetic mean of the given models.
pub fn fed_avg(models: &[ParamVector]) -> Result<ParamVector> {
    ParamVector::mean(models)
}

/// Personalized model: the weighted combination `w = sum_j p_j * c_j`.
pub fn apple_personalize(
    personal_weights: &[f64],
    core_models: &[ParamVector],
) -> Result<ParamVector> {
    if personal_weights.len() != core_models.len() {
        return Err(Error::Config(format!(
            "{} personal weights for {} core models",
            personal_weights.len(),
            core_models.len()
        )));
    }
    let dim = core_models
        .first()
        .map(ParamVector::len)
        .ok_or_else(|| Error::Input("apple_personalize with no core models".into()))?;
    let mut w = ParamVector::zeros(dim);
    for (&p, c) in personal_weights.iter().zip(core_models) {
        if c.len() != dim {
            return Err(Error::Config("ragged core model lengths".into()));
        }
        w.add_scaled(c, p);
    }
    Ok(w)
}

/// Gradient of the personalization objective with respect to the weights:
/// `dL(w)/dp_j = <grad_w L(w), c_j> + 2 * lambda * (p_j - delta_ij)`.
pub fn apple_weight_gradient(
    spec: &ModelSpec,
    personal_weights: &[f64],
    core_models: &[ParamVector],
    self_index: usize,
    batch: &Dataset,
    lambda: f64,
) -> Result<Vec<f64>> {
    let w = apple_personalize(personal_weights, core_models)?;
    let (_, grad_w) = loss_and_gradient(spec, &w, batch)?;
    Ok(personal_weights
        .iter()
        .enumerate()
        .map(|(j, &p)| {
            let self_pull = if j == self_index { 1.0 } else { 0.0 };
            grad_w.dot(&core_models[j]) + 2.0 * lambda * (p - self_pull)
        })
        .collect())
}

/// What a client hands back from one round of local work.
#[derive(Debug, Clone)]
pub struct LocalOutcome {
    pub update: ParamVector,
    /// Mean training loss over the batches this round; falls back to the
    /// evaluated loss when no batch ran (zero epochs).
    pub mean_loss: Option<f64>,
    /// Set when the client skipped training (empty shard) and returned the
    /// start model unchanged.
    pub empty_shard: bool,
}

/// Per-round context for the personalization weight updates.
pub struct AppleRound<'a> {
    pub cores: &'a [ParamVector],
    pub eta_p: f64,
    pub lambda: f64,
}

/// Local training: minibatch optimization from `start_model` on the client's
/// shard. In personalized mode each batch also takes one SGD step on the
/// client's combination weights. Deterministic given `(state, seed, round)`.
#[allow(clippy::too_many_arguments)]
pub fn local_train(
    client: &mut ClientState,
    start_model: &ParamVector,
    spec: &ModelSpec,
    epochs: usize,
    batch_size: usize,
    round: u64,
    master_seed: u64,
    apple: Option<&AppleRound<'_>>,
) -> Result<LocalOutcome> {
    if client.shard.is_empty() {
        return Ok(LocalOutcome {
            update: start_model.clone(),
            mean_loss: None,
            empty_shard: true,
        });
    }
    let mut model = start_model.clone();
    let mut rng = seeded_rng(
        master_seed,
        derive_stream_id(&[CLIENT_TRAIN_DOMAIN, round, client.client_id as u64]),
    );
    let batch_size = batch_size.max(1);
    let mut losses = Vec::new();
    let mut order: Vec<usize> = (0..client.shard.len()).collect();
    for _epoch in 0..epochs {
        for i in (1..order.len()).rev() {
            use rand::Rng;
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        for chunk in order.chunks(batch_size) {
            let batch = client.shard.gather(chunk);
            let (loss, grad) = loss_and_gradient(spec, &model, &batch)?;
            model = client.optimizer.step(&model, &grad)?;
            losses.push(loss);
            if let Some(ctx) = apple {
                let grad_p = apple_weight_gradient(
                    spec,
                    &client.personal_weights,
                    ctx.cores,
                    client.client_id,
                    &batch,
                    ctx.lambda,
                )?;
                for (p, g) in client.personal_weights.iter_mut().zip(&grad_p) {
                    *p -= ctx.eta_p * g;
                }
            }
        }
    }
    let mean_loss = if losses.is_empty() {
        Some(model_loss(spec, &model, &client.shard)?)
    } else {
        Some(losses.iter().sum::<f64>() / losses.len() as f64)
    };
    Ok(LocalOutcome {
        update: model,
        mean_loss,
        empty_shard: false,
    })
}

/// Global and personalized evaluation at one point in time.
#[derive(Debug, Clone, Copy)]
pub struct EvalReport {
    pub global: MetricsReport,
    pub mean_personal_accuracy: f64,
}

/// One experiment instance: mechanism state, server, clients, and the pooled
/// held-out set.
pub struct Federation {
    cfg: FederationConfig,
    mechanism: MechanismContext,
    server: ServerState,
    clients: Vec<ClientState>,
    global_test: Dataset,
}

impl Federation {
    /// Build clients from data shards (80/20 train/test split per shard,
    /// fixed by the master seed) and validate the whole configuration.
    pub fn new(cfg: FederationConfig, shards: Vec<Dataset>) -> Result<Self> {
        cfg.model.validate()?;
        if shards.is_empty() {
            return Err(Error::Config("no client shards".into()));
        }
        if cfg.learning_rate <= 0.0 {
            return Err(Error::Config(format!(
                "learning rate must be > 0, got {}",
                cfg.learning_rate
            )));
        }
        let n = shards.len();
        let mechanism = MechanismContext::new(cfg.privacy.clone(), n, cfg.master_seed)?;
        let dim = cfg.model.param_count();
        let clients: Vec<ClientState> = shards
            .into_iter()
            .enumerate()
            .map(|(client_id, shard)| {
                let mut split_rng = seeded_rng(
                    cfg.master_seed,
                    derive_stream_id(&[SPLIT_DOMAIN, client_id as u64]),
                );
                let (train, test) = shard.split_train_test(TEST_FRACTION, &mut split_rng);
                ClientState {
                    client_id,
                    shard: train,
                    test_shard: test,
                    core_model: ParamVector::zeros(dim),
                    personal_weights: vec![1.0 / n as f64; n],
                    optimizer: OptimizerState::new(cfg.optimizer, cfg.learning_rate, dim),
                }
            })
            .collect();
        let global_test = concat_datasets(clients.iter().map(|c| &c.test_shard))?;
        let roster = (0..n).collect();
        Ok(Federation {
            cfg,
            mechanism,
            server: ServerState {
                global_model: ParamVector::zeros(dim),
                round_index: 0,
                roster,
            },
            clients,
            global_test,
        })
    }

    pub fn server(&self) -> &ServerState {
        &self.server
    }

    pub fn clients(&self) -> &[ClientState] {
        &self.clients
    }

    pub fn config(&self) -> &FederationConfig {
        &self.cfg
    }

    /// Execute one full round: broadcast, local training, protected upload,
    /// timed server aggregation, authority recovery, evaluation.
    pub fn run_round(&mut self) -> Result<RoundRecord> {
        let round = self.server.round_index;
        let n = self.clients.len();
        let roster = self.server.roster.clone();
        let spec = self.cfg.model;
        let apple_mode = self.cfg.aggregation == AggregationMode::Apple;

        // Broadcast: the global model (FedAvg) or every core model
        // (personalized mode, cross-silo).
        let cores_snapshot: Vec<ParamVector> =
            self.clients.iter().map(|c| c.core_model.clone()).collect();
        let model_wire_bytes = PrivacyEnvelope::Plain(self.server.global_model.clone())
            .byte_size(self.mechanism.ring());
        let bytes_down = if apple_mode {
            (n as u64) * (n as u64) * model_wire_bytes as u64
        } else {
            (n as u64) * model_wire_bytes as u64
        };

        let apple_ctx = AppleRound {
            cores: &cores_snapshot,
            eta_p: self.cfg.eta_p,
            lambda: self.cfg.lambda,
        };
        let global_model = self.server.global_model.clone();
        let epochs = self.cfg.local_epochs;
        let batch_size = self.cfg.batch_size;
        let master_seed = self.cfg.master_seed;
        let mechanism = &self.mechanism;
        // With weighting on, uploads are pre-scaled so the server's plain
        // mean (through any mechanism) equals the sample-size-weighted mean.
        let total_examples: usize = self.clients.iter().map(|c| c.shard.len()).sum();
        let weight_for = move |shard_len: usize| -> f64 {
            if total_examples == 0 {
                1.0
            } else {
                shard_len as f64 * n as f64 / total_examples as f64
            }
        };
        let weighted = self.cfg.weighted;

        let client_task = |client: &mut ClientState| -> Result<(Vec<u8>, Option<f64>)> {
            let start = if apple_mode {
                client.core_model.clone()
            } else {
                global_model.clone()
            };
            let apple = apple_mode.then_some(&apple_ctx);
            let outcome = local_train(
                client,
                &start,
                &spec,
                epochs,
                batch_size,
                round,
                master_seed,
                apple,
            )?;
            client.core_model = outcome.update.clone();
            let mut upload = outcome.update;
            if weighted {
                upload.scale(weight_for(client.shard.len()));
            }
            let envelope =
                mechanism.protect(&upload, client.client_id, &roster, round, master_seed)?;
            Ok((envelope.to_wire(mechanism.ring()), outcome.mean_loss))
        };

        type ClientResult = Result<(Vec<u8>, Option<f64>)>;
        let results: Vec<(Vec<u8>, Option<f64>)> = if self.cfg.parallel {
            let mut slots: Vec<Option<ClientResult>> = (0..n).map(|_| None).collect();
            std::thread::scope(|scope| {
                for (client, slot) in self.clients.iter_mut().zip(slots.iter_mut()) {
                    scope.spawn(|| *slot = Some(client_task(client)));
                }
            });
            // Fold in ascending client id regardless of completion order.
            slots
                .into_iter()
                .map(|s| s.expect("every client task ran"))
                .collect::<Result<Vec<_>>>()?
        } else {
            let mut out = Vec::with_capacity(n);
            for client in self.clients.iter_mut() {
                out.push(client_task(client)?);
            }
            out
        };

        let mut bytes_up = 0u64;
        let mut wires = Vec::with_capacity(n);
        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;
        for (wire, loss) in results {
            bytes_up += wire.len() as u64;
            wires.push(wire);
            if let Some(l) = loss {
                loss_sum += l;
                loss_count += 1;
            }
        }
        let mean_loss = if loss_count > 0 {
            loss_sum / loss_count as f64
        } else {
            0.0
        };

        // Server stage: decode and aggregate the protected updates. This is
        // the block the server clock measures.
        let started = Instant::now();
        let aggregate = self.mechanism.server_aggregate(&wires, &roster, round)?;
        let server_ms = started.elapsed().as_secs_f64() * 1e3;

        // Key-authority recovery (plain passthrough except HE).
        let mean = self.mechanism.recover(aggregate, n)?;
        if !mean.all_finite() {
            return Err(Error::mechanism(
                "aggregate",
                None,
                "non-finite coordinate in aggregated model",
            ));
        }
        self.server.global_model = mean;
        self.server.round_index += 1;

        let eval = self.evaluate()?;
        Ok(RoundRecord {
            round_index: round,
            global_accuracy: eval.global.accuracy,
            global_precision: eval.global.precision,
            global_recall: eval.global.recall,
            global_f1: eval.global.f1,
            mean_personal_accuracy: eval.mean_personal_accuracy,
            mean_loss,
            server_ms,
            bytes_up,
            bytes_down,
        })
    }

    /// Metrics of the current global model on the pooled held-out set, plus
    /// the mean per-client accuracy of the personalized models on their own
    /// held-out shards. In FedAvg mode the "personalized" model is the
    /// client's latest local model.
    pub fn evaluate(&self) -> Result<EvalReport> {
        let spec = &self.cfg.model;
        let global = if self.global_test.is_empty() {
            MetricsReport {
                accuracy: 0.0,
                precision: 0.0,
                recall: 0.0,
                f1: 0.0,
            }
        } else {
            let preds = predict(spec, &self.server.global_model, self.global_test.features())?;
            evaluate_metrics(
                &preds,
                self.global_test.labels(),
                spec.num_classes,
                Averaging::Macro,
            )?
        };
        let cores: Vec<ParamVector> = self.clients.iter().map(|c| c.core_model.clone()).collect();
        let mut acc_sum = 0.0;
        let mut acc_count = 0usize;
        for client in &self.clients {
            if client.test_shard.is_empty() {
                continue;
            }
            let personal = match self.cfg.aggregation {
                AggregationMode::Apple => apple_personalize(&client.personal_weights, &cores)?,
                AggregationMode::FedAvg => client.core_model.clone(),
            };
            let preds = predict(spec, &personal, client.test_shard.features())?;
            let correct = preds
                .iter()
                .zip(client.test_shard.labels())
                .filter(|(p, t)| p == t)
                .count();
            acc_sum += correct as f64 / client.test_shard.len() as f64;
            acc_count += 1;
        }
        Ok(EvalReport {
            global,
            mean_personal_accuracy: if acc_count > 0 {
                acc_sum / acc_count as f64
            } else {
                0.0
            },
        })
    }

    /// Run `rounds` rounds; records are emitted every `eval_interval` rounds
    /// (and for the final round). The callback sees each emitted record as it
    /// is produced so output can be flushed incrementally.
    pub fn run(
        &mut self,
        rounds: usize,
        eval_interval: usize,
        mut on_record: impl FnMut(&RoundRecord) -> Result<()>,
    ) -> Result<Vec<RoundRecord>> {
        let eval_interval = eval_interval.max(1);
        let mut records = Vec::new();
        for r in 0..rounds {
            let record = self.run_round()?;
            if (r + 1) % eval_interval == 0 || r + 1 == rounds {
                on_record(&record)?;
                records.push(record);
            }
        }
        Ok(records)
    }
}

fn concat_datasets<'a>(datasets: impl Iterator<Item = &'a Dataset>) -> Result<Dataset> {
    let datasets: Vec<&Dataset> = datasets.collect();
    let num_classes = datasets
        .iter()
        .map(|d| d.num_classes())
        .max()
        .ok_or_else(|| Error::Input("concat of no datasets".into()))?;
    let cols = datasets
        .iter()
        .find(|d| !d.is_empty())
        .map(|d| d.input_dim())
        .unwrap_or(0);
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for d in datasets {
        data.extend_from_slice(d.features().data());
        labels.extend_from_slice(d.labels());
    }
    Dataset::new(
        crate::model::Matrix::from_vec(labels.len(), cols, data),
        labels,
        num_classes,
    )
}

#[cfg(test)]
mod tests;
