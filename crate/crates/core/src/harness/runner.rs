//! Experiment execution: data preparation, the round loop, and CSV output.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use super::csv::{
    round_record_line, summary_row_line, to_percent, CsvWriter, SummaryRow, ROUNDS_HEADER,
    SUMMARY_HEADER,
};
use super::{DatasetSource, ExperimentConfig};
use crate::error::Result;
use crate::federation::{Federation, FederationConfig, RoundRecord};
use crate::model::{
    dirichlet_partition, generate_synthetic, load_csv_dataset, Dataset, ModelKind, ModelSpec,
};

/// Everything one experiment produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Records for the evaluated rounds (the rows of rounds.csv).
    pub records: Vec<RoundRecord>,
    pub summary: SummaryRow,
    /// Shard sizes after partitioning; zero-size entries mark clients that
    /// received an empty shard.
    pub shard_sizes: Vec<usize>,
}

fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    match &cfg.dataset {
        DatasetSource::Synthetic {
            examples,
            input_dim,
            classes,
        } => generate_synthetic(*examples, *input_dim, *classes, cfg.master_seed),
        DatasetSource::Csv(path) => load_csv_dataset(path),
    }
}

fn model_spec_for(cfg: &ExperimentConfig, data: &Dataset) -> ModelSpec {
    match cfg.model {
        ModelKind::Logistic => ModelSpec::logistic(data.input_dim(), data.num_classes()),
        ModelKind::Mlp => ModelSpec::mlp(data.input_dim(), cfg.hidden_dim, data.num_classes()),
    }
}

fn federation_config(cfg: &ExperimentConfig, spec: ModelSpec) -> FederationConfig {
    FederationConfig {
        model: spec,
        optimizer: cfg.optimizer,
        learning_rate: cfg.learning_rate,
        local_epochs: cfg.local_epochs,
        batch_size: cfg.batch_size,
        aggregation: cfg.aggregation,
        eta_p: cfg.eta_p,
        lambda: cfg.lambda,
        privacy: cfg.privacy.clone(),
        master_seed: cfg.master_seed,
        weighted: cfg.weighted,
        parallel: cfg.parallel,
    }
}

/// Run one experiment: R rounds with evaluation every `eval_every` rounds.
/// Writes `rounds.csv` (streamed, one row per evaluated round) and
/// `summary.csv` under the configured output directory.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let rounds_path = cfg.out_dir.join("rounds.csv");
    let mut rounds_csv =
        CsvWriter::new(BufWriter::new(File::create(&rounds_path)?), ROUNDS_HEADER)?;
    let output = run_with(cfg, cfg.num_clients, &mut |record| {
        rounds_csv.write_line(&round_record_line(record))
    })?;
    let mut summary_csv = CsvWriter::new(
        BufWriter::new(File::create(cfg.out_dir.join("summary.csv"))?),
        SUMMARY_HEADER,
    )?;
    summary_csv.write_line(&summary_row_line(&output.summary))?;
    Ok(output)
}

/// Run the configured experiment once per client count, collecting one
/// summary row each into a single summary.csv.
pub fn sweep(cfg: &ExperimentConfig, client_counts: &[usize]) -> Result<Vec<RunOutput>> {
    cfg.validate()?;
    if client_counts.is_empty() {
        return Err(crate::error::Error::Config(
            "sweep needs a non-empty client count list".into(),
        ));
    }
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut summary_csv = CsvWriter::new(
        BufWriter::new(File::create(cfg.out_dir.join("summary.csv"))?),
        SUMMARY_HEADER,
    )?;
    let mut outputs = Vec::with_capacity(client_counts.len());
    for &n in client_counts {
        let mut sub = cfg.clone();
        sub.num_clients = n;
        sub.validate()?;
        let output = run_with(&sub, n, &mut |_| Ok(()))?;
        summary_csv.write_line(&summary_row_line(&output.summary))?;
        outputs.push(output);
    }
    Ok(outputs)
}

/// Shared core of [`run`] and [`sweep`]: build the federation, loop rounds,
/// stream evaluated records to `on_record`, and produce the summary from the
/// final state.
fn run_with(
    cfg: &ExperimentConfig,
    num_clients: usize,
    on_record: &mut dyn FnMut(&RoundRecord) -> Result<()>,
) -> Result<RunOutput> {
    let data = load_dataset(cfg)?;
    let shards = dirichlet_partition(&data, num_clients, cfg.alpha, cfg.master_seed)?;
    let shard_sizes: Vec<usize> = shards.iter().map(Dataset::len).collect();
    let spec = model_spec_for(cfg, &data);
    let mut federation = Federation::new(federation_config(cfg, spec), shards)?;

    let mut records = Vec::new();
    let mut total_server_ms = 0.0;
    let mut total_bytes = 0u64;
    for r in 0..cfg.rounds {
        let record = federation.run_round()?;
        total_server_ms += record.server_ms;
        total_bytes += record.bytes_up + record.bytes_down;
        if (r + 1) % cfg.eval_every == 0 || r + 1 == cfg.rounds {
            on_record(&record)?;
            records.push(record);
        }
    }

    // Summary metrics come from the final state so a zero-round run still
    // reports the untrained model.
    let eval = federation.evaluate()?;
    let summary = SummaryRow {
        mechanism: cfg.privacy.mechanism.name().to_string(),
        aggregation: cfg.aggregation.name().to_string(),
        clients: num_clients,
        acc_pct: to_percent(eval.global.accuracy),
        prec_pct: to_percent(eval.global.precision),
        rec_pct: to_percent(eval.global.recall),
        f1_pct: to_percent(eval.global.f1),
        total_server_ms,
        per_round_server_ms: if cfg.rounds > 0 {
            total_server_ms / cfg.rounds as f64
        } else {
            0.0
        },
        total_bytes,
    };
    Ok(RunOutput {
        records,
        summary,
        shard_sizes,
    })
}

/// Read a CSV produced by this module back into cells (testing aid).
pub fn read_csv(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect())
}
