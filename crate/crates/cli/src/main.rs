//! Command-line harness: single runs and client-count sweeps, config file +
//! flag overrides, CSV output.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime/protocol error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use privfed::harness::{config_file, runner};
use privfed::{Error, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(
    name = "privfed",
    about = "Privacy-preserving personalized federated learning simulator",
    version
)]
struct Args {
    /// Optional key=value config file; flags override file values.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Number of federated clients.
    #[arg(long)]
    clients: Option<usize>,

    /// Federated rounds to run (0 evaluates the untrained model).
    #[arg(long)]
    rounds: Option<usize>,

    /// Local epochs per round.
    #[arg(long)]
    epochs: Option<usize>,

    /// Minibatch size for local training.
    #[arg(long = "batch-size")]
    batch_size: Option<usize>,

    /// Model architecture: logistic | mlp.
    #[arg(long)]
    model: Option<String>,

    /// Hidden width for the mlp model.
    #[arg(long = "hidden-dim")]
    hidden_dim: Option<usize>,

    /// Optimizer learning rate.
    #[arg(long)]
    lr: Option<f64>,

    /// Data source: synthetic | csv:<path>.
    #[arg(long)]
    dataset: Option<String>,

    /// Dirichlet concentration for the non-IID partition.
    #[arg(long)]
    alpha: Option<f64>,

    /// Aggregation mode: fedavg | apple.
    #[arg(long)]
    agg: Option<String>,

    /// Learning rate for the personalization weights.
    #[arg(long = "eta-p")]
    eta_p: Option<f64>,

    /// Self-pull regularization strength for personalization weights.
    #[arg(long)]
    lambda: Option<f64>,

    /// Privacy mechanism: none | dp | he | sa | smpc.
    #[arg(long)]
    mechanism: Option<String>,

    /// DP privacy budget per round.
    #[arg(long)]
    epsilon: Option<f64>,

    /// DP clipping norm (sensitivity bound).
    #[arg(long)]
    clip: Option<f64>,

    /// DP noise distribution: laplace | gaussian.
    #[arg(long)]
    noise: Option<String>,

    /// Gaussian mechanism delta.
    #[arg(long)]
    delta: Option<f64>,

    /// Paillier modulus bits (min 256).
    #[arg(long = "key-bits")]
    key_bits: Option<u64>,

    /// Fixed-point fractional bits.
    #[arg(long = "scale-bits")]
    scale_bits: Option<u32>,

    /// SMPC compute parties (min 2); defaults to every client being a party.
    #[arg(long)]
    parties: Option<usize>,

    /// Master seed; every random stream derives from it.
    #[arg(long)]
    seed: Option<u64>,

    /// Evaluate (and emit a CSV row) every this many rounds.
    #[arg(long = "eval-every")]
    eval_every: Option<usize>,

    /// Output directory for rounds.csv and summary.csv.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Comma-separated client counts; runs one experiment per count.
    #[arg(long = "sweep-clients", value_name = "LIST")]
    sweep_clients: Option<String>,

    /// Train clients on threads (traces stay identical to serial runs).
    #[arg(long)]
    parallel: bool,
}

fn build_config(args: &Args) -> privfed::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &args.config {
        config_file::apply_config_file(&mut cfg, path)?;
    }
    if let Some(v) = args.clients {
        cfg.num_clients = v;
    }
    if let Some(v) = args.rounds {
        cfg.rounds = v;
    }
    if let Some(v) = args.epochs {
        cfg.local_epochs = v;
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = &args.model {
        config_file::set_key(&mut cfg, "model", v)?;
    }
    if let Some(v) = args.hidden_dim {
        cfg.hidden_dim = v;
    }
    if let Some(v) = args.lr {
        cfg.learning_rate = v;
    }
    if let Some(v) = &args.dataset {
        cfg.dataset = config_file::parse_dataset(v, &cfg.dataset)?;
    }
    if let Some(v) = args.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = &args.agg {
        cfg.aggregation = v.parse()?;
    }
    if let Some(v) = args.eta_p {
        cfg.eta_p = v;
    }
    if let Some(v) = args.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = &args.mechanism {
        cfg.privacy.mechanism = v.parse()?;
    }
    if let Some(v) = args.epsilon {
        cfg.privacy.epsilon = v;
    }
    if let Some(v) = args.clip {
        cfg.privacy.clip_norm = v;
    }
    if let Some(v) = &args.noise {
        cfg.privacy.noise = v.parse()?;
    }
    if let Some(v) = args.delta {
        cfg.privacy.delta = v;
    }
    if let Some(v) = args.key_bits {
        cfg.privacy.key_bits = v;
    }
    if let Some(v) = args.scale_bits {
        cfg.privacy.scale_bits = v;
    }
    if let Some(v) = args.parties {
        cfg.privacy.num_parties = Some(v);
    }
    if let Some(v) = args.seed {
        cfg.master_seed = v;
    }
    if let Some(v) = args.eval_every {
        cfg.eval_every = v;
    }
    if let Some(v) = &args.out {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = &args.sweep_clients {
        cfg.sweep_clients = Some(config_file::parse_client_list(v)?);
    }
    if args.parallel {
        cfg.parallel = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report_shards(sizes: &[usize]) {
    let rendered: Vec<String> = sizes.iter().map(usize::to_string).collect();
    println!("shard sizes: [{}]", rendered.join(", "));
    for (client, &size) in sizes.iter().enumerate() {
        if size == 0 {
            println!("warning: client {client} received an empty shard");
        }
    }
}

fn execute(cfg: &ExperimentConfig) -> privfed::Result<()> {
    print!("{}", cfg.to_kv_string());
    if let Some(counts) = cfg.sweep_clients.clone() {
        let outputs = runner::sweep(cfg, &counts)?;
        for out in &outputs {
            report_shards(&out.shard_sizes);
            let s = &out.summary;
            println!(
                "{} clients={}: acc {}% prec {}% rec {}% f1 {}% ({:.3} ms/round server)",
                s.mechanism,
                s.clients,
                s.acc_pct,
                s.prec_pct,
                s.rec_pct,
                s.f1_pct,
                s.per_round_server_ms
            );
        }
        println!("wrote {}", cfg.out_dir.join("summary.csv").display());
    } else {
        let out = runner::run(cfg)?;
        report_shards(&out.shard_sizes);
        let s = &out.summary;
        println!(
            "{} {} clients={}: acc {}% prec {}% rec {}% f1 {}% ({:.3} ms/round server, {} bytes)",
            s.mechanism,
            s.aggregation,
            s.clients,
            s.acc_pct,
            s.prec_pct,
            s.rec_pct,
            s.f1_pct,
            s.per_round_server_ms,
            s.total_bytes
        );
        println!(
            "wrote {} and {}",
            cfg.out_dir.join("rounds.csv").display(),
            cfg.out_dir.join("summary.csv").display()
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match build_config(&args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    match execute(&cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ (Error::Config(_) | Error::Parse { .. })) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("run failed: {e}");
            ExitCode::from(3)
        }
    }
}
