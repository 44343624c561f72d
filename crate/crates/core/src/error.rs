use thiserror::Error;

/// Errors surfaced by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (bad dimensions, parameter bounds, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Invalid runtime input (empty batch, ragged lengths, ...).
    #[error("input error: {0}")]
    Input(String),

    /// Malformed input file; `row` is the 1-based line number.
    #[error("parse error at row {row}: {detail}")]
    Parse { row: usize, detail: String },

    /// A privacy mechanism failed mid-round.
    #[error("mechanism error at stage {stage}{}: {detail}", fmt_client(.client))]
    Mechanism {
        stage: &'static str,
        client: Option<usize>,
        detail: String,
    },

    /// Modular inverse does not exist (operand shares a factor with the modulus).
    #[error("no modular inverse: gcd({a}, {modulus}) != 1")]
    NoInverse { a: String, modulus: String },

    /// Protocol violation (missing roster member, wrong party count, ...).
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn fmt_client(client: &Option<usize>) -> String {
    match client {
        Some(id) => format!(" (client {id})"),
        None => String::new(),
    }
}

impl Error {
    pub fn mechanism(
        stage: &'static str,
        client: Option<usize>,
        detail: impl Into<String>,
    ) -> Self {
        Error::Mechanism {
            stage,
            client,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
