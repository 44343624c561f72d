//! CSV emission. Column sets and ordering are fixed; every numeric cell is
//! written in shortest round-trip form, so parsing a cell back yields the
//! in-memory value exactly. Percent cells hold values already rounded to two
//! decimals.

use std::io::Write;

use crate::error::Result;
use crate::federation::RoundRecord;

pub const ROUNDS_HEADER: &str = "round,global_acc,global_prec,global_rec,global_f1,\
mean_personal_acc,mean_loss,server_ms,bytes_up,bytes_down";

pub const SUMMARY_HEADER: &str = "mechanism,agg,clients,acc_pct,prec_pct,rec_pct,f1_pct,\
total_server_ms,per_round_server_ms,total_bytes";

/// One per-run summary line.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub mechanism: String,
    pub aggregation: String,
    pub clients: usize,
    pub acc_pct: f64,
    pub prec_pct: f64,
    pub rec_pct: f64,
    pub f1_pct: f64,
    pub total_server_ms: f64,
    pub per_round_server_ms: f64,
    pub total_bytes: u64,
}

/// Fraction in [0, 1] to a percentage rounded to two decimals.
pub fn to_percent(fraction: f64) -> f64 {
    (fraction * 10_000.0).round() / 100.0
}

pub fn round_record_line(r: &RoundRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        r.round_index,
        r.global_accuracy,
        r.global_precision,
        r.global_recall,
        r.global_f1,
        r.mean_personal_accuracy,
        r.mean_loss,
        r.server_ms,
        r.bytes_up,
        r.bytes_down
    )
}

pub fn summary_row_line(s: &SummaryRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        s.mechanism,
        s.aggregation,
        s.clients,
        s.acc_pct,
        s.prec_pct,
        s.rec_pct,
        s.f1_pct,
        s.total_server_ms,
        s.per_round_server_ms,
        s.total_bytes
    )
}

/// Incremental CSV writer that flushes after every row, so a run aborted by a
/// mechanism error leaves the rows produced so far on disk.
pub struct CsvWriter<W: Write> {
    inner: W,
}

impl<W: Write> CsvWriter<W> {
    pub fn new(mut inner: W, header: &str) -> Result<Self> {
        writeln!(inner, "{header}")?;
        inner.flush()?;
        Ok(CsvWriter { inner })
    }

    pub fn write_line(&mut self, line: &str) -> Result<()> {
        writeln!(self.inner, "{line}")?;
        self.inner.flush()?;
        Ok(())
    }
}
