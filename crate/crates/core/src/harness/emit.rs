//! CSV and JSON result files.
//!
//! Floats are written in scientific notation with 17 significant digits, so
//! every value reads back bit-exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::sweep::SweepRow;
use super::TrialRecord;
use crate::error::{Error, Result};
use crate::geometry::ChannelDumpEntry;

pub const TRIALS_HEADER: [&str; 17] = [
    "trial",
    "seed",
    "mode",
    "sweep_value",
    "status",
    "objective_bits",
    "outer_iterations",
    "converged",
    "max_residual",
    "kkt_residual",
    "tau_s",
    "y_j",
    "p_w",
    "f_hz",
    "r_loc_bits",
    "r_off_bits",
    "error",
];

pub const SWEEP_HEADER: [&str; 9] = [
    "parameter",
    "value",
    "mode",
    "trials",
    "failed",
    "mean_objective_bits",
    "std_objective_bits",
    "mean_outer_iterations",
    "converged_fraction",
];

pub const TRACE_HEADER: [&str; 4] = ["iteration", "objective_bits", "raw_objective_bits", "relative_change"];

pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => io_err(path, source),
        other => Error::Format {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

fn csv_into<W, I>(out: W, header: &[&str], rows: I) -> csv::Result<W>
where
    W: Write,
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    w.into_inner().map_err(|e| e.into_error().into())
}

fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = csv_into(BufWriter::new(file), header, rows).map_err(|e| csv_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}

fn joined(values: impl Iterator<Item = f64>) -> String {
    values.map(fmt_float).collect::<Vec<_>>().join(";")
}

/// One row per record. Per-user columns hold `;`-separated values in user
/// order.
pub fn write_trials_csv(path: &Path, records: &[TrialRecord]) -> Result<()> {
    write_csv(
        path,
        &TRIALS_HEADER,
        records.iter().map(|r| {
            vec![
                r.trial.to_string(),
                r.seed.to_string(),
                r.mode.to_string(),
                r.sweep_value.map(fmt_float).unwrap_or_default(),
                if r.ok { "ok" } else { "failed" }.to_string(),
                fmt_float(r.objective_bits),
                r.outer_iterations.to_string(),
                r.converged.to_string(),
                fmt_float(r.max_residual),
                fmt_float(r.kkt_residual),
                joined(r.users.iter().map(|u| u.tau_s)),
                joined(r.users.iter().map(|u| u.y_j)),
                joined(r.users.iter().map(|u| u.p_w)),
                joined(r.users.iter().map(|u| u.f_hz)),
                joined(r.users.iter().map(|u| u.r_loc_bits)),
                joined(r.users.iter().map(|u| u.r_off_bits)),
                r.error.clone().unwrap_or_default(),
            ]
        }),
    )
}

fn sweep_rows(rows: &[SweepRow]) -> impl Iterator<Item = Vec<String>> + '_ {
    rows.iter().map(|r| {
        vec![
            r.parameter.map(|p| p.as_str().to_string()).unwrap_or_default(),
            r.value.map(fmt_float).unwrap_or_default(),
            r.mode.to_string(),
            r.trials.to_string(),
            r.failed.to_string(),
            fmt_float(r.mean_objective_bits),
            fmt_float(r.std_objective_bits),
            fmt_float(r.mean_outer_iterations),
            fmt_float(r.converged_fraction),
        ]
    })
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    write_csv(path, &SWEEP_HEADER, sweep_rows(rows))
}

/// The contents `write_sweep_csv` would write.
pub fn render_sweep_csv(rows: &[SweepRow]) -> String {
    let bytes = csv_into(Vec::new(), &SWEEP_HEADER, sweep_rows(rows)).expect("writing to memory cannot fail");
    String::from_utf8(bytes).expect("csv output is utf-8")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    /// Best objective so far.
    pub objective_bits: f64,
    pub raw_objective_bits: f64,
    /// Relative change of the raw objective from the previous round.
    pub relative_change: f64,
}

impl TraceRow {
    /// Rows for a best-so-far trace and the matching raw trace.
    pub fn from_traces(best: &[f64], raw: &[f64]) -> Vec<TraceRow> {
        best.iter()
            .zip(raw)
            .enumerate()
            .map(|(i, (&b, &r))| TraceRow {
                iteration: i,
                objective_bits: b,
                raw_objective_bits: r,
                relative_change: if i == 0 {
                    0.0
                } else {
                    (r - raw[i - 1]).abs() / raw[i - 1].abs().max(f64::MIN_POSITIVE)
                },
            })
            .collect()
    }
}

pub fn write_trace_csv(path: &Path, rows: &[TraceRow]) -> Result<()> {
    write_csv(
        path,
        &TRACE_HEADER,
        rows.iter().map(|r| {
            vec![
                r.iteration.to_string(),
                fmt_float(r.objective_bits),
                fmt_float(r.raw_objective_bits),
                fmt_float(r.relative_change),
            ]
        }),
    )
}

/// Everything a run produced, with the config it ran under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunDocument {
    pub version: String,
    pub command: String,
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub records: Vec<TrialRecord>,
    pub table: Vec<SweepRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceRow>,
    /// Channel realisation of a single-seed run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<Vec<ChannelDumpEntry>>,
}

impl RunDocument {
    pub fn new(command: &str, config: &ExperimentConfig, seeds: Vec<u64>) -> Self {
        RunDocument {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: config.clone(),
            seeds,
            records: Vec::new(),
            table: Vec::new(),
            trace: Vec::new(),
            channels: None,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

pub fn write_run_json(path: &Path, doc: &RunDocument) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, doc).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}
