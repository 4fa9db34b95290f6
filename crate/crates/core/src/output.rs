//! CSV and JSON files for runs and sweeps. Agent and hypothesis ids are
//! one-based; belief columns hold natural logs.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

use crate::event::BroadcastEvent;
use crate::quant::QuantMessage;
use crate::run::{RunOutput, SweepReport};
use crate::trace::BeliefTrace;

fn csv_error(e: csv::Error) -> io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::other(format!("{other:?}")),
    }
}

#[derive(Serialize)]
struct BeliefRow {
    t: u64,
    agent: usize,
    theta_index: usize,
    log_mu: f64,
    log_pi: f64,
    log_mubar: f64,
}

#[derive(Serialize)]
struct EventRow {
    t: u64,
    sender: usize,
    receiver: usize,
    theta_index: usize,
    value: f64,
}

#[derive(Serialize)]
struct MessageRow {
    t: u64,
    sender: usize,
    theta_index: usize,
    #[serde(rename = "J")]
    j: u64,
    #[serde(rename = "B")]
    b: u32,
    q_new: f64,
}

fn write_rows<T, I>(path: &Path, rows: I, header: &[&str]) -> io::Result<()>
where
    T: Serialize,
    I: IntoIterator<Item = T>,
{
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(csv_error)?;
    w.write_record(header).map_err(csv_error)?;
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush()
}

pub fn write_beliefs(path: &Path, trace: &BeliefTrace) -> io::Result<()> {
    let rows = trace.snapshots().iter().flat_map(|snap| {
        snap.states.iter().enumerate().flat_map(move |(i, s)| {
            (0..s.log_mu.len()).map(move |th| BeliefRow {
                t: snap.t,
                agent: i + 1,
                theta_index: th + 1,
                log_mu: s.log_mu[th],
                log_pi: s.log_pi[th],
                log_mubar: s.log_mubar[th],
            })
        })
    });
    write_rows(path, rows, &["t", "agent", "theta_index", "log_mu", "log_pi", "log_mubar"])
}

pub fn write_events(path: &Path, events: &[BroadcastEvent]) -> io::Result<()> {
    let rows = events.iter().map(|e| EventRow {
        t: e.t,
        sender: e.sender + 1,
        receiver: e.receiver + 1,
        theta_index: e.theta + 1,
        value: e.log_value,
    });
    write_rows(path, rows, &["t", "sender", "receiver", "theta_index", "value"])
}

pub fn write_messages(path: &Path, messages: &[QuantMessage]) -> io::Result<()> {
    let rows = messages.iter().map(|m| MessageRow {
        t: m.t,
        sender: m.sender + 1,
        theta_index: m.theta + 1,
        j: m.bin.get(),
        b: m.bin.bits(),
        q_new: m.log_q_new,
    });
    write_rows(path, rows, &["t", "sender", "theta_index", "J", "B", "q_new"])
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

/// Writes `summary.json` and, when `logs` is set, the belief trace plus the
/// event or message log the protocol produced.
pub fn write_run(dir: &Path, out: &RunOutput, logs: bool) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join("summary.json"), &out.summary)?;
    if logs {
        write_beliefs(&dir.join("beliefs.csv"), &out.trace)?;
        if out.messages.is_empty() {
            write_events(&dir.join("events.csv"), &out.events)?;
        } else {
            write_messages(&dir.join("messages.csv"), &out.messages)?;
        }
    }
    Ok(())
}

/// Directory for one seed of a sweep.
pub fn seed_dir(dir: &Path, seed: u64) -> std::path::PathBuf {
    dir.join(format!("seed-{seed}"))
}

pub fn write_sweep(dir: &Path, report: &SweepReport) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join("aggregate.json"), &report.aggregate)
}
