//! Line-delimited episode traces.
//!
//! One file per episode: a header line, one line per step, a result line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{Exchange, Tier};
use crate::env::Status;
use crate::orchestrator::{Arm, EpisodeResult, MonitorPlan, SwitchDecision};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace io: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("trace structure: {0}")]
    Structure(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub episode_id: String,
    pub task_id: String,
    pub arm: Arm,
    pub pack_id: String,
    pub pack_version: String,
    pub pack_hash: String,
    pub template_version: u32,
    pub plan: MonitorPlan,
    pub plan_fallback: bool,
    pub device: String,
    pub cloud: String,
    pub seed: u64,
    pub window: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub episode_id: String,
    pub t: usize,
    pub tier: Tier,
    pub backend: String,
    pub raw: String,
    /// Canonical call text, or the raw call text when it did not parse.
    pub action: String,
    pub parsed: bool,
    pub k: u8,
    pub c: usize,
    pub out_of_order: bool,
    pub screen_before: String,
    pub screen_after: String,
    pub state_digest: String,
    pub monitor_fired: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<SwitchDecision>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_error: Option<String>,
    pub ineffective: bool,
    pub retries: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exchange: Option<Exchange>,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceResult {
    pub result: EpisodeResult,
    pub status: Status,
    pub final_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TraceLine {
    Header(TraceHeader),
    Step(TraceEvent),
    Result(TraceResult),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub header: TraceHeader,
    pub events: Vec<TraceEvent>,
    pub result: TraceResult,
}

fn line(l: &TraceLine) -> String {
    serde_json::to_string(l).expect("trace line serializes")
}

impl EpisodeTrace {
    pub fn to_jsonl(&self) -> String {
        let mut out = line(&TraceLine::Header(self.header.clone()));
        out.push('\n');
        for e in &self.events {
            out.push_str(&line(&TraceLine::Step(e.clone())));
            out.push('\n');
        }
        out.push_str(&line(&TraceLine::Result(self.result.clone())));
        out.push('\n');
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, TraceError> {
        let mut header = None;
        let mut events = Vec::new();
        let mut result = None;
        for (i, raw) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let parsed: TraceLine =
                serde_json::from_str(raw).map_err(|source| TraceError::Json { line: i + 1, source })?;
            match parsed {
                TraceLine::Header(h) if header.is_none() && events.is_empty() => header = Some(h),
                TraceLine::Step(e) if header.is_some() && result.is_none() => {
                    if e.t != events.len() {
                        return Err(TraceError::Structure(format!("line {}: step {} out of order", i + 1, e.t)));
                    }
                    events.push(e)
                }
                TraceLine::Result(r) if header.is_some() && result.is_none() => result = Some(r),
                _ => return Err(TraceError::Structure(format!("line {}: unexpected record", i + 1))),
            }
        }
        Ok(EpisodeTrace {
            header: header.ok_or_else(|| TraceError::Structure("missing header".into()))?,
            events,
            result: result.ok_or_else(|| TraceError::Structure("missing result".into()))?,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, TraceError> {
        let mut text = String::new();
        for l in BufReader::new(File::open(path)?).lines() {
            text.push_str(&l?);
            text.push('\n');
        }
        Self::from_jsonl(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), TraceError> {
        let mut w = TraceWriter::create(path, &self.header)?;
        for e in &self.events {
            w.record(e)?;
        }
        w.flush(&self.result)
    }
}

/// Append-only writer for one episode file.
pub struct TraceWriter {
    out: BufWriter<File>,
    next_t: usize,
}

impl TraceWriter {
    pub fn create(path: impl AsRef<Path>, header: &TraceHeader) -> Result<Self, TraceError> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{}", line(&TraceLine::Header(header.clone())))?;
        Ok(TraceWriter { out, next_t: 0 })
    }

    pub fn record(&mut self, event: &TraceEvent) -> Result<(), TraceError> {
        if event.t != self.next_t {
            return Err(TraceError::Structure(format!("expected step {}, got {}", self.next_t, event.t)));
        }
        self.next_t += 1;
        writeln!(self.out, "{}", line(&TraceLine::Step(event.clone())))?;
        Ok(())
    }

    pub fn flush(mut self, result: &TraceResult) -> Result<(), TraceError> {
        writeln!(self.out, "{}", line(&TraceLine::Result(result.clone())))?;
        self.out.flush()?;
        Ok(())
    }
}
