//! Append-only JSON-lines event log with per-entry SHA-256 chaining.
//!
//! Each line is `{"event":…,"hash":…,"prev":…,"seq":N}` in canonical form.
//! The hash covers the previous entry's hash plus the canonical bytes of
//! `{event, seq}`, so a flipped bit anywhere breaks the chain on replay. The
//! log is flushed and synced before a mutation is acknowledged.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde_json::json;
use thiserror::Error;

use moltrust_core::canonical::{canonicalize, parse_canonical_text, to_canonical_json};
use moltrust_core::crypto::digest;

use crate::state::{RegistryEvent, RegistryState};

/// Hash of "nothing": the chain start.
const GENESIS: &str = "0000000000000000000000000000000000000000000000000000000000000000";

#[derive(Debug, Error)]
pub enum LogError {
    #[error("log io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt log at entry {seq}: {detail}")]
    CorruptLog { seq: u64, detail: String },
    #[error("log serialization: {0}")]
    Serde(String),
    #[error("replay produced inconsistent state: {0}")]
    InvalidEvent(String),
}

fn entry_hash(prev: &str, seq: u64, event: &RegistryEvent) -> Result<String, LogError> {
    let body = to_canonical_json(&json!({"event": event, "seq": seq}))
        .map_err(|e| LogError::Serde(e.to_string()))?;
    let mut bytes = prev.as_bytes().to_vec();
    bytes.extend_from_slice(&body);
    Ok(digest(&bytes).to_hex())
}

pub struct EventLog {
    file: File,
    path: PathBuf,
    prev_hash: String,
    next_seq: u64,
}

impl EventLog {
    /// Open (or create) a log, verifying the whole existing chain. Returns
    /// the writer positioned at the tail plus every event already recorded.
    pub fn open(path: &Path) -> Result<(Self, Vec<RegistryEvent>), LogError> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut events = Vec::new();
        let mut prev_hash = GENESIS.to_string();
        let mut next_seq = 0u64;
        if path.exists() {
            for (seq, event) in read_entries(path)? {
                prev_hash = entry_hash(&prev_hash, seq, &event)?;
                next_seq = seq + 1;
                events.push(event);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok((
            Self {
                file,
                path: path.to_path_buf(),
                prev_hash,
                next_seq,
            },
            events,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Durably append one event: written, flushed, and synced before
    /// returning.
    pub fn append(&mut self, event: &RegistryEvent) -> Result<u64, LogError> {
        let seq = self.next_seq;
        let hash = entry_hash(&self.prev_hash, seq, event)?;
        let line = canonicalize(&json!({
            "event": event,
            "hash": hash,
            "prev": self.prev_hash,
            "seq": seq,
        }))
        .map_err(|e| LogError::Serde(e.to_string()))?;
        self.file.write_all(&line)?;
        self.file.write_all(b"\n")?;
        self.file.flush()?;
        self.file.sync_data()?;
        self.prev_hash = hash;
        self.next_seq = seq + 1;
        Ok(seq)
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }
}

/// Read and chain-verify all entries of a log file.
pub fn read_entries(path: &Path) -> Result<Vec<(u64, RegistryEvent)>, LogError> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut entries = Vec::new();
    let mut prev_hash = GENESIS.to_string();
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let seq = line_no as u64;
        let value = parse_canonical_text(&line).map_err(|e| LogError::CorruptLog {
            seq,
            detail: format!("unparseable entry: {e}"),
        })?;
        let stored_seq = value
            .get("seq")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| LogError::CorruptLog {
                seq,
                detail: "missing seq".into(),
            })?;
        if stored_seq != seq {
            return Err(LogError::CorruptLog {
                seq,
                detail: format!("sequence gap: found {stored_seq}"),
            });
        }
        let stored_prev = value.get("prev").and_then(serde_json::Value::as_str);
        if stored_prev != Some(prev_hash.as_str()) {
            return Err(LogError::CorruptLog {
                seq,
                detail: "previous-hash mismatch".into(),
            });
        }
        let event: RegistryEvent =
            serde_json::from_value(value.get("event").cloned().ok_or_else(|| {
                LogError::CorruptLog {
                    seq,
                    detail: "missing event".into(),
                }
            })?)
            .map_err(|e| LogError::CorruptLog {
                seq,
                detail: format!("undecodable event: {e}"),
            })?;
        let expected_hash = entry_hash(&prev_hash, seq, &event)?;
        let stored_hash = value.get("hash").and_then(serde_json::Value::as_str);
        if stored_hash != Some(expected_hash.as_str()) {
            return Err(LogError::CorruptLog {
                seq,
                detail: "entry checksum mismatch".into(),
            });
        }
        prev_hash = expected_hash;
        entries.push((seq, event));
    }
    Ok(entries)
}

/// Rebuild state by replaying a verified log from the beginning.
pub fn replay(path: &Path) -> Result<RegistryState, LogError> {
    let mut state = RegistryState::default();
    for (_, event) in read_entries(path)? {
        state
            .apply(&event)
            .map_err(|e| LogError::InvalidEvent(e.to_string()))?;
    }
    Ok(state)
}
