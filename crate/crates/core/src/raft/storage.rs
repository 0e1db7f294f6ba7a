// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

//! Durable Raft state: term, vote and log, kept as an append-only file of
//! length-prefixed canonical JSON records.

use std::fs::{File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{LogEntry, NodeId};
use crate::canonical::canonical_bytes;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op")]
pub enum PersistOp {
    HardState {
        current_term: u64,
        voted_for: Option<NodeId>,
    },
    Append {
        entries: Vec<LogEntry>,
    },
    /// Drop entries with index >= the value.
    TruncateFrom {
        index: u64,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DurableState {
    pub current_term: u64,
    pub voted_for: Option<NodeId>,
    pub log: Vec<LogEntry>,
}

impl DurableState {
    pub fn apply(&mut self, op: &PersistOp) {
        match op {
            PersistOp::HardState { current_term, voted_for } => {
                self.current_term = *current_term;
                self.voted_for = *voted_for;
            }
            PersistOp::Append { entries } => {
                for e in entries {
                    self.log.truncate(e.index as usize - 1);
                    self.log.push(e.clone());
                }
            }
            PersistOp::TruncateFrom { index } => {
                self.log.truncate(index.saturating_sub(1) as usize);
            }
        }
    }
}

#[derive(Debug)]
pub struct FileStorage {
    path: PathBuf,
    file: File,
}

impl FileStorage {
    /// Opens (or creates) the file and replays it. A torn final record is
    /// dropped and the file truncated to the last whole record.
    pub fn open(path: impl AsRef<Path>) -> io::Result<(FileStorage, DurableState)> {
        let path = path.as_ref().to_path_buf();
        let mut bytes = Vec::new();
        if path.exists() {
            File::open(&path)?.read_to_end(&mut bytes)?;
        }
        let mut state = DurableState::default();
        let mut pos = 0usize;
        while pos + 4 <= bytes.len() {
            let len = u32::from_be_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
            let Some(body) = bytes.get(pos + 4..pos + 4 + len) else { break };
            let op: PersistOp = match serde_json::from_slice(body) {
                Ok(op) => op,
                Err(_) => break,
            };
            state.apply(&op);
            pos += 4 + len;
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        if (pos as u64) < file.metadata()?.len() {
            file.set_len(pos as u64)?;
        }
        Ok((FileStorage { path, file }, state))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends the ops and fsyncs before returning.
    pub fn persist(&mut self, ops: &[PersistOp]) -> io::Result<()> {
        if ops.is_empty() {
            return Ok(());
        }
        let mut buf = Vec::new();
        for op in ops {
            let body = canonical_bytes(op);
            buf.extend_from_slice(&(body.len() as u32).to_be_bytes());
            buf.extend_from_slice(&body);
        }
        self.file.write_all(&buf)?;
        self.file.sync_data()
    }
}
