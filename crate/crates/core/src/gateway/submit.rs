// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

//! At-least-once delivery of defect records through an outbox.
//!
//! Record ids are assigned at the edge, so a retried POST carries the same
//! id and the ledger turns the repeat into a no-op.

use std::collections::VecDeque;
use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::record::DefectRecord;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum PostOutcome {
    Committed { tx_id: String, block_number: Option<u64> },
    Pending { tx_id: String },
    Duplicate { tx_id: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClientError {
    #[error("unauthorized")]
    Unauthorized,
    #[error("unreachable: {0}")]
    Unreachable(String),
    #[error("rejected: {0}")]
    Rejected(String),
}

/// The ledger API as seen from the edge.
pub trait LedgerClient {
    fn register(&mut self, org_id: &str, secret: &str) -> Result<String, ClientError>;
    fn post_defect(&mut self, token: &str, record: &DefectRecord) -> Result<PostOutcome, ClientError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubmitStatus {
    Committed,
    Pending,
    Duplicate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmitReceipt {
    pub record_id: String,
    pub tx_id: String,
    pub status: SubmitStatus,
    pub block_number: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SubmitError {
    /// Retry budget exhausted; the record is still queued.
    #[error("ledger unreachable after {attempts} attempts: {last}")]
    Unreachable { attempts: u32, last: String },
    #[error("record {record_id} rejected: {message}")]
    Rejected { record_id: String, message: String },
    #[error("registration failed: {0}")]
    Registration(String),
}

pub struct Submitter<C> {
    client: C,
    org_id: String,
    secret: String,
    token: Option<String>,
    outbox: VecDeque<DefectRecord>,
    rejected: Vec<(DefectRecord, String)>,
    retry_budget: u32,
    retry_delay: Duration,
}

impl<C: LedgerClient> Submitter<C> {
    pub fn new(client: C, org_id: impl Into<String>, secret: impl Into<String>) -> Self {
        Submitter {
            client,
            org_id: org_id.into(),
            secret: secret.into(),
            token: None,
            outbox: VecDeque::new(),
            rejected: Vec::new(),
            retry_budget: 3,
            retry_delay: Duration::ZERO,
        }
    }

    pub fn with_retry(mut self, budget: u32, delay: Duration) -> Self {
        self.retry_budget = budget.max(1);
        self.retry_delay = delay;
        self
    }

    pub fn client(&self) -> &C {
        &self.client
    }

    pub fn client_mut(&mut self) -> &mut C {
        &mut self.client
    }

    pub fn pending(&self) -> impl ExactSizeIterator<Item = &DefectRecord> {
        self.outbox.iter()
    }

    /// Records the server refused, with its reason.
    pub fn rejected(&self) -> &[(DefectRecord, String)] {
        &self.rejected
    }

    /// Queues `record` and drains the outbox in order.
    pub fn submit(&mut self, record: DefectRecord) -> Result<SubmitReceipt, SubmitError> {
        let record_id = record.record_id.clone();
        self.outbox.push_back(record);
        let delivered = self.flush()?;
        if let Some(r) = delivered.into_iter().find(|r| r.record_id == record_id) {
            return Ok(r);
        }
        let message = self
            .rejected
            .iter()
            .rev()
            .find(|(r, _)| r.record_id == record_id)
            .map(|(_, m)| m.clone())
            .unwrap_or_default();
        Err(SubmitError::Rejected { record_id, message })
    }

    /// Delivers queued records front to back, stopping at the first record
    /// that cannot be delivered within the retry budget.
    pub fn flush(&mut self) -> Result<Vec<SubmitReceipt>, SubmitError> {
        let mut receipts = Vec::new();
        while let Some(record) = self.outbox.front().cloned() {
            match self.deliver(&record) {
                Ok(outcome) => {
                    self.outbox.pop_front();
                    receipts.push(receipt(&record, outcome));
                }
                Err(ClientError::Rejected(message)) => {
                    self.outbox.pop_front();
                    self.rejected.push((record, message));
                }
                Err(ClientError::Unauthorized) => {
                    return Err(SubmitError::Registration("token refused after re-registration".into()))
                }
                Err(ClientError::Unreachable(last)) => {
                    return Err(SubmitError::Unreachable { attempts: self.retry_budget, last })
                }
            }
        }
        Ok(receipts)
    }

    fn deliver(&mut self, record: &DefectRecord) -> Result<PostOutcome, ClientError> {
        let mut last = ClientError::Unreachable("no attempt made".into());
        let mut reregistered = false;
        let mut attempt = 0;
        while attempt < self.retry_budget {
            if attempt > 0 && !self.retry_delay.is_zero() {
                thread::sleep(self.retry_delay);
            }
            let token = match self.token.clone() {
                Some(t) => t,
                None => match self.client.register(&self.org_id, &self.secret) {
                    Ok(t) => {
                        self.token = Some(t.clone());
                        t
                    }
                    Err(ClientError::Unreachable(e)) => {
                        last = ClientError::Unreachable(e);
                        attempt += 1;
                        continue;
                    }
                    Err(other) => return Err(other),
                },
            };
            match self.client.post_defect(&token, record) {
                Ok(outcome) => return Ok(outcome),
                Err(ClientError::Unauthorized) if !reregistered => {
                    // expired or revoked token: register again once
                    reregistered = true;
                    self.token = None;
                }
                Err(ClientError::Unreachable(e)) => {
                    last = ClientError::Unreachable(e);
                    attempt += 1;
                }
                Err(other) => return Err(other),
            }
        }
        Err(last)
    }

    /// Writes pending records as NDJSON for crash recovery.
    pub fn spill(&self, path: &Path) -> io::Result<()> {
        let mut buf = Vec::new();
        for r in &self.outbox {
            serde_json::to_writer(&mut buf, r)?;
            buf.push(b'\n');
        }
        let mut f = fs::File::create(path)?;
        f.write_all(&buf)?;
        f.sync_all()
    }

    /// Re-queues records from a spill file ahead of anything new.
    pub fn restore(&mut self, path: &Path) -> io::Result<usize> {
        let text = fs::read_to_string(path)?;
        let mut restored = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            restored.push(serde_json::from_str::<DefectRecord>(line)?);
        }
        let n = restored.len();
        for r in restored.into_iter().rev() {
            if !self.outbox.iter().any(|q| q.record_id == r.record_id) {
                self.outbox.push_front(r);
            }
        }
        Ok(n)
    }
}

fn receipt(record: &DefectRecord, outcome: PostOutcome) -> SubmitReceipt {
    let (tx_id, status, block_number) = match outcome {
        PostOutcome::Committed { tx_id, block_number } => (tx_id, SubmitStatus::Committed, block_number),
        PostOutcome::Pending { tx_id } => (tx_id, SubmitStatus::Pending, None),
        PostOutcome::Duplicate { tx_id } => (tx_id, SubmitStatus::Duplicate, None),
    };
    SubmitReceipt { record_id: record.record_id.clone(), tx_id, status, block_number }
}
