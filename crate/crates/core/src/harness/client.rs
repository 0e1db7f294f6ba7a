// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeSet, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::access::{TokenTable, DEFAULT_TOKEN_TTL_MS};
use crate::gateway::{ClientError, LedgerClient, PostOutcome};
use crate::ledger::{OrgRegistry, Transaction};
use crate::DefectRecord;

/// A [`LedgerClient`] that admits records the way the API server does and
/// hands the signed transactions to the caller instead of an orderer.
#[derive(Debug)]
pub struct InProcessLedger {
    registry: OrgRegistry,
    channel_id: String,
    members: BTreeSet<String>,
    tokens: TokenTable,
    rng: ChaCha8Rng,
    now_ms: u64,
    seen: HashSet<String>,
    accepted: Vec<(u64, Transaction)>,
}

impl InProcessLedger {
    pub fn new(registry: OrgRegistry, channel_id: &str, members: BTreeSet<String>, seed: u64) -> Self {
        InProcessLedger {
            registry,
            channel_id: channel_id.to_string(),
            members,
            tokens: TokenTable::new(DEFAULT_TOKEN_TTL_MS),
            rng: ChaCha8Rng::seed_from_u64(seed),
            now_ms: 0,
            seen: HashSet::new(),
            accepted: Vec::new(),
        }
    }

    /// Sets the clock used for token issue and expiry.
    pub fn set_time(&mut self, now_ms: u64) {
        self.now_ms = now_ms;
    }

    /// Accepted transactions with their acceptance time, in order.
    pub fn take_accepted(&mut self) -> Vec<(u64, Transaction)> {
        std::mem::take(&mut self.accepted)
    }
}

impl LedgerClient for InProcessLedger {
    fn register(&mut self, org_id: &str, secret: &str) -> Result<String, ClientError> {
        self.tokens
            .register(&self.registry, org_id, secret, self.now_ms, &mut self.rng)
            .map(|t| t.token)
            .map_err(|_| ClientError::Unauthorized)
    }

    fn post_defect(&mut self, token: &str, record: &DefectRecord) -> Result<PostOutcome, ClientError> {
        let org = self.tokens.authorize(Some(token), self.now_ms).map_err(|_| ClientError::Unauthorized)?.to_string();
        if !self.members.contains(&org) {
            return Err(ClientError::Rejected("FORBIDDEN".into()));
        }
        if let Err(issues) = record.validate() {
            let fields: Vec<String> = issues.into_iter().map(|i| i.field).collect();
            return Err(ClientError::Rejected(format!("VALIDATION_FAILED: {}", fields.join(", "))));
        }
        let tx = Transaction::record_defect(&self.channel_id, record, &org, &self.registry)
            .ok_or_else(|| ClientError::Rejected("FORBIDDEN".into()))?;
        let tx_id = tx.tx_id.to_hex();
        if !self.seen.insert(record.record_id.clone()) {
            return Ok(PostOutcome::Duplicate { tx_id });
        }
        self.accepted.push((self.now_ms, tx));
        Ok(PostOutcome::Pending { tx_id })
    }
}
