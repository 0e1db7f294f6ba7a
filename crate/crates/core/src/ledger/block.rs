// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::identity::OrgRegistry;
use super::LedgerError;
use crate::canonical::{canonical_bytes, sha256, Hash32};
use crate::gateway::DefectRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TxOp {
    RecordDefect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transaction {
    /// SHA-256 of the canonical payload bytes.
    pub tx_id: Hash32,
    pub channel_id: String,
    pub op: TxOp,
    /// Canonical JSON of a [`DefectRecord`].
    pub payload: String,
    pub submitter_org: String,
    /// HMAC-SHA256 of the payload under the submitter's secret.
    pub signature: Hash32,
}

impl Transaction {
    /// Builds and signs a RecordDefect transaction. `None` when the org has
    /// no registered secret.
    pub fn record_defect(
        channel_id: &str,
        record: &DefectRecord,
        org: &str,
        registry: &OrgRegistry,
    ) -> Option<Transaction> {
        let payload = canonical_bytes(record);
        let signature = registry.sign(org, &payload)?;
        Some(Transaction {
            tx_id: sha256(&payload),
            channel_id: channel_id.to_string(),
            op: TxOp::RecordDefect,
            payload: String::from_utf8(payload).expect("canonical JSON is UTF-8"),
            submitter_org: org.to_string(),
            signature,
        })
    }

    pub fn record(&self) -> Option<DefectRecord> {
        serde_json::from_str(&self.payload).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TxVerdict {
    Valid,
    NotAMember,
    BadSignature,
    MalformedPayload,
    DuplicateNoop,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub channel_id: String,
    pub member_orgs: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockHeader {
    pub number: u64,
    pub previous_hash: Hash32,
    /// SHA-256 over the member tx digests in order (the channel config for
    /// genesis).
    pub data_hash: Hash32,
    /// SHA-256 over the canonical transaction list, covering the envelope
    /// fields the tx digests leave out.
    pub envelope_hash: Hash32,
    pub channel_id: String,
    pub timestamp: u64,
}

impl BlockHeader {
    pub fn hash(&self) -> Hash32 {
        sha256(&canonical_bytes(self))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub header: BlockHeader,
    pub transactions: Vec<Transaction>,
    /// Present on genesis only.
    pub config: Option<ChannelConfig>,
    pub block_hash: Hash32,
    /// Per-transaction validation results, filled in at commit.
    pub verdicts: Vec<TxVerdict>,
}

pub fn data_hash(transactions: &[Transaction]) -> Hash32 {
    let mut buf = Vec::with_capacity(32 * transactions.len());
    for tx in transactions {
        buf.extend_from_slice(&tx.tx_id.0);
    }
    sha256(&buf)
}

pub(crate) fn envelope_hash(transactions: &[Transaction]) -> Hash32 {
    sha256(&canonical_bytes(transactions))
}

impl Block {
    /// An ordered, not yet validated block chaining off `tip`.
    pub fn new(tip: &BlockHeader, tip_hash: Hash32, transactions: Vec<Transaction>, timestamp: u64) -> Block {
        let header = BlockHeader {
            number: tip.number + 1,
            previous_hash: tip_hash,
            data_hash: data_hash(&transactions),
            envelope_hash: envelope_hash(&transactions),
            channel_id: tip.channel_id.clone(),
            timestamp,
        };
        Block { block_hash: header.hash(), header, transactions, config: None, verdicts: Vec::new() }
    }

    /// Checks the block's own hashes, independent of any chain.
    pub fn check_hashes(&self) -> Result<(), String> {
        let expected_data = match &self.config {
            Some(cfg) => sha256(&canonical_bytes(cfg)),
            None => data_hash(&self.transactions),
        };
        if self.header.data_hash != expected_data {
            return Err("data_hash mismatch".into());
        }
        if self.header.envelope_hash != envelope_hash(&self.transactions) {
            return Err("envelope_hash mismatch".into());
        }
        if self.block_hash != self.header.hash() {
            return Err("block_hash mismatch".into());
        }
        Ok(())
    }
}

/// Block 0 of a channel, carrying the channel config.
pub fn create_genesis(channel_id: &str, member_orgs: &BTreeSet<String>, timestamp: u64) -> Result<Block, LedgerError> {
    if member_orgs.is_empty() {
        return Err(LedgerError::EmptyMembership);
    }
    let config = ChannelConfig { channel_id: channel_id.to_string(), member_orgs: member_orgs.clone() };
    let header = BlockHeader {
        number: 0,
        previous_hash: Hash32::ZERO,
        data_hash: sha256(&canonical_bytes(&config)),
        envelope_hash: envelope_hash(&[]),
        channel_id: channel_id.to_string(),
        timestamp,
    };
    Ok(Block {
        block_hash: header.hash(),
        header,
        transactions: Vec::new(),
        config: Some(config),
        verdicts: Vec::new(),
    })
}
