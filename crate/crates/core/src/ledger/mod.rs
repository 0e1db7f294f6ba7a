// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

//! Permissioned ledger: per-channel hash chains of signed defect
//! transactions, compiled-in validation, world state and query indexes.
//!
//! There is no update or delete entry point. Transactions that fail
//! validation stay in their block and are marked with a verdict; only valid
//! ones reach the world state.

mod block;
mod channel;
mod identity;
mod store;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use block::{create_genesis, data_hash, Block, BlockHeader, ChannelConfig, Transaction, TxOp, TxVerdict};
pub use channel::Channel;
pub use identity::{OrgRegistry, Secret};
pub use store::{decode_chain, encode_block, verify_persisted, ChannelStore, Snapshot};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("channel membership must not be empty")]
    EmptyMembership,
    #[error("organization is not a member of this channel")]
    NotAMember,
    #[error("block {number} does not extend the chain: {reason}")]
    BrokenChain { number: u64, reason: String },
    #[error("invalid genesis block: {0}")]
    BadGenesis(String),
    #[error("storage: {0}")]
    Storage(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub ok: bool,
    pub first_bad_block: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reason: Option<String>,
}

impl VerifyReport {
    pub fn ok() -> Self {
        VerifyReport { ok: true, first_bad_block: None, reason: None }
    }

    pub fn bad(block: u64, reason: impl Into<String>) -> Self {
        VerifyReport { ok: false, first_bad_block: Some(block), reason: Some(reason.into()) }
    }
}
