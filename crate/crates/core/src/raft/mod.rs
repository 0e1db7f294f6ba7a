// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

//! Raft ordering service.
//!
//! [`RaftNode`] is a pure state machine: `(state, event) -> (state, messages)`.
//! Time enters only as an explicit tick number, so the same node runs under
//! the deterministic [`sim`] harness and under a live network driver. Leader
//! election and log replication follow standard Raft; membership changes and
//! log compaction are not supported.

pub mod check;
pub mod cutter;
pub mod sim;
pub mod storage;

mod node;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::Transaction;

pub use cutter::{cut_block, BatchPolicy, BlockCutter};
pub use node::{NodeEvent, RaftNode};
pub use storage::{DurableState, FileStorage, PersistOp};

pub type NodeId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Follower,
    Candidate,
    Leader,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub term: u64,
    pub index: u64,
    /// `None` marks the no-op a new leader appends to commit earlier terms.
    pub tx: Option<Transaction>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "variant")]
pub enum MessageBody {
    RequestVote {
        last_log_index: u64,
        last_log_term: u64,
    },
    VoteResponse {
        granted: bool,
    },
    AppendEntries {
        prev_log_index: u64,
        prev_log_term: u64,
        entries: Vec<LogEntry>,
        leader_commit: u64,
    },
    /// On success `match_index` is the last index known to match the
    /// leader; on failure it hints where the follower's log can match.
    AppendResponse {
        success: bool,
        match_index: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaftMessage {
    pub from: NodeId,
    pub to: NodeId,
    /// Sender's term when the message was produced.
    pub term: u64,
    pub body: MessageBody,
}

impl RaftMessage {
    pub fn kind(&self) -> &'static str {
        match self.body {
            MessageBody::RequestVote { .. } => "RequestVote",
            MessageBody::VoteResponse { .. } => "VoteResponse",
            MessageBody::AppendEntries { .. } => "AppendEntries",
            MessageBody::AppendResponse { .. } => "AppendResponse",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaftConfig {
    pub election_timeout_min: u64,
    pub election_timeout_max: u64,
    pub heartbeat_interval: u64,
    pub max_entries_per_message: usize,
}

impl Default for RaftConfig {
    fn default() -> Self {
        RaftConfig {
            election_timeout_min: 150,
            election_timeout_max: 300,
            heartbeat_interval: 50,
            max_entries_per_message: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("not the leader (hint: {hint:?})")]
pub struct NotLeader {
    pub hint: Option<NodeId>,
}

/// Result of a successful submission.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Accepted {
    Appended {
        index: u64,
    },
    /// The transaction is already in the leader's log.
    AlreadyInLog {
        index: u64,
    },
}
