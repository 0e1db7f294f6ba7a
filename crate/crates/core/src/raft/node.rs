// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::storage::{DurableState, PersistOp};
use super::{Accepted, LogEntry, MessageBody, NodeId, NotLeader, RaftConfig, RaftMessage, Role};
use crate::canonical::Hash32;
use crate::ledger::Transaction;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeEvent {
    RoleChanged { role: Role, term: u64 },
    TermChanged { term: u64 },
}

#[derive(Debug, Clone)]
pub struct RaftNode {
    id: NodeId,
    peers: Vec<NodeId>,
    config: RaftConfig,
    rng: ChaCha8Rng,

    // durable
    current_term: u64,
    voted_for: Option<NodeId>,
    log: Vec<LogEntry>,

    // volatile
    role: Role,
    commit_index: u64,
    last_applied: u64,
    leader_hint: Option<NodeId>,
    votes: BTreeSet<NodeId>,
    next_index: BTreeMap<NodeId, u64>,
    match_index: BTreeMap<NodeId, u64>,
    election_deadline: u64,
    next_heartbeat: u64,
    now: u64,
    /// tx id → log index, maintained while leader for duplicate refusal.
    tx_index: HashMap<Hash32, u64>,

    persist: Vec<PersistOp>,
    applied: Vec<LogEntry>,
    events: Vec<NodeEvent>,
}

impl RaftNode {
    pub fn new(id: NodeId, peers: Vec<NodeId>, config: RaftConfig, seed: u64, now: u64) -> Self {
        let mut node = RaftNode {
            id,
            peers: peers.into_iter().filter(|p| *p != id).collect(),
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
            current_term: 0,
            voted_for: None,
            log: Vec::new(),
            role: Role::Follower,
            commit_index: 0,
            last_applied: 0,
            leader_hint: None,
            votes: BTreeSet::new(),
            next_index: BTreeMap::new(),
            match_index: BTreeMap::new(),
            election_deadline: 0,
            next_heartbeat: 0,
            now,
            tx_index: HashMap::new(),
            persist: Vec::new(),
            applied: Vec::new(),
            events: Vec::new(),
        };
        node.reset_election_deadline();
        node
    }

    /// Rebuilds a node from durable state after a process restart.
    pub fn restore(
        id: NodeId,
        peers: Vec<NodeId>,
        config: RaftConfig,
        seed: u64,
        now: u64,
        durable: DurableState,
    ) -> Self {
        let mut node = Self::new(id, peers, config, seed, now);
        node.current_term = durable.current_term;
        node.voted_for = durable.voted_for;
        node.log = durable.log;
        node
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn current_term(&self) -> u64 {
        self.current_term
    }

    pub fn voted_for(&self) -> Option<NodeId> {
        self.voted_for
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn commit_index(&self) -> u64 {
        self.commit_index
    }

    pub fn last_applied(&self) -> u64 {
        self.last_applied
    }

    pub fn leader_hint(&self) -> Option<NodeId> {
        if self.role == Role::Leader {
            Some(self.id)
        } else {
            self.leader_hint
        }
    }

    pub fn election_deadline(&self) -> u64 {
        self.election_deadline
    }

    pub fn durable_state(&self) -> DurableState {
        DurableState { current_term: self.current_term, voted_for: self.voted_for, log: self.log.clone() }
    }

    /// Durable-state changes since the last call. A live driver must write
    /// these before sending the messages produced in the same step.
    pub fn drain_persist(&mut self) -> Vec<PersistOp> {
        std::mem::take(&mut self.persist)
    }

    /// Entries applied (committed, in order) since the last call.
    pub fn drain_applied(&mut self) -> Vec<LogEntry> {
        std::mem::take(&mut self.applied)
    }

    pub fn drain_events(&mut self) -> Vec<NodeEvent> {
        std::mem::take(&mut self.events)
    }

    fn cluster_size(&self) -> usize {
        self.peers.len() + 1
    }

    fn last_index(&self) -> u64 {
        self.log.len() as u64
    }

    fn last_term(&self) -> u64 {
        self.log.last().map_or(0, |e| e.term)
    }

    fn term_at(&self, index: u64) -> Option<u64> {
        if index == 0 {
            return Some(0);
        }
        self.log.get(index as usize - 1).map(|e| e.term)
    }

    fn reset_election_deadline(&mut self) {
        let lo = self.config.election_timeout_min;
        let hi = self.config.election_timeout_max.max(lo);
        self.election_deadline = self.now + self.rng.random_range(lo..=hi);
    }

    fn persist_hard_state(&mut self) {
        self.persist.push(PersistOp::HardState { current_term: self.current_term, voted_for: self.voted_for });
    }

    fn set_role(&mut self, role: Role) {
        if self.role != role {
            self.role = role;
            self.events.push(NodeEvent::RoleChanged { role, term: self.current_term });
        }
    }

    fn set_term(&mut self, term: u64) {
        debug_assert!(term > self.current_term);
        self.current_term = term;
        self.voted_for = None;
        self.events.push(NodeEvent::TermChanged { term });
    }

    fn step_down(&mut self, term: u64) {
        if term > self.current_term {
            self.set_term(term);
            self.persist_hard_state();
        }
        self.votes.clear();
        self.tx_index.clear();
        self.set_role(Role::Follower);
    }

    /// Drops volatile state, as after a crash; term, vote and log survive.
    pub fn crash_restart(&mut self, now: u64) {
        self.now = now;
        self.role = Role::Follower;
        self.commit_index = 0;
        self.last_applied = 0;
        self.leader_hint = None;
        self.votes.clear();
        self.next_index.clear();
        self.match_index.clear();
        self.tx_index.clear();
        self.applied.clear();
        self.persist.clear();
        self.reset_election_deadline();
    }

    /// Advances the node's clock to `now`.
    pub fn tick(&mut self, now: u64) -> Vec<RaftMessage> {
        self.now = now;
        let mut out = Vec::new();
        match self.role {
            Role::Leader => {
                if now >= self.next_heartbeat {
                    self.broadcast_append(&mut out);
                }
            }
            Role::Follower | Role::Candidate => {
                if now >= self.election_deadline {
                    self.start_election(&mut out);
                }
            }
        }
        out
    }

    fn start_election(&mut self, out: &mut Vec<RaftMessage>) {
        let term = self.current_term + 1;
        self.set_term(term);
        self.voted_for = Some(self.id);
        self.persist_hard_state();
        self.leader_hint = None;
        self.set_role(Role::Candidate);
        self.votes = BTreeSet::from([self.id]);
        self.reset_election_deadline();
        if self.votes.len() * 2 > self.cluster_size() {
            self.become_leader(out);
            return;
        }
        for &peer in &self.peers {
            out.push(RaftMessage {
                from: self.id,
                to: peer,
                term: self.current_term,
                body: MessageBody::RequestVote { last_log_index: self.last_index(), last_log_term: self.last_term() },
            });
        }
    }

    fn become_leader(&mut self, out: &mut Vec<RaftMessage>) {
        self.set_role(Role::Leader);
        self.leader_hint = Some(self.id);
        let next = self.last_index() + 1;
        self.next_index = self.peers.iter().map(|&p| (p, next)).collect();
        self.match_index = self.peers.iter().map(|&p| (p, 0)).collect();
        self.tx_index = self.log.iter().filter_map(|e| e.tx.as_ref().map(|t| (t.tx_id, e.index))).collect();
        // no-op in the new term so entries from earlier terms can commit
        self.append_local(None);
        self.broadcast_append(out);
    }

    fn append_local(&mut self, tx: Option<Transaction>) -> u64 {
        let entry = LogEntry { term: self.current_term, index: self.last_index() + 1, tx };
        if let Some(t) = &entry.tx {
            self.tx_index.insert(t.tx_id, entry.index);
        }
        self.persist.push(PersistOp::Append { entries: vec![entry.clone()] });
        self.log.push(entry);
        self.advance_leader_commit();
        self.last_index()
    }

    fn broadcast_append(&mut self, out: &mut Vec<RaftMessage>) {
        self.next_heartbeat = self.now + self.config.heartbeat_interval;
        for peer in self.peers.clone() {
            out.push(self.append_for(peer));
        }
    }

    fn append_for(&self, peer: NodeId) -> RaftMessage {
        let next = self.next_index.get(&peer).copied().unwrap_or(1).max(1);
        let prev_log_index = next - 1;
        let prev_log_term = self.term_at(prev_log_index).unwrap_or(0);
        let entries: Vec<LogEntry> =
            self.log.iter().skip(prev_log_index as usize).take(self.config.max_entries_per_message).cloned().collect();
        RaftMessage {
            from: self.id,
            to: peer,
            term: self.current_term,
            body: MessageBody::AppendEntries {
                prev_log_index,
                prev_log_term,
                entries,
                leader_commit: self.commit_index,
            },
        }
    }

    /// Appends a transaction if this node leads; otherwise refuses with the
    /// last known leader.
    pub fn submit_tx(&mut self, tx: Transaction) -> Result<(Accepted, Vec<RaftMessage>), NotLeader> {
        if self.role != Role::Leader {
            return Err(NotLeader { hint: self.leader_hint });
        }
        if let Some(&index) = self.tx_index.get(&tx.tx_id) {
            return Ok((Accepted::AlreadyInLog { index }, Vec::new()));
        }
        let index = self.append_local(Some(tx));
        let mut out = Vec::new();
        for peer in self.peers.clone() {
            out.push(self.append_for(peer));
        }
        self.apply_committed();
        Ok((Accepted::Appended { index }, out))
    }

    pub fn handle(&mut self, msg: RaftMessage, now: u64) -> Vec<RaftMessage> {
        self.now = now;
        let mut out = Vec::new();
        if msg.term > self.current_term {
            self.step_down(msg.term);
            self.leader_hint = None;
        }
        match msg.body {
            MessageBody::RequestVote { last_log_index, last_log_term } => {
                let granted = msg.term == self.current_term
                    && self.voted_for.is_none_or(|v| v == msg.from)
                    && (last_log_term, last_log_index) >= (self.last_term(), self.last_index());
                if granted && self.voted_for.is_none() {
                    self.voted_for = Some(msg.from);
                    self.persist_hard_state();
                }
                if granted {
                    self.reset_election_deadline();
                }
                out.push(self.reply(msg.from, MessageBody::VoteResponse { granted }));
            }
            MessageBody::VoteResponse { granted } => {
                if self.role == Role::Candidate && msg.term == self.current_term && granted {
                    self.votes.insert(msg.from);
                    if self.votes.len() * 2 > self.cluster_size() {
                        self.become_leader(&mut out);
                    }
                }
            }
            MessageBody::AppendEntries { prev_log_index, prev_log_term, entries, leader_commit } => {
                if msg.term < self.current_term {
                    let body = MessageBody::AppendResponse { success: false, match_index: 0 };
                    out.push(self.reply(msg.from, body));
                    return out;
                }
                if self.role != Role::Follower {
                    self.step_down(msg.term);
                }
                self.leader_hint = Some(msg.from);
                self.reset_election_deadline();
                let body = self.accept_entries(prev_log_index, prev_log_term, entries, leader_commit);
                out.push(self.reply(msg.from, body));
            }
            MessageBody::AppendResponse { success, match_index } => {
                if self.role == Role::Leader && msg.term == self.current_term {
                    if success {
                        let m = self.match_index.entry(msg.from).or_insert(0);
                        *m = (*m).max(match_index);
                        let m = *m;
                        let n = self.next_index.entry(msg.from).or_insert(1);
                        *n = (*n).max(m + 1);
                        self.advance_leader_commit();
                        self.apply_committed();
                        if m < self.last_index() {
                            out.push(self.append_for(msg.from));
                        }
                    } else {
                        let n = self.next_index.entry(msg.from).or_insert(1);
                        *n = (match_index + 1).min(n.saturating_sub(1)).max(1);
                        out.push(self.append_for(msg.from));
                    }
                }
            }
        }
        out
    }

    fn reply(&self, to: NodeId, body: MessageBody) -> RaftMessage {
        RaftMessage { from: self.id, to, term: self.current_term, body }
    }

    fn accept_entries(
        &mut self,
        prev_log_index: u64,
        prev_log_term: u64,
        entries: Vec<LogEntry>,
        leader_commit: u64,
    ) -> MessageBody {
        match self.term_at(prev_log_index) {
            Some(t) if t == prev_log_term => {}
            _ => {
                let hint = self.last_index().min(prev_log_index.saturating_sub(1));
                return MessageBody::AppendResponse { success: false, match_index: hint };
            }
        }
        let last_new = prev_log_index + entries.len() as u64;
        let mut appended = Vec::new();
        for entry in entries {
            match self.term_at(entry.index) {
                Some(t) if t == entry.term => continue,
                Some(_) => {
                    self.log.truncate(entry.index as usize - 1);
                    self.persist.push(PersistOp::TruncateFrom { index: entry.index });
                    appended.push(entry.clone());
                    self.log.push(entry);
                }
                None => {
                    debug_assert_eq!(entry.index, self.last_index() + 1);
                    appended.push(entry.clone());
                    self.log.push(entry);
                }
            }
        }
        if !appended.is_empty() {
            self.persist.push(PersistOp::Append { entries: appended });
        }
        if leader_commit > self.commit_index {
            self.commit_index = leader_commit.min(last_new);
            self.apply_committed();
        }
        MessageBody::AppendResponse { success: true, match_index: last_new }
    }

    fn advance_leader_commit(&mut self) {
        if self.role != Role::Leader {
            return;
        }
        let majority = self.cluster_size() / 2 + 1;
        let mut n = self.last_index();
        while n > self.commit_index {
            if self.term_at(n) == Some(self.current_term) {
                let replicas = 1 + self.match_index.values().filter(|&&m| m >= n).count();
                if replicas >= majority {
                    self.commit_index = n;
                    break;
                }
            } else {
                break;
            }
            n -= 1;
        }
    }

    fn apply_committed(&mut self) {
        while self.last_applied < self.commit_index {
            self.last_applied += 1;
            self.applied.push(self.log[self.last_applied as usize - 1].clone());
        }
    }
}
