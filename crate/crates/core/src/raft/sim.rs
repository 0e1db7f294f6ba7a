// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

//! Deterministic single-threaded network simulator for a Raft cluster.
//!
//! Every random choice (election timeouts, link delays, drops, client
//! backoff) derives from [`NetConfig::seed`], so a run is a pure function of
//! its inputs and the trace can be compared byte for byte.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cutter::{BatchPolicy, BlockCutter};
use super::{Accepted, LogEntry, NodeEvent, NodeId, RaftConfig, RaftMessage, RaftNode, Role};
use crate::canonical::{canonical_bytes, Hash32};
use crate::gateway::{DefectRecord, Importance};
use crate::ledger::{create_genesis, Block, OrgRegistry, Transaction};

/// Nodes in `isolated` cannot exchange messages with nodes outside it
/// during ticks `[from, until)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub from: u64,
    pub until: u64,
    pub isolated: BTreeSet<NodeId>,
}

impl Partition {
    fn cuts(&self, tick: u64, a: NodeId, b: NodeId) -> bool {
        tick >= self.from && tick < self.until && (self.isolated.contains(&a) != self.isolated.contains(&b))
    }
}

/// Node `node` is down for ticks `[at, at + down_for)` and then restarts
/// from its durable state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Crash {
    pub at: u64,
    pub node: NodeId,
    pub down_for: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub seed: u64,
    pub min_delay: u64,
    pub max_delay: u64,
    pub drop_prob: f64,
    #[serde(default)]
    pub partitions: Vec<Partition>,
    #[serde(default)]
    pub crashes: Vec<Crash>,
}

impl NetConfig {
    pub fn lossless(seed: u64) -> Self {
        NetConfig { seed, min_delay: 1, max_delay: 10, drop_prob: 0.0, partitions: Vec::new(), crashes: Vec::new() }
    }

    fn partitioned(&self, tick: u64, a: NodeId, b: NodeId) -> bool {
        self.partitions.iter().any(|p| p.cuts(tick, a, b))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkItem {
    pub at: u64,
    pub tx: Transaction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub raft: RaftConfig,
    pub batch: BatchPolicy,
    /// Ticks a client waits for an accepted tx to commit before trying
    /// another node.
    pub commit_timeout: u64,
    /// Extra ticks allowed after `duration` for outstanding work to finish.
    pub max_settle: u64,
    /// Interval between log snapshots in the trace; 0 disables them.
    pub snapshot_every: u64,
    pub record_messages: bool,
    pub channel_id: String,
    /// Channel members written into the genesis block.
    pub members: BTreeSet<String>,
    pub epoch_ms: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            raft: RaftConfig::default(),
            batch: BatchPolicy::default(),
            commit_timeout: 600,
            max_settle: 20_000,
            snapshot_every: 1_000,
            record_messages: true,
            channel_id: "defects".into(),
            members: ["Org1".to_string()].into(),
            epoch_ms: 0,
        }
    }
}

/// Compact view of a log entry: its term and tx id (`None` for no-ops).
pub type EntryView = (u64, Option<Hash32>);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event_kind", content = "detail")]
pub enum Event {
    Send {
        to: NodeId,
        kind: String,
        term: u64,
        entries: usize,
    },
    Drop {
        to: NodeId,
        kind: String,
        reason: String,
    },
    Deliver {
        from: NodeId,
        kind: String,
        term: u64,
    },
    Role {
        role: Role,
        term: u64,
    },
    Term {
        term: u64,
    },
    /// A new leader's full log at the moment it won.
    LeaderLog {
        term: u64,
        log: Vec<EntryView>,
    },
    LogSnapshot {
        log: Vec<EntryView>,
    },
    Apply {
        index: u64,
        term: u64,
        tx_id: Option<Hash32>,
    },
    Submit {
        tx_id: Hash32,
        outcome: String,
    },
    Committed {
        tx_id: Hash32,
        index: u64,
    },
    Crash {},
    Restart {},
    Block {
        number: u64,
        block_hash: Hash32,
        previous_hash: Hash32,
        tx_ids: Vec<Hash32>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub tick: u64,
    /// Node id, or 0 for the client and block cutter.
    pub node: NodeId,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub cluster_size: usize,
    pub final_tick: u64,
    pub events: Vec<TraceEvent>,
    /// Cluster commit order: first application of each log index anywhere.
    pub committed: Vec<LogEntry>,
    pub blocks: Vec<Block>,
    /// Submitted tx ids in workload order.
    pub submitted: Vec<Hash32>,
    /// Submitted txs that never committed.
    pub outstanding: Vec<Hash32>,
}

impl SimTrace {
    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(std::str::from_utf8(&canonical_bytes(e)).expect("utf-8 json"));
            out.push('\n');
        }
        out
    }

    pub fn from_ndjson(text: &str) -> Result<Vec<TraceEvent>, serde_json::Error> {
        text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
    }

    /// Committed tx ids in commit order, skipping no-ops.
    pub fn committed_txs(&self) -> Vec<Hash32> {
        self.committed.iter().filter_map(|e| e.tx.as_ref().map(|t| t.tx_id)).collect()
    }

    pub fn block_txs(&self) -> Vec<Hash32> {
        self.blocks.iter().flat_map(|b| b.transactions.iter().map(|t| t.tx_id)).collect()
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn derive_seed(seed: u64, stream: u64, a: u64, b: u64) -> u64 {
    splitmix(splitmix(splitmix(seed ^ stream) ^ a) ^ b)
}

fn entry_view(log: &[LogEntry]) -> Vec<EntryView> {
    log.iter().map(|e| (e.term, e.tx.as_ref().map(|t| t.tx_id))).collect()
}

struct Pending {
    tx: Transaction,
    next_try: u64,
    attempts: u32,
    waiting_on: Option<NodeId>,
}

struct Net<'a> {
    cfg: &'a NetConfig,
    links: HashMap<(NodeId, NodeId), ChaCha8Rng>,
    queue: BinaryHeap<Reverse<(u64, u64)>>,
    in_flight: HashMap<u64, RaftMessage>,
    seq: u64,
    record: bool,
}

impl Net<'_> {
    fn send(&mut self, msg: RaftMessage, tick: u64, events: &mut Vec<TraceEvent>) {
        let (from, to) = (msg.from, msg.to);
        let seed = self.cfg.seed;
        let rng =
            self.links.entry((from, to)).or_insert_with(|| ChaCha8Rng::seed_from_u64(derive_seed(seed, 2, from, to)));
        let dropped = self.cfg.drop_prob > 0.0 && rng.random_bool(self.cfg.drop_prob.min(1.0));
        let lo = self.cfg.min_delay.max(1);
        let delay = rng.random_range(lo..=self.cfg.max_delay.max(lo));
        let reason = if self.cfg.partitioned(tick, from, to) {
            Some("partition")
        } else if dropped {
            Some("loss")
        } else {
            None
        };
        if self.record {
            let entries = match &msg.body {
                super::MessageBody::AppendEntries { entries, .. } => entries.len(),
                _ => 0,
            };
            let event = match reason {
                Some(r) => Event::Drop { to, kind: msg.kind().into(), reason: r.into() },
                None => Event::Send { to, kind: msg.kind().into(), term: msg.term, entries },
            };
            events.push(TraceEvent { tick, node: from, event });
        }
        if reason.is_none() {
            self.seq += 1;
            self.queue.push(Reverse((tick + delay, self.seq)));
            self.in_flight.insert(self.seq, msg);
        }
    }
}

/// Synthetic signed transactions for workloads; one e-stop record per tx.
pub fn synthetic_txs(channel_id: &str, count: usize, salt: u64) -> Vec<Transaction> {
    let registry = sim_registry();
    (0..count)
        .map(|i| {
            let record = DefectRecord {
                record_id: uuid::Uuid::from_u64_pair(salt, i as u64).to_string(),
                sensor_id: "R01_EStop".into(),
                fault_type: "EmergencyStop".into(),
                value: 1.0,
                unit: "bool".into(),
                importance: Importance::Alert,
                timestamp: i as u64,
                shipment_id: None,
                location: None,
                tilt_status: None,
            };
            Transaction::record_defect(channel_id, &record, "Org1", &registry).expect("member org")
        })
        .collect()
}

/// Registry used by [`synthetic_txs`].
pub fn sim_registry() -> OrgRegistry {
    OrgRegistry::default().with_org("Org1", "org1-sim-secret")
}

/// `count` txs at uniformly random ticks in `[0, span)`, sorted by tick.
pub fn random_workload(channel_id: &str, count: usize, span: u64, seed: u64) -> Vec<WorkItem> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 7, 0, 0));
    let mut ticks: Vec<u64> = (0..count).map(|_| rng.random_range(0..span.max(1))).collect();
    ticks.sort_unstable();
    synthetic_txs(channel_id, count, seed).into_iter().zip(ticks).map(|(tx, at)| WorkItem { at, tx }).collect()
}

pub fn run_simulation(
    cluster_size: usize,
    net: &NetConfig,
    workload: &[WorkItem],
    duration: u64,
    opts: &SimOptions,
) -> SimTrace {
    assert!(cluster_size >= 1, "cluster needs at least one node");
    let ids: Vec<NodeId> = (1..=cluster_size as NodeId).collect();
    let mut nodes: BTreeMap<NodeId, RaftNode> = ids
        .iter()
        .map(|&id| {
            let seed = derive_seed(net.seed, 1, id, 0);
            (id, RaftNode::new(id, ids.clone(), opts.raft, seed, 0))
        })
        .collect();
    let mut down_until: BTreeMap<NodeId, u64> = BTreeMap::new();
    let mut crashes: Vec<Crash> = net.crashes.clone();
    crashes.sort_by_key(|c| (c.at, c.node));
    let mut crashes = VecDeque::from(crashes);

    let mut network = Net {
        cfg: net,
        links: HashMap::new(),
        queue: BinaryHeap::new(),
        in_flight: HashMap::new(),
        seq: 0,
        record: opts.record_messages,
    };
    let mut events: Vec<TraceEvent> = Vec::new();

    let genesis = create_genesis(&opts.channel_id, &opts.members, opts.epoch_ms).expect("non-empty membership");
    let mut cutter = BlockCutter::new(opts.batch, genesis.header.clone(), opts.epoch_ms);
    let mut blocks: Vec<Block> = Vec::new();
    let mut committed: Vec<LogEntry> = Vec::new();
    let mut committed_ids: HashSet<Hash32> = HashSet::new();

    let mut client_rng = ChaCha8Rng::seed_from_u64(derive_seed(net.seed, 3, 0, 0));
    let mut guess: NodeId = 1;
    let mut arrivals: VecDeque<&WorkItem> = {
        let mut w: Vec<&WorkItem> = workload.iter().collect();
        w.sort_by_key(|w| w.at);
        w.into()
    };
    let mut pending: BTreeMap<u64, Pending> = BTreeMap::new();
    let mut next_pending_id = 0u64;
    let submitted: Vec<Hash32> = workload.iter().map(|w| w.tx.tx_id).collect();

    let mut tick = 0u64;
    loop {
        let idle = arrivals.is_empty() && pending.is_empty() && cutter.queued() == 0;
        if tick >= duration && (idle || tick >= duration + opts.max_settle) {
            break;
        }

        // crashes and restarts
        while crashes.front().is_some_and(|c| c.at <= tick) {
            let c = crashes.pop_front().unwrap();
            if nodes.contains_key(&c.node) && !down_until.contains_key(&c.node) {
                down_until.insert(c.node, c.at + c.down_for.max(1));
                events.push(TraceEvent { tick, node: c.node, event: Event::Crash {} });
            }
        }
        let restarting: Vec<NodeId> = down_until.iter().filter(|(_, &u)| u <= tick).map(|(&n, _)| n).collect();
        for id in restarting {
            down_until.remove(&id);
            nodes.get_mut(&id).unwrap().crash_restart(tick);
            events.push(TraceEvent { tick, node: id, event: Event::Restart {} });
        }

        let mut outbox: Vec<RaftMessage> = Vec::new();

        // deliveries
        while network.queue.peek().is_some_and(|Reverse((at, _))| *at <= tick) {
            let Reverse((_, seq)) = network.queue.pop().unwrap();
            let msg = network.in_flight.remove(&seq).unwrap();
            let (from, to, kind) = (msg.from, msg.to, msg.kind());
            if down_until.contains_key(&to) || net.partitioned(tick, from, to) {
                if opts.record_messages {
                    let reason = if down_until.contains_key(&to) { "down" } else { "partition" };
                    events.push(TraceEvent {
                        tick,
                        node: from,
                        event: Event::Drop { to, kind: kind.into(), reason: reason.into() },
                    });
                }
                continue;
            }
            if opts.record_messages {
                events.push(TraceEvent {
                    tick,
                    node: to,
                    event: Event::Deliver { from, kind: kind.into(), term: msg.term },
                });
            }
            outbox.extend(nodes.get_mut(&to).unwrap().handle(msg, tick));
        }

        // timers
        for (&id, node) in nodes.iter_mut() {
            if !down_until.contains_key(&id) {
                outbox.extend(node.tick(tick));
            }
        }

        // client
        while arrivals.front().is_some_and(|w| w.at <= tick) {
            let w = arrivals.pop_front().unwrap();
            pending
                .insert(next_pending_id, Pending { tx: w.tx.clone(), next_try: tick, attempts: 0, waiting_on: None });
            next_pending_id += 1;
        }
        let due: Vec<u64> = pending.iter().filter(|(_, p)| p.next_try <= tick).map(|(&k, _)| k).collect();
        for key in due {
            let p = pending.get_mut(&key).unwrap();
            if committed_ids.contains(&p.tx.tx_id) {
                pending.remove(&key);
                continue;
            }
            p.attempts += 1;
            if let Some(n) = p.waiting_on.take() {
                // accepted earlier but never committed: that node may be a
                // deposed or isolated leader
                if guess == n {
                    guess = n % cluster_size as NodeId + 1;
                }
            }
            let backoff = 5 + client_rng.random_range(0..=10u64) + 5 * u64::from(p.attempts.min(6));
            let target = guess;
            let outcome = if down_until.contains_key(&target) {
                guess = target % cluster_size as NodeId + 1;
                p.next_try = tick + backoff;
                "unreachable".to_string()
            } else {
                match nodes.get_mut(&target).unwrap().submit_tx(p.tx.clone()) {
                    Ok((acc, msgs)) => {
                        outbox.extend(msgs);
                        p.next_try = tick + opts.commit_timeout;
                        p.waiting_on = Some(target);
                        match acc {
                            Accepted::Appended { index } => format!("appended@{target}:{index}"),
                            Accepted::AlreadyInLog { index } => format!("in_log@{target}:{index}"),
                        }
                    }
                    Err(nl) => {
                        guess = nl.hint.filter(|&h| h != target).unwrap_or(target % cluster_size as NodeId + 1);
                        p.next_try = tick + backoff;
                        match nl.hint {
                            Some(h) => format!("not_leader@{target} hint={h}"),
                            None => format!("not_leader@{target}"),
                        }
                    }
                }
            };
            events.push(TraceEvent { tick, node: 0, event: Event::Submit { tx_id: p.tx.tx_id, outcome } });
        }

        // node bookkeeping
        let committed_before = committed_ids.len();
        for (&id, node) in nodes.iter_mut() {
            for ev in node.drain_events() {
                let event = match ev {
                    NodeEvent::RoleChanged { role, term } => Event::Role { role, term },
                    NodeEvent::TermChanged { term } => Event::Term { term },
                };
                let became_leader = matches!(event, Event::Role { role: Role::Leader, .. });
                events.push(TraceEvent { tick, node: id, event });
                if became_leader {
                    events.push(TraceEvent {
                        tick,
                        node: id,
                        event: Event::LeaderLog { term: node.current_term(), log: entry_view(node.log()) },
                    });
                }
            }
            node.drain_persist();
            for entry in node.drain_applied() {
                events.push(TraceEvent {
                    tick,
                    node: id,
                    event: Event::Apply {
                        index: entry.index,
                        term: entry.term,
                        tx_id: entry.tx.as_ref().map(|t| t.tx_id),
                    },
                });
                if entry.index == committed.len() as u64 + 1 {
                    if let Some(tx) = &entry.tx {
                        committed_ids.insert(tx.tx_id);
                        events.push(TraceEvent {
                            tick,
                            node: 0,
                            event: Event::Committed { tx_id: tx.tx_id, index: entry.index },
                        });
                        cutter.enqueue(tx.clone(), tick);
                    }
                    committed.push(entry);
                }
            }
        }

        if committed_ids.len() != committed_before {
            pending.retain(|_, p| !committed_ids.contains(&p.tx.tx_id));
        }

        for msg in outbox {
            network.send(msg, tick, &mut events);
        }

        for block in cutter.poll(tick) {
            events.push(TraceEvent {
                tick,
                node: 0,
                event: Event::Block {
                    number: block.header.number,
                    block_hash: block.block_hash,
                    previous_hash: block.header.previous_hash,
                    tx_ids: block.transactions.iter().map(|t| t.tx_id).collect(),
                },
            });
            blocks.push(block);
        }

        if opts.snapshot_every > 0 && tick.is_multiple_of(opts.snapshot_every) {
            for (&id, node) in &nodes {
                if !down_until.contains_key(&id) {
                    events.push(TraceEvent {
                        tick,
                        node: id,
                        event: Event::LogSnapshot { log: entry_view(node.log()) },
                    });
                }
            }
        }

        tick += 1;
    }

    for (&id, node) in &nodes {
        events.push(TraceEvent { tick, node: id, event: Event::LogSnapshot { log: entry_view(node.log()) } });
    }

    let outstanding = submitted.iter().filter(|id| !committed_ids.contains(id)).copied().collect();
    SimTrace { cluster_size, final_tick: tick, events, committed, blocks, submitted, outstanding }
}
