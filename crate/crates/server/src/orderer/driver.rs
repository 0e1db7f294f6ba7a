// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

use std::sync::Arc;
use std::time::Duration;

use defectchain_core::ledger::Transaction;
use defectchain_core::raft::{Accepted, FileStorage, LogEntry, NodeId, NotLeader, RaftMessage, RaftNode};
use tokio::sync::{mpsc, oneshot};
use tokio::time::{interval, Instant, MissedTickBehavior};

pub enum NodeInput {
    Raft(RaftMessage),
    Submit(Transaction, oneshot::Sender<Result<Accepted, NotLeader>>),
    /// Stream committed entries from this index on.
    Subscribe(u64, mpsc::UnboundedSender<LogEntry>),
    Shutdown,
}

#[derive(Clone)]
pub struct NodeHandle {
    pub id: NodeId,
    pub inbox: mpsc::UnboundedSender<NodeInput>,
}

impl NodeHandle {
    pub async fn submit(&self, tx: Transaction) -> Option<Result<Accepted, NotLeader>> {
        let (reply, rx) = oneshot::channel();
        self.inbox.send(NodeInput::Submit(tx, reply)).ok()?;
        rx.await.ok()
    }
}

pub type Outbound = Arc<dyn Fn(RaftMessage) + Send + Sync>;

struct Subscriber {
    next: u64,
    tx: mpsc::UnboundedSender<LogEntry>,
}

/// Drives `node` until its inbox closes or it receives `Shutdown`. Durable
/// state is written (and fsynced) before any message from the same step
/// leaves the node.
pub async fn run_node(
    mut node: RaftNode,
    mut storage: Option<FileStorage>,
    mut inbox: mpsc::UnboundedReceiver<NodeInput>,
    outbound: Outbound,
    tick: Duration,
) {
    let start = Instant::now();
    let tick_ms = tick.as_millis().max(1) as u64;
    let mut timer = interval(tick);
    timer.set_missed_tick_behavior(MissedTickBehavior::Skip);
    let mut subs: Vec<Subscriber> = Vec::new();
    loop {
        let now = || start.elapsed().as_millis() as u64 / tick_ms;
        let out = tokio::select! {
            _ = timer.tick() => node.tick(now()),
            input = inbox.recv() => match input {
                None | Some(NodeInput::Shutdown) => break,
                Some(NodeInput::Raft(msg)) => node.handle(msg, now()),
                Some(NodeInput::Submit(tx, reply)) => match node.submit_tx(tx) {
                    Ok((acc, msgs)) => {
                        persist(&mut node, &mut storage);
                        let _ = reply.send(Ok(acc));
                        msgs
                    }
                    Err(e) => {
                        let _ = reply.send(Err(e));
                        Vec::new()
                    }
                },
                Some(NodeInput::Subscribe(from, tx)) => {
                    subs.push(Subscriber { next: from.max(1), tx });
                    Vec::new()
                }
            },
        };
        persist(&mut node, &mut storage);
        for m in out {
            outbound(m);
        }
        node.drain_applied();
        node.drain_events();
        let commit = node.commit_index();
        subs.retain_mut(|s| {
            while s.next <= commit {
                let entry = node.log()[s.next as usize - 1].clone();
                if s.tx.send(entry).is_err() {
                    return false;
                }
                s.next += 1;
            }
            true
        });
    }
}

fn persist(node: &mut RaftNode, storage: &mut Option<FileStorage>) {
    let ops = node.drain_persist();
    if let Some(s) = storage {
        if let Err(e) = s.persist(&ops) {
            // losing durability silently would break Raft; stop the process
            eprintln!("orderer: cannot persist raft state to {}: {e}", s.path().display());
            std::process::exit(2);
        }
    }
}
