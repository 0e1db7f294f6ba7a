// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use defectchain_core::ledger::Transaction;
use defectchain_core::raft::{Accepted, FileStorage, LogEntry, NodeId, NotLeader, RaftConfig, RaftMessage, RaftNode};
use tokio::net::TcpStream;
use tokio::sync::mpsc;
use tokio::task::JoinHandle;
use tokio::time::{sleep, timeout, Instant};

use super::driver::{run_node, NodeHandle, NodeInput, Outbound};
use super::wire::{read_frame, write_frame, Frame};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubmitFailure;

impl std::fmt::Display for SubmitFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("no orderer leader reachable within the retry budget")
    }
}

impl std::error::Error for SubmitFailure {}

enum Backend {
    Local(BTreeMap<NodeId, NodeHandle>),
    Remote(BTreeMap<NodeId, SocketAddr>),
}

/// Client view of the ordering service: submits to the leader (following
/// redirect hints) and merges the committed-entry streams of every node.
pub struct OrdererClient {
    backend: Backend,
    guess: AtomicU64,
    budget: Duration,
}

impl OrdererClient {
    pub fn local(nodes: Vec<NodeHandle>, budget: Duration) -> Self {
        let first = nodes.first().map_or(1, |n| n.id);
        OrdererClient {
            backend: Backend::Local(nodes.into_iter().map(|n| (n.id, n)).collect()),
            guess: AtomicU64::new(first),
            budget,
        }
    }

    pub fn remote(nodes: BTreeMap<NodeId, SocketAddr>, budget: Duration) -> Self {
        let first = nodes.keys().next().copied().unwrap_or(1);
        OrdererClient { backend: Backend::Remote(nodes), guess: AtomicU64::new(first), budget }
    }

    pub fn node_ids(&self) -> Vec<NodeId> {
        match &self.backend {
            Backend::Local(m) => m.keys().copied().collect(),
            Backend::Remote(m) => m.keys().copied().collect(),
        }
    }

    fn next_after(&self, id: NodeId) -> NodeId {
        let ids = self.node_ids();
        ids.iter().copied().find(|&n| n > id).or(ids.first().copied()).unwrap_or(id)
    }

    pub async fn submit(&self, tx: &Transaction) -> Result<Accepted, SubmitFailure> {
        let deadline = Instant::now() + self.budget;
        let mut target = self.guess.load(Ordering::Relaxed);
        let mut backoff = Duration::from_millis(20);
        let mut followed_hint = false;
        loop {
            match self.try_submit(target, tx).await {
                Some(Ok(acc)) => {
                    self.guess.store(target, Ordering::Relaxed);
                    return Ok(acc);
                }
                Some(Err(NotLeader { hint: Some(h) })) if h != target && !followed_hint => {
                    target = h;
                    followed_hint = true;
                    continue;
                }
                _ => {
                    if Instant::now() + backoff > deadline {
                        return Err(SubmitFailure);
                    }
                    target = self.next_after(target);
                    followed_hint = false;
                    sleep(backoff).await;
                    backoff = (backoff * 2).min(Duration::from_millis(200));
                }
            }
        }
    }

    async fn try_submit(&self, id: NodeId, tx: &Transaction) -> Option<Result<Accepted, NotLeader>> {
        match &self.backend {
            Backend::Local(nodes) => nodes.get(&id)?.submit(tx.clone()).await,
            Backend::Remote(nodes) => {
                let addr = *nodes.get(&id)?;
                let work = async {
                    let mut s = TcpStream::connect(addr).await.ok()?;
                    let _ = s.set_nodelay(true);
                    write_frame(&mut s, &Frame::Submit { tx: tx.clone() }).await.ok()?;
                    match read_frame(&mut s).await.ok()? {
                        Frame::SubmitReply { result } => Some(result),
                        _ => None,
                    }
                };
                timeout(Duration::from_secs(2), work).await.ok().flatten()
            }
        }
    }

    /// Committed entries from every node, starting at `next` (read again on
    /// each reconnect). Consumers keep `next` current and drop entries they
    /// have already seen.
    pub fn subscribe(&self, next: Arc<AtomicU64>) -> mpsc::UnboundedReceiver<LogEntry> {
        let (tx, rx) = mpsc::unbounded_channel();
        match &self.backend {
            Backend::Local(nodes) => {
                for n in nodes.values() {
                    let _ = n.inbox.send(NodeInput::Subscribe(next.load(Ordering::SeqCst), tx.clone()));
                }
            }
            Backend::Remote(nodes) => {
                for &addr in nodes.values() {
                    tokio::spawn(remote_subscription(addr, next.clone(), tx.clone()));
                }
            }
        }
        rx
    }
}

async fn remote_subscription(addr: SocketAddr, next: Arc<AtomicU64>, out: mpsc::UnboundedSender<LogEntry>) {
    loop {
        if out.is_closed() {
            return;
        }
        if let Ok(mut s) = TcpStream::connect(addr).await {
            let from = next.load(Ordering::SeqCst);
            if write_frame(&mut s, &Frame::Subscribe { from }).await.is_ok() {
                while let Ok(Frame::Entry { entry }) = read_frame(&mut s).await {
                    if out.send(entry).is_err() {
                        return;
                    }
                }
            }
        }
        sleep(Duration::from_millis(200)).await;
    }
}

/// Starts an `n`-node cluster inside this process, wired by channels.
pub fn spawn_local_cluster(
    n: usize,
    raft: RaftConfig,
    tick: Duration,
    seed: u64,
    data_dir: Option<&Path>,
) -> std::io::Result<(Vec<NodeHandle>, Vec<JoinHandle<()>>)> {
    let ids: Vec<NodeId> = (1..=n.max(1) as NodeId).collect();
    let mut senders = BTreeMap::new();
    let mut receivers = BTreeMap::new();
    for &id in &ids {
        let (tx, rx) = mpsc::unbounded_channel::<NodeInput>();
        senders.insert(id, tx);
        receivers.insert(id, rx);
    }
    let router = Arc::new(senders.clone());
    let mut tasks = Vec::new();
    for &id in &ids {
        let (node, storage) = match data_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                let (storage, durable) = FileStorage::open(dir.join(format!("raft-{id}.log")))?;
                (RaftNode::restore(id, ids.clone(), raft, seed ^ id, 0, durable), Some(storage))
            }
            None => (RaftNode::new(id, ids.clone(), raft, seed ^ id, 0), None),
        };
        let r = router.clone();
        let outbound: Outbound = Arc::new(move |m: RaftMessage| {
            if let Some(s) = r.get(&m.to) {
                let _ = s.send(NodeInput::Raft(m));
            }
        });
        let rx = receivers.remove(&id).expect("receiver per node");
        tasks.push(tokio::spawn(run_node(node, storage, rx, outbound, tick)));
    }
    let handles = ids.iter().map(|&id| NodeHandle { id, inbox: senders[&id].clone() }).collect();
    Ok((handles, tasks))
}
