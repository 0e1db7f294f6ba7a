// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

//! Length-prefixed canonical JSON frames over TCP: a 4-byte big-endian
//! length followed by the frame body.

use std::collections::BTreeMap;
use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use defectchain_core::canonical_bytes;
use defectchain_core::ledger::Transaction;
use defectchain_core::raft::{Accepted, FileStorage, LogEntry, NodeId, NotLeader, RaftConfig, RaftMessage, RaftNode};
use serde::{Deserialize, Serialize};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::mpsc;

use super::driver::{run_node, NodeInput, Outbound};

pub const MAX_FRAME: usize = 16 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "frame")]
pub enum Frame {
    Raft { msg: RaftMessage },
    Submit { tx: Transaction },
    SubmitReply { result: Result<Accepted, NotLeader> },
    Subscribe { from: u64 },
    Entry { entry: LogEntry },
}

pub async fn write_frame<W: AsyncWriteExt + Unpin>(w: &mut W, frame: &Frame) -> io::Result<()> {
    let body = canonical_bytes(frame);
    let mut buf = Vec::with_capacity(body.len() + 4);
    buf.extend_from_slice(&(body.len() as u32).to_be_bytes());
    buf.extend_from_slice(&body);
    w.write_all(&buf).await
}

pub async fn read_frame<R: AsyncReadExt + Unpin>(r: &mut R) -> io::Result<Frame> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len).await?;
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "frame too large"));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body).await?;
    serde_json::from_slice(&body).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
}

#[derive(Debug, Clone)]
pub struct OrdererOptions {
    pub id: NodeId,
    pub listen: SocketAddr,
    /// Every other node's address.
    pub peers: BTreeMap<NodeId, SocketAddr>,
    pub data_dir: Option<PathBuf>,
    pub raft: RaftConfig,
    pub tick: Duration,
    pub seed: u64,
}

/// Runs one orderer node serving peers and clients on `opts.listen` until
/// the process exits.
pub async fn serve_orderer(opts: OrdererOptions) -> io::Result<()> {
    let listener = TcpListener::bind(opts.listen).await?;
    serve_orderer_on(listener, opts).await
}

pub async fn serve_orderer_on(listener: TcpListener, opts: OrdererOptions) -> io::Result<()> {
    let mut ids: Vec<NodeId> = opts.peers.keys().copied().collect();
    ids.push(opts.id);
    ids.sort_unstable();
    ids.dedup();

    let (node, storage) = match &opts.data_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let (storage, durable) = FileStorage::open(dir.join(format!("raft-{}.log", opts.id)))?;
            let node = RaftNode::restore(opts.id, ids, opts.raft, opts.seed, 0, durable);
            (node, Some(storage))
        }
        None => (RaftNode::new(opts.id, ids, opts.raft, opts.seed, 0), None),
    };

    let mut links: BTreeMap<NodeId, mpsc::UnboundedSender<RaftMessage>> = BTreeMap::new();
    for (&peer, &addr) in &opts.peers {
        if peer == opts.id {
            continue;
        }
        let (tx, rx) = mpsc::unbounded_channel();
        tokio::spawn(peer_link(addr, rx));
        links.insert(peer, tx);
    }
    let outbound: Outbound = Arc::new(move |msg: RaftMessage| {
        if let Some(link) = links.get(&msg.to) {
            let _ = link.send(msg);
        }
    });

    let (inbox_tx, inbox_rx) = mpsc::unbounded_channel();
    tokio::spawn(run_node(node, storage, inbox_rx, outbound, opts.tick));

    loop {
        let (stream, _) = listener.accept().await?;
        let _ = stream.set_nodelay(true);
        tokio::spawn(serve_connection(stream, inbox_tx.clone()));
    }
}

/// Sends Raft messages to one peer, reconnecting as needed. Messages that
/// arrive while the peer is unreachable are dropped; Raft retransmits.
async fn peer_link(addr: SocketAddr, mut rx: mpsc::UnboundedReceiver<RaftMessage>) {
    let mut conn: Option<TcpStream> = None;
    while let Some(msg) = rx.recv().await {
        if conn.is_none() {
            match tokio::time::timeout(Duration::from_millis(200), TcpStream::connect(addr)).await {
                Ok(Ok(s)) => {
                    let _ = s.set_nodelay(true);
                    conn = Some(s);
                }
                _ => continue,
            }
        }
        let stream = conn.as_mut().expect("connected above");
        if write_frame(stream, &Frame::Raft { msg }).await.is_err() {
            conn = None;
        }
    }
}

async fn serve_connection(stream: TcpStream, inbox: mpsc::UnboundedSender<NodeInput>) {
    let (mut reader, mut writer) = stream.into_split();
    let (out_tx, mut out_rx) = mpsc::unbounded_channel::<Frame>();
    let writer_task = tokio::spawn(async move {
        while let Some(f) = out_rx.recv().await {
            if write_frame(&mut writer, &f).await.is_err() {
                break;
            }
        }
    });
    while let Ok(frame) = read_frame(&mut reader).await {
        match frame {
            Frame::Raft { msg } => {
                if inbox.send(NodeInput::Raft(msg)).is_err() {
                    break;
                }
            }
            Frame::Submit { tx } => {
                let (reply, rx) = tokio::sync::oneshot::channel();
                if inbox.send(NodeInput::Submit(tx, reply)).is_err() {
                    break;
                }
                let out = out_tx.clone();
                tokio::spawn(async move {
                    if let Ok(result) = rx.await {
                        let _ = out.send(Frame::SubmitReply { result });
                    }
                });
            }
            Frame::Subscribe { from } => {
                let (etx, mut erx) = mpsc::unbounded_channel();
                if inbox.send(NodeInput::Subscribe(from, etx)).is_err() {
                    break;
                }
                let out = out_tx.clone();
                tokio::spawn(async move {
                    while let Some(entry) = erx.recv().await {
                        if out.send(Frame::Entry { entry }).is_err() {
                            break;
                        }
                    }
                });
            }
            Frame::SubmitReply { .. } | Frame::Entry { .. } => break,
        }
    }
    // peer went away; forwarding tasks notice on their next send
    writer_task.abort();
}
