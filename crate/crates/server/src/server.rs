// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

//! Assembles a running API server: ledger, orderer connection, committer,
//! optional simulator, and the HTTP listener.

use std::collections::{BTreeMap, BTreeSet};
use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use defectchain_core::gateway::RuleSet;
use defectchain_core::ledger::{create_genesis, Channel, ChannelStore, OrgRegistry};
use defectchain_core::raft::{NodeId, RaftConfig};
use defectchain_core::telemetry::SimWorld;
use tokio::net::TcpListener;
use tokio::task::JoinHandle;

use crate::app::{spawn_committer, AppConfig, AppState};
use crate::orderer::{spawn_local_cluster, OrdererClient};
use crate::simctl::SimHandle;

/// Fixed so that every process and restart derives the same genesis block.
pub const GENESIS_TIMESTAMP_MS: u64 = 1_714_521_600_000;

/// Simulator exposed under `/api/sim/*`.
pub struct SimSetup {
    pub world: SimWorld,
    pub rules: RuleSet,
    /// Wall-clock time per simulation tick.
    pub step: Duration,
    /// Org the simulated gateway submits as.
    pub org: String,
}

pub struct ServeOptions {
    pub listen: SocketAddr,
    pub registry: OrgRegistry,
    pub channel_id: String,
    pub members: BTreeSet<String>,
    /// Ledger files and, for the in-process cluster, Raft logs. Memory only
    /// when absent.
    pub data_dir: Option<PathBuf>,
    /// Remote orderer nodes. When empty a cluster of `local_nodes` runs
    /// inside this process.
    pub orderers: BTreeMap<NodeId, SocketAddr>,
    pub local_nodes: usize,
    pub raft: RaftConfig,
    pub raft_tick: Duration,
    pub seed: u64,
    pub app: AppConfig,
    pub sim: Option<SimSetup>,
}

impl ServeOptions {
    pub fn new(listen: SocketAddr, registry: OrgRegistry, channel_id: &str, members: BTreeSet<String>) -> Self {
        ServeOptions {
            listen,
            registry,
            channel_id: channel_id.to_string(),
            members,
            data_dir: None,
            orderers: BTreeMap::new(),
            local_nodes: 3,
            raft: RaftConfig::default(),
            raft_tick: Duration::from_millis(1),
            seed: 0,
            app: AppConfig::default(),
            sim: None,
        }
    }
}

pub struct RunningServer {
    pub addr: SocketAddr,
    pub state: Arc<AppState>,
    pub tasks: Vec<JoinHandle<()>>,
}

impl RunningServer {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn abort(&self) {
        for t in &self.tasks {
            t.abort();
        }
    }
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        self.abort();
    }
}

fn other(e: impl std::fmt::Display) -> io::Error {
    io::Error::other(e.to_string())
}

pub async fn start(opts: ServeOptions) -> io::Result<RunningServer> {
    let registry = Arc::new(opts.registry);
    let genesis = create_genesis(&opts.channel_id, &opts.members, GENESIS_TIMESTAMP_MS).map_err(other)?;
    let (channel, store) = match &opts.data_dir {
        Some(dir) => {
            let (ch, store, _) = ChannelStore::open(&dir.join("ledger"), genesis, registry.clone()).map_err(other)?;
            (ch, Some(store))
        }
        None => (Channel::from_genesis(genesis, registry.clone()).map_err(other)?, None),
    };

    let mut tasks = Vec::new();
    let budget = opts.app.commit_timeout;
    let orderer = if opts.orderers.is_empty() {
        let raft_dir = opts.data_dir.as_ref().map(|d| d.join("raft"));
        let (nodes, node_tasks) =
            spawn_local_cluster(opts.local_nodes, opts.raft, opts.raft_tick, opts.seed, raft_dir.as_deref())?;
        tasks.extend(node_tasks);
        OrdererClient::local(nodes, budget)
    } else {
        OrdererClient::remote(opts.orderers, budget)
    };

    let state = AppState::new(opts.app, channel, store, orderer);
    tasks.push(spawn_committer(state.clone()));
    if let Some(sim) = opts.sim {
        state.attach_sim(SimHandle::spawn(state.clone(), sim.world, sim.rules, sim.step, sim.org));
    }

    let listener = TcpListener::bind(opts.listen).await?;
    let addr = listener.local_addr()?;
    let app = crate::api::router(state.clone());
    tasks.push(tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            eprintln!("api: server stopped: {e}");
        }
    }));
    Ok(RunningServer { addr, state, tasks })
}
