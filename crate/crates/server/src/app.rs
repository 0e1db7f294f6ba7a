// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

//! Server state: committed ledger, token table, orderer client, and the
//! task that turns committed Raft entries into blocks.

use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock, RwLock};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use defectchain_core::access::{
    require_member, ApiError, ErrorCode, PostResponse, PostStatus, RegistrationToken, TokenTable,
};
use defectchain_core::canonical_bytes;
use defectchain_core::ledger::{Block, Channel, ChannelStore, OrgRegistry, Transaction, TxVerdict, VerifyReport};
use defectchain_core::raft::{BatchPolicy, BlockCutter};
use defectchain_core::{DefectRecord, Hash32};
use tokio::sync::oneshot;
use tokio::task::JoinHandle;
use tokio::time::{interval, Instant, MissedTickBehavior};

use crate::events::EventHub;
use crate::orderer::OrdererClient;
use crate::simctl::SimHandle;

pub type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64))
}

#[derive(Clone)]
pub struct AppConfig {
    /// How long a POST waits for its record to commit before answering 202.
    pub commit_timeout: Duration,
    pub token_ttl_ms: u64,
    pub batch: BatchPolicy,
    /// Block cutter tick; `batch.max_wait` counts these.
    pub cutter_tick: Duration,
    pub event_capacity: usize,
    pub clock: Clock,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            commit_timeout: Duration::from_secs(5),
            token_ttl_ms: defectchain_core::access::DEFAULT_TOKEN_TTL_MS,
            batch: BatchPolicy::default(),
            cutter_tick: Duration::from_millis(5),
            event_capacity: 4096,
            clock: system_clock(),
        }
    }
}

type Waiter = oneshot::Sender<(u64, TxVerdict)>;

pub struct AppState {
    pub config: AppConfig,
    pub registry: Arc<OrgRegistry>,
    channel: RwLock<Channel>,
    store: Mutex<Option<ChannelStore>>,
    tokens: Mutex<TokenTable>,
    orderer: OrdererClient,
    submit_lock: tokio::sync::Mutex<()>,
    waiters: Mutex<HashMap<Hash32, Vec<Waiter>>>,
    pub events: EventHub,
    sim: OnceLock<SimHandle>,
}

impl AppState {
    pub fn new(
        config: AppConfig,
        channel: Channel,
        store: Option<ChannelStore>,
        orderer: OrdererClient,
    ) -> Arc<AppState> {
        let registry = channel.registry().clone();
        Arc::new(AppState {
            tokens: Mutex::new(TokenTable::new(config.token_ttl_ms)),
            events: EventHub::new(config.event_capacity),
            config,
            registry,
            channel: RwLock::new(channel),
            store: Mutex::new(store),
            orderer,
            submit_lock: tokio::sync::Mutex::new(()),
            waiters: Mutex::new(HashMap::new()),
            sim: OnceLock::new(),
        })
    }

    pub fn now_ms(&self) -> u64 {
        (self.config.clock)()
    }

    pub fn attach_sim(&self, sim: SimHandle) {
        let _ = self.sim.set(sim);
    }

    pub fn sim(&self) -> Option<&SimHandle> {
        self.sim.get()
    }

    /// Read access to the committed ledger.
    pub fn with_channel<T>(&self, f: impl FnOnce(&Channel) -> T) -> T {
        f(&self.channel.read().expect("channel lock"))
    }

    pub fn register(&self, org_id: &str, secret: &str) -> Result<RegistrationToken, ApiError> {
        let now = self.now_ms();
        let mut tokens = self.tokens.lock().expect("token lock");
        tokens.purge_expired(now);
        tokens.register(&self.registry, org_id, secret, now, &mut rand::rng())
    }

    /// Resolves a token to a channel-member org: 401 for bad tokens, 403
    /// for orgs outside the channel.
    pub fn authorize(&self, token: Option<&str>) -> Result<String, ApiError> {
        let org = self.tokens.lock().expect("token lock").authorize(token, self.now_ms())?.to_string();
        self.with_channel(|ch| require_member(ch, &org))?;
        Ok(org)
    }

    /// Orders `record` on behalf of `org` and waits for it to commit.
    pub async fn submit_record(&self, org: &str, record: DefectRecord) -> Result<PostResponse, ApiError> {
        let tx = Transaction::record_defect(
            self.with_channel(|c| c.channel_id().to_string()).as_str(),
            &record,
            org,
            &self.registry,
        )
        .ok_or_else(ApiError::forbidden)?;
        let tx_id = tx.tx_id;
        if let Some(block) = self.with_channel(|c| c.committed_in(&record.record_id)) {
            return Ok(PostResponse {
                tx_id: tx_id.to_hex(),
                status: PostStatus::Duplicate,
                block_number: Some(block),
            });
        }
        let (wtx, wrx) = oneshot::channel();
        self.waiters.lock().expect("waiter lock").entry(tx_id).or_default().push(wtx);
        // the record may have committed between the check and the waiter
        if let Some(block) = self.with_channel(|c| c.committed_in(&record.record_id)) {
            let same =
                self.with_channel(|c| c.block(block).is_some_and(|b| b.transactions.iter().any(|t| t.tx_id == tx_id)));
            let status = if same { PostStatus::Committed } else { PostStatus::Duplicate };
            return Ok(PostResponse { tx_id: tx_id.to_hex(), status, block_number: Some(block) });
        }
        let submitted = {
            let _serial = self.submit_lock.lock().await;
            self.orderer.submit(&tx).await
        };
        if submitted.is_err() {
            self.waiters.lock().expect("waiter lock").remove(&tx_id);
            return Err(ApiError::new(ErrorCode::NotLeaderRetry, "no orderer leader available; retry later"));
        }
        match tokio::time::timeout(self.config.commit_timeout, wrx).await {
            Ok(Ok((block, TxVerdict::Valid))) => {
                Ok(PostResponse { tx_id: tx_id.to_hex(), status: PostStatus::Committed, block_number: Some(block) })
            }
            Ok(Ok((_, TxVerdict::DuplicateNoop))) => {
                let block = self.with_channel(|c| c.committed_in(&record.record_id));
                Ok(PostResponse { tx_id: tx_id.to_hex(), status: PostStatus::Duplicate, block_number: block })
            }
            Ok(Ok((_, verdict))) => {
                Err(ApiError::new(ErrorCode::Internal, format!("transaction invalidated: {verdict:?}")))
            }
            _ => Ok(PostResponse { tx_id: tx_id.to_hex(), status: PostStatus::Pending, block_number: None }),
        }
    }

    pub fn query_shipment(&self, org: &str, shipment_id: &str) -> Result<Vec<u8>, ApiError> {
        self.with_channel(|c| c.query_by_shipment(shipment_id, org))
            .map(|v| canonical_bytes(&v))
            .map_err(|_| ApiError::forbidden())
    }

    pub fn query_sensor(&self, org: &str, sensor_id: &str) -> Result<Vec<u8>, ApiError> {
        self.with_channel(|c| c.query_by_sensor(sensor_id, org))
            .map(|v| canonical_bytes(&v))
            .map_err(|_| ApiError::forbidden())
    }

    pub fn block_json(&self, number: u64) -> Result<Vec<u8>, ApiError> {
        self.with_channel(|c| c.block(number).map(canonical_bytes)).ok_or_else(|| ApiError::not_found("block"))
    }

    /// Verifies the persisted files when the ledger is on disk, otherwise
    /// the in-memory chain.
    pub fn verify(&self) -> VerifyReport {
        let store = self.store.lock().expect("store lock");
        match store.as_ref() {
            Some(s) => s.verify(self.registry.clone()).unwrap_or_else(|e| VerifyReport::bad(0, e.to_string())),
            None => self.with_channel(|c| c.verify_chain()),
        }
    }

    pub fn chain_path(&self) -> Option<std::path::PathBuf> {
        self.store.lock().expect("store lock").as_ref().map(|s| s.chain_path().to_path_buf())
    }

    fn notify(&self, tx_id: &Hash32, block: u64, verdict: TxVerdict) {
        for w in self.waiters.lock().expect("waiter lock").remove(tx_id).unwrap_or_default() {
            let _ = w.send((block, verdict));
        }
    }

    fn commit(&self, block: Block) {
        let committed = {
            let mut ch = self.channel.write().expect("channel lock");
            let b = match ch.commit_block(block) {
                Ok(b) => b.clone(),
                Err(e) => {
                    eprintln!("peer: block rejected: {e}");
                    return;
                }
            };
            if let Some(store) = self.store.lock().expect("store lock").as_mut() {
                if let Err(e) = store.append(&b).and_then(|_| store.write_snapshot(&ch)) {
                    eprintln!("peer: cannot persist block {}: {e}", b.header.number);
                }
            }
            b
        };
        let number = committed.header.number;
        let mut waiters = self.waiters.lock().expect("waiter lock");
        for (tx, verdict) in committed.transactions.iter().zip(&committed.verdicts) {
            for w in waiters.remove(&tx.tx_id).unwrap_or_default() {
                let _ = w.send((number, *verdict));
            }
            if *verdict == TxVerdict::Valid {
                if let Some(rec) = tx.record() {
                    self.events.publish_defect(&rec, number);
                }
            }
        }
    }
}

/// Consumes committed orderer entries, cuts blocks, and commits them.
pub fn spawn_committer(state: Arc<AppState>) -> JoinHandle<()> {
    tokio::spawn(async move {
        let next = Arc::new(AtomicU64::new(1));
        let mut entries = state.orderer.subscribe(next.clone());
        let tick = state.config.cutter_tick.max(Duration::from_millis(1));
        let tick_ms = tick.as_millis() as u64;
        let start = Instant::now();
        let tip = state.with_channel(|c| c.tip().header.clone());
        let mut cutter = BlockCutter::new(state.config.batch, tip, state.now_ms()).with_tick_ms(tick_ms);
        let mut queued: HashSet<Hash32> = HashSet::new();
        let mut timer = interval(tick);
        timer.set_missed_tick_behavior(MissedTickBehavior::Skip);
        loop {
            tokio::select! {
                entry = entries.recv() => {
                    let Some(entry) = entry else { break };
                    if entry.index != next.load(Ordering::SeqCst) {
                        continue;
                    }
                    next.fetch_add(1, Ordering::SeqCst);
                    if let Some(tx) = entry.tx {
                        if queued.contains(&tx.tx_id) {
                            continue;
                        }
                        let committed = tx.record().and_then(|r| state.with_channel(|c| c.committed_in(&r.record_id)));
                        match committed {
                            // replayed after a restart, or the same record from another org
                            Some(block) => state.notify(&tx.tx_id, block, TxVerdict::DuplicateNoop),
                            None => {
                                queued.insert(tx.tx_id);
                                cutter.enqueue(tx, start.elapsed().as_millis() as u64 / tick_ms);
                            }
                        }
                    }
                }
                _ = timer.tick() => {}
            }
            for block in cutter.poll(start.elapsed().as_millis() as u64 / tick_ms) {
                state.commit(block);
            }
        }
    })
}
