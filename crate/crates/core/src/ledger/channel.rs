// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;

use super::block::{create_genesis, Block, ChannelConfig, Transaction, TxOp, TxVerdict};
use super::identity::OrgRegistry;
use super::{LedgerError, VerifyReport};
use crate::canonical::{decode_canonical, sha256, Hash32};
use crate::gateway::DefectRecord;

pub(crate) type Index = BTreeMap<String, Vec<String>>;

/// One channel: its chain, world state and indexes.
#[derive(Debug, Clone)]
pub struct Channel {
    config: ChannelConfig,
    registry: Arc<OrgRegistry>,
    chain: Vec<Block>,
    world_state: BTreeMap<String, DefectRecord>,
    by_shipment: Index,
    by_sensor: Index,
    /// record id → number of the block that committed it.
    committed_in: BTreeMap<String, u64>,
}

impl Channel {
    /// Creates a channel with a fresh genesis block.
    pub fn create(
        channel_id: &str,
        member_orgs: &BTreeSet<String>,
        registry: Arc<OrgRegistry>,
        timestamp: u64,
    ) -> Result<Self, LedgerError> {
        let genesis = create_genesis(channel_id, member_orgs, timestamp)?;
        Self::from_genesis(genesis, registry)
    }

    pub fn from_genesis(genesis: Block, registry: Arc<OrgRegistry>) -> Result<Self, LedgerError> {
        let config = check_genesis(&genesis).map_err(LedgerError::BadGenesis)?;
        Ok(Channel {
            config,
            registry,
            chain: vec![genesis],
            world_state: BTreeMap::new(),
            by_shipment: BTreeMap::new(),
            by_sensor: BTreeMap::new(),
            committed_in: BTreeMap::new(),
        })
    }

    /// Rebuilds a channel by validating and applying `blocks` from genesis.
    /// On failure returns the number of the first block that does not check
    /// out, with the reason.
    pub fn replay(blocks: Vec<Block>, registry: Arc<OrgRegistry>) -> Result<Self, (u64, String)> {
        let mut it = blocks.into_iter();
        let genesis = it.next().ok_or((0, "empty chain".to_string()))?;
        if !genesis.verdicts.is_empty() {
            return Err((0, "genesis carries verdicts".into()));
        }
        let mut channel = Self::from_genesis(genesis, registry).map_err(|e| (0, e.to_string()))?;
        for (position, block) in (1u64..).zip(it) {
            let stored = block.verdicts.clone();
            if let Err(e) = channel.commit_block(block) {
                return Err((position, e.to_string()));
            }
            if channel.tip().verdicts != stored {
                return Err((position, "stored verdicts disagree with validation".into()));
            }
        }
        Ok(channel)
    }

    pub fn channel_id(&self) -> &str {
        &self.config.channel_id
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.config
    }

    pub fn registry(&self) -> &Arc<OrgRegistry> {
        &self.registry
    }

    pub fn is_member(&self, org: &str) -> bool {
        self.config.member_orgs.contains(org)
    }

    pub fn chain(&self) -> &[Block] {
        &self.chain
    }

    pub fn block(&self, number: u64) -> Option<&Block> {
        self.chain.get(usize::try_from(number).ok()?)
    }

    /// Number of blocks including genesis.
    pub fn height(&self) -> u64 {
        self.chain.len() as u64
    }

    pub fn tip(&self) -> &Block {
        self.chain.last().expect("chain always holds genesis")
    }

    pub fn world_state(&self) -> &BTreeMap<String, DefectRecord> {
        &self.world_state
    }

    pub(crate) fn shipment_index(&self) -> &Index {
        &self.by_shipment
    }

    pub(crate) fn sensor_index(&self) -> &Index {
        &self.by_sensor
    }

    pub fn contains_record(&self, record_id: &str) -> bool {
        self.world_state.contains_key(record_id)
    }

    /// Block that committed `record_id`, if any.
    pub fn committed_in(&self, record_id: &str) -> Option<u64> {
        self.committed_in.get(record_id).copied()
    }

    /// Chaincode validation of one transaction against committed state.
    pub fn validate_tx(&self, tx: &Transaction) -> TxVerdict {
        self.validate_against(tx, &HashSet::new())
    }

    fn validate_against(&self, tx: &Transaction, in_block: &HashSet<String>) -> TxVerdict {
        if !self.is_member(&tx.submitter_org) {
            return TxVerdict::NotAMember;
        }
        if !self.registry.verify(&tx.submitter_org, tx.payload.as_bytes(), &tx.signature) {
            return TxVerdict::BadSignature;
        }
        let Some(record) = self.parse_payload(tx) else {
            return TxVerdict::MalformedPayload;
        };
        if self.world_state.contains_key(&record.record_id) || in_block.contains(&record.record_id) {
            return TxVerdict::DuplicateNoop;
        }
        TxVerdict::Valid
    }

    fn parse_payload(&self, tx: &Transaction) -> Option<DefectRecord> {
        if tx.channel_id != self.config.channel_id || tx.op != TxOp::RecordDefect {
            return None;
        }
        if tx.tx_id != sha256(tx.payload.as_bytes()) {
            return None;
        }
        let record: DefectRecord = decode_canonical(tx.payload.as_bytes()).ok()?;
        record.validate().ok()?;
        Some(record)
    }

    /// Appends an ordered block. Hash or numbering mismatches refuse the
    /// block and leave the channel untouched; invalid transactions are kept
    /// in the block with their verdicts and never applied.
    pub fn commit_block(&mut self, mut block: Block) -> Result<&Block, LedgerError> {
        let broken =
            |reason: &str| LedgerError::BrokenChain { number: block.header.number, reason: reason.to_string() };
        if block.header.number != self.height() {
            return Err(broken("unexpected block number"));
        }
        if block.header.previous_hash != self.tip().block_hash {
            return Err(broken("previous_hash does not match the chain tip"));
        }
        if block.header.channel_id != self.config.channel_id {
            return Err(broken("wrong channel"));
        }
        if block.config.is_some() || block.transactions.is_empty() {
            return Err(broken("non-genesis blocks carry transactions only"));
        }
        block.check_hashes().map_err(|e| broken(&e))?;

        let mut in_block = HashSet::new();
        let mut verdicts = Vec::with_capacity(block.transactions.len());
        let mut applied = Vec::new();
        for tx in &block.transactions {
            let verdict = self.validate_against(tx, &in_block);
            if verdict == TxVerdict::Valid {
                let record = self.parse_payload(tx).expect("validated payload parses");
                in_block.insert(record.record_id.clone());
                applied.push(record);
            }
            verdicts.push(verdict);
        }
        let number = block.header.number;
        for record in applied {
            self.apply(record, number);
        }
        block.verdicts = verdicts;
        self.chain.push(block);
        Ok(self.tip())
    }

    fn apply(&mut self, record: DefectRecord, block: u64) {
        let id = record.record_id.clone();
        if let Some(s) = &record.shipment_id {
            self.by_shipment.entry(s.clone()).or_default().push(id.clone());
        }
        self.by_sensor.entry(record.sensor_id.clone()).or_default().push(id.clone());
        self.committed_in.insert(id.clone(), block);
        self.world_state.insert(id, record);
    }

    fn collect(&self, ids: Option<&Vec<String>>) -> Vec<DefectRecord> {
        let mut out: Vec<DefectRecord> =
            ids.into_iter().flatten().filter_map(|id| self.world_state.get(id).cloned()).collect();
        out.sort_by(|a, b| (a.timestamp, &a.record_id).cmp(&(b.timestamp, &b.record_id)));
        out
    }

    /// Committed records for a shipment, ascending by (timestamp, record_id).
    pub fn query_by_shipment(&self, shipment_id: &str, org: &str) -> Result<Vec<DefectRecord>, LedgerError> {
        if !self.is_member(org) {
            return Err(LedgerError::NotAMember);
        }
        Ok(self.collect(self.by_shipment.get(shipment_id)))
    }

    pub fn query_by_sensor(&self, sensor_id: &str, org: &str) -> Result<Vec<DefectRecord>, LedgerError> {
        if !self.is_member(org) {
            return Err(LedgerError::NotAMember);
        }
        Ok(self.collect(self.by_sensor.get(sensor_id)))
    }

    /// Recomputes every hash and link from genesis, re-validates every
    /// transaction, and compares the replayed world state and indexes with
    /// the ones held in memory.
    pub fn verify_chain(&self) -> VerifyReport {
        let replayed = match Channel::replay(self.chain.clone(), self.registry.clone()) {
            Ok(c) => c,
            Err((n, reason)) => return VerifyReport::bad(n, reason),
        };
        match replayed.diff_state(&self.world_state, &self.by_shipment, &self.by_sensor) {
            Some((n, reason)) => VerifyReport::bad(n, reason),
            None => VerifyReport::ok(),
        }
    }

    /// Compares externally held state with this channel's. Returns the
    /// earliest block the disagreement can be traced to.
    pub(crate) fn diff_state(
        &self,
        world_state: &BTreeMap<String, DefectRecord>,
        by_shipment: &Index,
        by_sensor: &Index,
    ) -> Option<(u64, String)> {
        let tip = self.height() - 1;
        let block_of = |id: &str| self.committed_in(id).unwrap_or(tip);
        let mut worst: Option<(u64, String)> = None;
        let mut note = |n: u64, reason: String| {
            if worst.as_ref().is_none_or(|(w, _)| n < *w) {
                worst = Some((n, reason));
            }
        };
        for (id, rec) in &self.world_state {
            if world_state.get(id) != Some(rec) {
                note(block_of(id), format!("world state entry {id} differs from replay"));
            }
        }
        for id in world_state.keys().filter(|id| !self.world_state.contains_key(*id)) {
            note(tip, format!("world state entry {id} not produced by replay"));
        }
        for (name, mine, theirs) in
            [("shipment", &self.by_shipment, by_shipment), ("sensor", &self.by_sensor, by_sensor)]
        {
            let keys: BTreeSet<&String> = mine.keys().chain(theirs.keys()).collect();
            for k in keys {
                let (a, b) = (mine.get(k), theirs.get(k));
                if a != b {
                    let n =
                        a.into_iter().chain(b).flatten().filter_map(|id| self.committed_in(id)).min().unwrap_or(tip);
                    note(n, format!("{name} index entry {k} differs from replay"));
                }
            }
        }
        worst
    }

    pub fn tip_hash(&self) -> Hash32 {
        self.tip().block_hash
    }
}

fn check_genesis(genesis: &Block) -> Result<ChannelConfig, String> {
    let h = &genesis.header;
    if h.number != 0 || h.previous_hash != Hash32::ZERO {
        return Err("genesis must be block 0 with a zero previous hash".into());
    }
    let config = genesis.config.clone().ok_or("genesis must carry the channel config")?;
    if config.member_orgs.is_empty() {
        return Err("empty membership".into());
    }
    if config.channel_id != h.channel_id || !genesis.transactions.is_empty() {
        return Err("genesis config does not match its header".into());
    }
    genesis.check_hashes()?;
    Ok(config)
}
