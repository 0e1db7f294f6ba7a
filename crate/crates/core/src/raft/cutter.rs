// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

//! Groups Raft-committed transactions into blocks by count or wait time.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::ledger::{Block, BlockHeader, Transaction};
use crate::TICK_MS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchPolicy {
    pub max_tx: usize,
    /// Ticks the oldest queued tx may wait before a block is forced.
    pub max_wait: u64,
}

impl Default for BatchPolicy {
    fn default() -> Self {
        BatchPolicy { max_tx: 10, max_wait: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Queued {
    pub tx: Transaction,
    pub enqueued_at: u64,
}

/// Emits at most one block from the head of `queue` if either trigger fires
/// at tick `now`. The block chains off `tip` and carries `timestamp`.
pub fn cut_block(
    queue: &mut VecDeque<Queued>,
    policy: BatchPolicy,
    tip: &BlockHeader,
    now: u64,
    timestamp: u64,
) -> Option<Block> {
    let max_tx = policy.max_tx.max(1);
    let oldest = queue.front()?.enqueued_at;
    if queue.len() < max_tx && now.saturating_sub(oldest) < policy.max_wait {
        return None;
    }
    let n = queue.len().min(max_tx);
    let txs: Vec<Transaction> = queue.drain(..n).map(|q| q.tx).collect();
    Some(Block::new(tip, tip.hash(), txs, timestamp))
}

/// Stateful cutter tracking the chain tip.
#[derive(Debug, Clone)]
pub struct BlockCutter {
    policy: BatchPolicy,
    tip: BlockHeader,
    queue: VecDeque<Queued>,
    epoch_ms: u64,
    tick_ms: u64,
}

impl BlockCutter {
    /// `epoch_ms` is the wall-clock time of tick 0, used for block timestamps.
    pub fn new(policy: BatchPolicy, tip: BlockHeader, epoch_ms: u64) -> Self {
        BlockCutter { policy, tip, queue: VecDeque::new(), epoch_ms, tick_ms: TICK_MS }
    }

    /// Milliseconds per tick for block timestamps; defaults to the
    /// simulator's tick length.
    pub fn with_tick_ms(mut self, tick_ms: u64) -> Self {
        self.tick_ms = tick_ms;
        self
    }

    pub fn policy(&self) -> BatchPolicy {
        self.policy
    }

    pub fn tip(&self) -> &BlockHeader {
        &self.tip
    }

    pub fn queued(&self) -> usize {
        self.queue.len()
    }

    pub fn enqueue(&mut self, tx: Transaction, now: u64) {
        self.queue.push_back(Queued { tx, enqueued_at: now });
    }

    /// Cuts every block that is due at `now`.
    pub fn poll(&mut self, now: u64) -> Vec<Block> {
        let mut out = Vec::new();
        let ts = self.epoch_ms + now * self.tick_ms;
        while let Some(block) = cut_block(&mut self.queue, self.policy, &self.tip, now, ts) {
            self.tip = block.header.clone();
            out.push(block);
        }
        out
    }

    /// Cuts whatever is queued regardless of triggers.
    pub fn flush(&mut self, now: u64) -> Vec<Block> {
        let forced = BatchPolicy { max_tx: self.policy.max_tx, max_wait: 0 };
        let ts = self.epoch_ms + now * self.tick_ms;
        let mut out = Vec::new();
        while let Some(block) = cut_block(&mut self.queue, forced, &self.tip, now, ts) {
            self.tip = block.header.clone();
            out.push(block);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::create_genesis;
    use crate::ledger::OrgRegistry;
    use crate::{DefectRecord, Importance};
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn genesis() -> BlockHeader {
        let orgs: BTreeSet<String> = ["Org1".to_string()].into();
        create_genesis("ch", &orgs, 0).unwrap().header
    }

    fn tx(i: u64) -> Transaction {
        let reg = OrgRegistry::default().with_org("Org1", "s");
        let rec = DefectRecord {
            record_id: uuid::Uuid::from_u128(i as u128).to_string(),
            sensor_id: "R01_EStop".into(),
            fault_type: "EmergencyStop".into(),
            value: 1.0,
            unit: "bool".into(),
            importance: Importance::Alert,
            timestamp: i,
            shipment_id: None,
            location: None,
            tilt_status: None,
        };
        Transaction::record_defect("ch", &rec, "Org1", &reg).unwrap()
    }

    #[test]
    fn size_trigger_fires_immediately() {
        let mut c = BlockCutter::new(BatchPolicy::default(), genesis(), 0);
        for i in 0..10 {
            c.enqueue(tx(i), 5);
        }
        let blocks = c.poll(5);
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].transactions.len(), 10);
        assert_eq!(blocks[0].header.number, 1);
        assert_eq!(c.queued(), 0);
    }

    #[test]
    fn timeout_trigger_at_max_wait() {
        let mut c = BlockCutter::new(BatchPolicy::default(), genesis(), 0);
        c.enqueue(tx(1), 100);
        assert!(c.poll(119).is_empty());
        let blocks = c.poll(120);
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].transactions.len(), 1);
    }

    #[test]
    fn blocks_chain_off_tip() {
        let g = genesis();
        let mut c = BlockCutter::new(BatchPolicy { max_tx: 2, max_wait: 5 }, g.clone(), 0);
        for i in 0..5 {
            c.enqueue(tx(i), 0);
        }
        let mut blocks = c.poll(0);
        blocks.extend(c.poll(5));
        assert_eq!(blocks.len(), 3);
        assert_eq!(blocks[0].header.previous_hash, g.hash());
        for w in blocks.windows(2) {
            assert_eq!(w[1].header.previous_hash, w[0].block_hash);
            assert_eq!(w[1].header.number, w[0].header.number + 1);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn concatenation_preserves_order(
            max_tx in 1usize..12,
            max_wait in 0u64..30,
            gaps in prop::collection::vec(0u64..15, 0..60),
        ) {
            let mut c = BlockCutter::new(BatchPolicy { max_tx, max_wait }, genesis(), 0);
            let mut now = 0;
            let mut blocks = Vec::new();
            let mut sent = Vec::new();
            for (i, gap) in gaps.iter().enumerate() {
                for t in now..now + gap {
                    blocks.extend(c.poll(t));
                }
                now += gap;
                let t = tx(i as u64);
                sent.push(t.tx_id);
                c.enqueue(t, now);
                blocks.extend(c.poll(now));
            }
            for t in now..=now + max_wait {
                blocks.extend(c.poll(t));
            }
            prop_assert_eq!(c.queued(), 0);
            let got: Vec<_> = blocks.iter().flat_map(|b| b.transactions.iter().map(|t| t.tx_id)).collect();
            prop_assert_eq!(got, sent);
            for b in &blocks {
                prop_assert!(!b.transactions.is_empty() && b.transactions.len() <= max_tx);
            }
        }
    }
}
