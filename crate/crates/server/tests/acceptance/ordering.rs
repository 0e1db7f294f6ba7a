// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, HashSet};

use defectchain_core::raft::sim::{random_workload, run_simulation, Event, NetConfig, SimOptions};
use defectchain_core::raft::BatchPolicy;
use defectchain_core::Hash32;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{ensure, Outcome};

const WORKLOADS: u64 = 100;

pub fn run() -> Outcome {
    let mut total = 0usize;
    let mut blocks = 0usize;
    for w in 0..WORKLOADS {
        let mut rng = ChaCha8Rng::seed_from_u64(0x0bde_0000 + w);
        let n = if rng.random_bool(0.5) { 3 } else { 5 };
        let mut net = NetConfig::lossless(w);
        net.drop_prob = rng.random_range(0.0..0.2);
        let count = rng.random_range(1..200);
        let work = random_workload("defects", count, rng.random_range(50..4_000), w);
        let batch = BatchPolicy { max_tx: rng.random_range(1..16), max_wait: rng.random_range(1..40) };
        let opts = SimOptions { batch, ..SimOptions::default() };
        let t = run_simulation(n, &net, &work, 5_000, &opts);

        // commit order rebuilt from the raw apply events: first application
        // of each index on any node
        let mut by_index: BTreeMap<u64, Option<Hash32>> = BTreeMap::new();
        let mut cut: Vec<(u64, Vec<Hash32>)> = Vec::new();
        for e in &t.events {
            match &e.event {
                Event::Apply { index, tx_id, .. } => {
                    by_index.entry(*index).or_insert(*tx_id);
                }
                Event::Block { number, tx_ids, .. } => cut.push((*number, tx_ids.clone())),
                _ => {}
            }
        }
        let indices: Vec<u64> = by_index.keys().copied().collect();
        ensure!(indices == (1..=indices.len() as u64).collect::<Vec<_>>(), "workload {w}: gap in applied indices");
        let order: Vec<Hash32> = by_index.values().flatten().copied().collect();

        cut.sort_by_key(|(n, _)| *n);
        let numbers: Vec<u64> = cut.iter().map(|(n, _)| *n).collect();
        ensure!(numbers == (1..=cut.len() as u64).collect::<Vec<_>>(), "workload {w}: block numbers not contiguous");
        let concat: Vec<Hash32> = cut.iter().flat_map(|(_, ids)| ids.iter().copied()).collect();
        let unique: HashSet<_> = concat.iter().collect();
        ensure!(unique.len() == concat.len(), "workload {w}: duplicate tx across blocks");
        ensure!(
            concat == order,
            "workload {w}: blocks differ from commit order ({} vs {} txs)",
            concat.len(),
            order.len()
        );

        // the delivered blocks agree with the trace and chain together
        let delivered: Vec<Hash32> = t.blocks.iter().flat_map(|b| b.transactions.iter().map(|x| x.tx_id)).collect();
        ensure!(delivered == concat, "workload {w}: delivered blocks differ from the cut events");
        for pair in t.blocks.windows(2) {
            ensure!(pair[1].header.previous_hash == pair[0].block_hash, "workload {w}: block chain broken");
        }
        for b in &t.blocks {
            ensure!(b.transactions.len() <= batch.max_tx, "workload {w}: block over max_tx");
        }
        total += order.len();
        blocks += cut.len();
    }
    Ok(format!("{WORKLOADS} workloads, {total} txs in {blocks} blocks; block concatenation equals commit order with no gaps or duplicates"))
}
