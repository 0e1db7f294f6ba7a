// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeSet, HashMap};

use defectchain_core::raft::check::check_events;
use defectchain_core::raft::sim::{random_workload, run_simulation, Crash, NetConfig, Partition, SimOptions, SimTrace};

use crate::{ensure, Outcome};

const RUNS: u64 = 520;

/// Cluster size, loss rate and one scripted fault, all derived from the seed.
fn scenario(seed: u64) -> (usize, NetConfig) {
    let n = if seed.is_multiple_of(2) { 3 } else { 5 };
    let mut net = NetConfig::lossless(seed);
    net.drop_prob = [0.0, 0.1, 0.2, 0.3][(seed / 2 % 4) as usize];
    let victim = 1 + seed % n as u64;
    match seed % 4 {
        0 => net.partitions.push(Partition { from: 1_500, until: 3_500, isolated: [victim].into() }),
        1 => net.crashes.push(Crash { at: 1_000 + seed % 700, node: victim, down_for: 900 }),
        2 => {
            // minority and majority sides, then healed
            let side: BTreeSet<u64> = (1..=(n as u64 / 2)).collect();
            net.partitions.push(Partition { from: 800, until: 2_800, isolated: side });
            net.crashes.push(Crash { at: 3_200, node: victim, down_for: 400 });
        }
        _ => {}
    }
    (n, net)
}

/// Every submitted tx appears exactly once in the commit order.
fn exactly_once(t: &SimTrace) -> Result<(), String> {
    let mut count: HashMap<_, usize> = HashMap::new();
    for e in &t.committed {
        if let Some(tx) = &e.tx {
            *count.entry(tx.tx_id).or_default() += 1;
        }
    }
    for id in &t.submitted {
        match count.get(id) {
            Some(1) => {}
            Some(k) => return Err(format!("tx {id} committed {k} times")),
            None => return Err(format!("tx {id} never committed")),
        }
    }
    if count.len() != t.submitted.len() {
        return Err("commit order holds transactions nobody submitted".into());
    }
    Ok(())
}

pub fn run() -> Outcome {
    let mut by_size = [0usize; 2];
    for seed in 0..RUNS {
        let (n, net) = scenario(seed);
        let w = random_workload("defects", 60, 5_000, seed);
        let t = run_simulation(n, &net, &w, 6_000, &SimOptions::default());
        let v = check_events(&t.events);
        ensure!(v.is_empty(), "seed {seed} ({n} nodes, drop {}): {:?}", net.drop_prob, v.first());
        exactly_once(&t).map_err(|e| format!("seed {seed} ({n} nodes, drop {}): {e}", net.drop_prob))?;
        by_size[(n == 5) as usize] += 1;
    }

    // long run: 30% loss, a healed partition, 500 txs over 10^5 ticks
    let mut net = NetConfig::lossless(9_001);
    net.drop_prob = 0.3;
    net.partitions.push(Partition { from: 20_000, until: 35_000, isolated: [1].into() });
    net.crashes.push(Crash { at: 60_000, node: 2, down_for: 5_000 });
    let w = random_workload("defects", 500, 90_000, 9_001);
    let opts = SimOptions { record_messages: false, ..SimOptions::default() };
    let t = run_simulation(3, &net, &w, 100_000, &opts);
    let v = check_events(&t.events);
    ensure!(v.is_empty(), "long run: {:?}", v.first());
    exactly_once(&t).map_err(|e| format!("long run: {e}"))?;

    Ok(format!(
        "{RUNS} seeded runs ({} with 3 nodes, {} with 5; loss 0-30%; crashes and partitions) with zero safety violations and every tx committed once; 3-node 30%-loss run of 500 txs over 100000 ticks committed all",
        by_size[0], by_size[1]
    ))
}
