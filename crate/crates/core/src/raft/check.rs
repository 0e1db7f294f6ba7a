// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

//! Offline safety checks over simulator traces.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::sim::{EntryView, Event, SimTrace, TraceEvent};
use super::{NodeId, Role};
use crate::canonical::Hash32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub check: String,
    pub tick: u64,
    pub detail: String,
}

fn violation(check: &str, tick: u64, detail: String) -> Violation {
    Violation { check: check.into(), tick, detail }
}

/// At most one leader per term.
pub fn election_safety(events: &[TraceEvent]) -> Vec<Violation> {
    let mut leaders: BTreeMap<u64, NodeId> = BTreeMap::new();
    let mut out = Vec::new();
    for e in events {
        if let Event::Role { role: Role::Leader, term } = e.event {
            match leaders.get(&term) {
                Some(&n) if n != e.node => out.push(violation(
                    "election_safety",
                    e.tick,
                    format!("term {term} has leaders {n} and {}", e.node),
                )),
                _ => {
                    leaders.insert(term, e.node);
                }
            }
        }
    }
    out
}

/// Terms never decrease at any node.
pub fn term_monotonicity(events: &[TraceEvent]) -> Vec<Violation> {
    let mut last: HashMap<NodeId, u64> = HashMap::new();
    let mut out = Vec::new();
    for e in events {
        let term = match e.event {
            Event::Term { term } | Event::Role { term, .. } => term,
            _ => continue,
        };
        let prev = last.entry(e.node).or_insert(0);
        if term < *prev {
            out.push(violation(
                "term_monotonicity",
                e.tick,
                format!("node {} went from term {} to {term}", e.node, *prev),
            ));
        }
        *prev = (*prev).max(term);
    }
    out
}

fn logs_match(a: &[EntryView], b: &[EntryView]) -> Result<(), u64> {
    // highest index where both logs hold the same term
    let common = a.len().min(b.len());
    let Some(top) = (0..common).rev().find(|&i| a[i].0 == b[i].0) else {
        return Ok(());
    };
    match (0..=top).find(|&i| a[i] != b[i]) {
        Some(i) => Err(i as u64 + 1),
        None => Ok(()),
    }
}

/// Logs sampled at the same tick agree on every prefix ending in a shared
/// (index, term) pair.
pub fn log_matching(events: &[TraceEvent]) -> Vec<Violation> {
    let mut by_tick: BTreeMap<u64, Vec<(NodeId, &[EntryView])>> = BTreeMap::new();
    for e in events {
        if let Event::LogSnapshot { log } = &e.event {
            by_tick.entry(e.tick).or_default().push((e.node, log));
        }
    }
    let mut out = Vec::new();
    for (tick, logs) in by_tick {
        for (i, (na, a)) in logs.iter().enumerate() {
            for (nb, b) in &logs[i + 1..] {
                if let Err(index) = logs_match(a, b) {
                    out.push(violation("log_matching", tick, format!("nodes {na} and {nb} diverge at index {index}")));
                }
            }
        }
    }
    out
}

/// Every entry applied before a leader's election is in that leader's log.
pub fn leader_completeness(events: &[TraceEvent]) -> Vec<Violation> {
    let mut committed: Vec<EntryView> = Vec::new();
    let mut out = Vec::new();
    for e in events {
        match &e.event {
            Event::Apply { index, term, tx_id } if *index == committed.len() as u64 + 1 => {
                committed.push((*term, *tx_id));
            }
            Event::LeaderLog { term, log } => {
                let missing =
                    committed.iter().zip(log.iter().chain(std::iter::repeat(&(0, None)))).position(|(c, l)| c != l);
                if let Some(i) = missing {
                    out.push(violation(
                        "leader_completeness",
                        e.tick,
                        format!("leader {} of term {term} lacks committed index {}", e.node, i + 1),
                    ));
                }
            }
            _ => {}
        }
    }
    out
}

/// Every node applies the same entry at each index.
pub fn state_machine_safety(events: &[TraceEvent]) -> Vec<Violation> {
    let mut first: HashMap<u64, EntryView> = HashMap::new();
    let mut next: HashMap<NodeId, u64> = HashMap::new();
    let mut out = Vec::new();
    for e in events {
        match &e.event {
            Event::Restart {} => {
                next.insert(e.node, 1);
            }
            Event::Apply { index, term, tx_id } => {
                let expect = next.entry(e.node).or_insert(1);
                if *index != *expect {
                    out.push(violation(
                        "state_machine_safety",
                        e.tick,
                        format!("node {} applied index {index}, expected {}", e.node, *expect),
                    ));
                }
                *expect = index + 1;
                let view = (*term, *tx_id);
                if let Some(prev) = first.insert(*index, view) {
                    if prev != view {
                        out.push(violation(
                            "state_machine_safety",
                            e.tick,
                            format!("node {} applied a different entry at index {index}", e.node),
                        ));
                    }
                    first.insert(*index, prev);
                }
            }
            _ => {}
        }
    }
    out
}

/// All event-level invariants.
pub fn check_events(events: &[TraceEvent]) -> Vec<Violation> {
    let mut out = election_safety(events);
    out.extend(term_monotonicity(events));
    out.extend(log_matching(events));
    out.extend(leader_completeness(events));
    out.extend(state_machine_safety(events));
    out
}

/// Committed txs are unique, blocks chain with consecutive numbers, and
/// the concatenated block contents equal the commit order.
pub fn check_delivery(trace: &SimTrace) -> Vec<Violation> {
    let mut out = Vec::new();
    let committed = trace.committed_txs();
    let mut seen: HashSet<Hash32> = HashSet::new();
    for id in &committed {
        if !seen.insert(*id) {
            out.push(violation("exactly_once", trace.final_tick, format!("tx {id} committed twice")));
        }
    }
    let mut numbers = BTreeSet::new();
    for (i, b) in trace.blocks.iter().enumerate() {
        if !numbers.insert(b.header.number) {
            out.push(violation(
                "exactly_once",
                b.header.timestamp,
                format!("block {} delivered twice", b.header.number),
            ));
        }
        if b.header.number != i as u64 + 1 {
            out.push(violation("block_chain", 0, format!("block at position {i} has number {}", b.header.number)));
        }
        if let Err(reason) = b.check_hashes() {
            out.push(violation("block_chain", 0, format!("block {}: {reason}", b.header.number)));
        }
        if i > 0 && b.header.previous_hash != trace.blocks[i - 1].block_hash {
            out.push(violation("block_chain", 0, format!("block {} does not chain", b.header.number)));
        }
    }
    if trace.block_txs() != committed {
        out.push(violation("ordering_fidelity", trace.final_tick, "blocks differ from commit order".into()));
    }
    out
}

/// Everything submitted committed.
pub fn check_liveness(trace: &SimTrace) -> Vec<Violation> {
    if trace.outstanding.is_empty() {
        Vec::new()
    } else {
        vec![violation(
            "liveness",
            trace.final_tick,
            format!("{} of {} txs never committed", trace.outstanding.len(), trace.submitted.len()),
        )]
    }
}

pub fn check_trace(trace: &SimTrace) -> Vec<Violation> {
    let mut out = check_events(&trace.events);
    out.extend(check_delivery(trace));
    out
}
