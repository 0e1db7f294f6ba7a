// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

use std::sync::Arc;

use defectchain_core::harness::{demo_members, demo_registry, CHANNEL_ID};
use defectchain_core::ledger::{encode_block, verify_persisted, Block, Channel, OrgRegistry, Snapshot, Transaction};
use defectchain_core::DefectRecord;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::common::random_record;
use crate::{ensure, Outcome};

const MUTATIONS: usize = 1000;
const CLEAN: usize = 1000;

struct Files {
    chain: Vec<u8>,
    /// Byte range of each block's record in `chain`.
    spans: Vec<(usize, usize)>,
    snapshot: Vec<u8>,
    tip: u64,
}

fn build(rng: &mut ChaCha8Rng, registry: &Arc<OrgRegistry>) -> Files {
    let mut ch = Channel::create(CHANNEL_ID, &demo_members(), registry.clone(), 1_714_521_600_000).unwrap();
    let mut posted: Vec<DefectRecord> = Vec::new();
    for b in 0..rng.random_range(1..6) {
        let mut txs = Vec::new();
        for _ in 0..rng.random_range(1..6) {
            // mostly fresh records, some repeats and some non-member submitters
            let rec = if !posted.is_empty() && rng.random_bool(0.15) {
                posted[rng.random_range(0..posted.len())].clone()
            } else {
                random_record(rng)
            };
            posted.push(rec.clone());
            let org = ["Org1", "Org2", "Org1", "Org2", "Org3"][rng.random_range(0..5)];
            txs.push(Transaction::record_defect(CHANNEL_ID, &rec, org, registry).unwrap());
        }
        let tip = ch.tip().clone();
        let block = Block::new(&tip.header, tip.block_hash, txs, 1_714_521_700_000 + b * 1000);
        ch.commit_block(block).unwrap();
    }
    let mut chain = Vec::new();
    let mut spans = Vec::new();
    for b in ch.chain() {
        let start = chain.len();
        chain.extend(encode_block(b));
        spans.push((start, chain.len()));
    }
    Files { chain, spans, snapshot: Snapshot::of(&ch).to_bytes(), tip: ch.height() - 1 }
}

#[derive(Clone, Copy, Debug)]
enum Kind {
    /// Any byte of the chain file, bit flip or replacement.
    RawByte,
    /// One hex digit of a hash or signature, replaced by another hex digit.
    HashDigit,
    /// One decimal digit (numbers, timestamps, heights) replaced by another.
    Digit,
    /// Any byte of the world-state snapshot.
    Snapshot,
}

fn mutate_byte(rng: &mut ChaCha8Rng, b: u8) -> u8 {
    if rng.random_bool(0.5) {
        b ^ (1 << rng.random_range(0..8))
    } else {
        loop {
            let n: u8 = rng.random();
            if n != b {
                return n;
            }
        }
    }
}

fn positions(chain: &[u8], pred: impl Fn(&[u8], usize) -> bool) -> Vec<usize> {
    (0..chain.len()).filter(|&i| pred(chain, i)).collect()
}

/// Offsets of characters inside 64-hex-digit JSON strings.
fn hash_digits(chain: &[u8]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 0;
    while i + 66 <= chain.len() {
        if chain[i] == b'"'
            && chain[i + 65] == b'"'
            && chain[i + 1..i + 65].iter().all(|c| c.is_ascii_digit() || (b'a'..=b'f').contains(c))
        {
            out.extend(i + 1..i + 65);
            i += 66;
        } else {
            i += 1;
        }
    }
    out
}

pub fn run() -> Outcome {
    let registry = Arc::new(demo_registry());
    let mut rng = ChaCha8Rng::seed_from_u64(0x7a3e);
    let kinds = [Kind::RawByte, Kind::RawByte, Kind::HashDigit, Kind::HashDigit, Kind::Digit, Kind::Snapshot];
    let mut counts = [0usize; 4];

    for case in 0..MUTATIONS {
        let f = build(&mut rng, &registry);
        let kind = kinds[rng.random_range(0..kinds.len())];
        let mut chain = f.chain.clone();
        let mut snapshot = f.snapshot.clone();
        let bound = match kind {
            Kind::Snapshot => {
                let i = rng.random_range(0..snapshot.len());
                snapshot[i] = mutate_byte(&mut rng, snapshot[i]);
                f.tip
            }
            _ => {
                let candidates = match kind {
                    Kind::HashDigit => hash_digits(&chain),
                    Kind::Digit => positions(&chain, |c, i| {
                        c[i].is_ascii_digit() && !f.spans.iter().any(|(s, _)| (*s..s + 4).contains(&i))
                    }),
                    _ => (0..chain.len()).collect(),
                };
                let i = candidates[rng.random_range(0..candidates.len())];
                chain[i] = match kind {
                    Kind::HashDigit => loop {
                        let d = b"0123456789abcdef"[rng.random_range(0..16)];
                        if d != chain[i] {
                            break d;
                        }
                    },
                    Kind::Digit => loop {
                        let d = b'0' + rng.random_range(0..10u8);
                        if d != chain[i] {
                            break d;
                        }
                    },
                    _ => mutate_byte(&mut rng, chain[i]),
                };
                f.spans.iter().position(|(s, e)| (*s..*e).contains(&i)).unwrap() as u64
            }
        };
        counts[kind as usize] += 1;
        let report = verify_persisted(&chain, Some(&snapshot), registry.clone());
        ensure!(!report.ok, "case {case}: {kind:?} mutation in block {bound} went undetected");
        let first = report.first_bad_block.unwrap_or(u64::MAX);
        ensure!(first <= bound, "case {case}: {kind:?} mutation in block {bound} reported at block {first}");
    }

    for case in 0..CLEAN {
        let f = build(&mut rng, &registry);
        let report = verify_persisted(&f.chain, Some(&f.snapshot), registry.clone());
        ensure!(report.ok, "clean chain {case} flagged: {report:?}");
    }
    Ok(format!(
        "{MUTATIONS} mutations detected at or before the tampered block (raw {}, hash digit {}, decimal digit {}, snapshot {}); {CLEAN} clean chains verified ok",
        counts[0], counts[1], counts[2], counts[3]
    ))
}
