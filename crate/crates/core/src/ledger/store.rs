// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

//! On-disk form: an append-only chain file of length-prefixed canonical
//! block records, plus a world-state snapshot that is only trusted after it
//! matches a replay of the chain.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::block::Block;
use super::channel::{Channel, Index};
use super::identity::OrgRegistry;
use super::{LedgerError, VerifyReport};
use crate::canonical::{canonical_bytes, decode_canonical, Hash32};
use crate::gateway::DefectRecord;

/// `u32` big-endian length followed by the block's canonical JSON.
pub fn encode_block(block: &Block) -> Vec<u8> {
    let body = canonical_bytes(block);
    let mut out = Vec::with_capacity(body.len() + 4);
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    out
}

/// Decodes records until the first one that is truncated, unparsable or
/// not byte-for-byte canonical. Returns the good prefix and, if decoding
/// stopped early, the failing record's position.
pub fn decode_chain(bytes: &[u8]) -> (Vec<Block>, Option<(u64, String)>) {
    let mut blocks = Vec::new();
    let mut rest = bytes;
    while !rest.is_empty() {
        let position = blocks.len() as u64;
        if rest.len() < 4 {
            return (blocks, Some((position, "truncated length prefix".into())));
        }
        let len = u32::from_be_bytes(rest[..4].try_into().unwrap()) as usize;
        let Some(body) = rest.get(4..4 + len) else {
            return (blocks, Some((position, "record runs past end of file".into())));
        };
        match decode_canonical::<Block>(body) {
            Ok(block) => blocks.push(block),
            Err(e) => return (blocks, Some((position, e))),
        }
        rest = &rest[4 + len..];
    }
    (blocks, None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Snapshot {
    pub channel_id: String,
    pub height: u64,
    pub tip_hash: Hash32,
    pub world_state: BTreeMap<String, DefectRecord>,
    pub by_shipment: Index,
    pub by_sensor: Index,
}

impl Snapshot {
    pub fn of(channel: &Channel) -> Self {
        Snapshot {
            channel_id: channel.channel_id().to_string(),
            height: channel.height(),
            tip_hash: channel.tip_hash(),
            world_state: channel.world_state().clone(),
            by_shipment: channel.shipment_index().clone(),
            by_sensor: channel.sensor_index().clone(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        canonical_bytes(self)
    }

    /// Where this snapshot disagrees with `channel`, if anywhere.
    fn check_against(&self, channel: &Channel) -> Option<(u64, String)> {
        let tip = channel.height() - 1;
        if self.channel_id != channel.channel_id()
            || self.height != channel.height()
            || self.tip_hash != channel.tip_hash()
        {
            return Some((tip, "snapshot does not describe the chain tip".into()));
        }
        channel.diff_state(&self.world_state, &self.by_shipment, &self.by_sensor)
    }
}

/// Verifies persisted chain bytes and, optionally, a snapshot against them.
pub fn verify_persisted(chain: &[u8], snapshot: Option<&[u8]>, registry: Arc<OrgRegistry>) -> VerifyReport {
    let (blocks, decode_error) = decode_chain(chain);
    let channel = match Channel::replay(blocks, registry) {
        Ok(c) => c,
        Err((n, reason)) => {
            return match decode_error {
                Some((d, r)) if d <= n => VerifyReport::bad(d, r),
                _ => VerifyReport::bad(n, reason),
            }
        }
    };
    if let Some((d, r)) = decode_error {
        return VerifyReport::bad(d, r);
    }
    let Some(snapshot) = snapshot else {
        return VerifyReport::ok();
    };
    let tip = channel.height() - 1;
    let snap: Snapshot = match decode_canonical(snapshot) {
        Ok(s) => s,
        Err(e) => return VerifyReport::bad(tip, format!("snapshot unreadable: {e}")),
    };
    match snap.check_against(&channel) {
        Some((n, reason)) => VerifyReport::bad(n, reason),
        None => VerifyReport::ok(),
    }
}

/// Chain and snapshot files for one channel in a data directory.
#[derive(Debug)]
pub struct ChannelStore {
    chain_path: PathBuf,
    snapshot_path: PathBuf,
    chain_file: File,
}

fn storage(e: impl std::fmt::Display) -> LedgerError {
    LedgerError::Storage(e.to_string())
}

impl ChannelStore {
    fn paths(dir: &Path, channel_id: &str) -> (PathBuf, PathBuf) {
        (dir.join(format!("{channel_id}.chain")), dir.join(format!("{channel_id}.snapshot.json")))
    }

    /// Opens the channel's files, creating them from `genesis` when absent.
    /// Returns the replayed channel and whether an existing snapshot agreed
    /// with the replay (an inconsistent snapshot is discarded and rewritten).
    pub fn open(
        dir: &Path,
        genesis: Block,
        registry: Arc<OrgRegistry>,
    ) -> Result<(Channel, ChannelStore, bool), LedgerError> {
        fs::create_dir_all(dir).map_err(storage)?;
        let channel_id = genesis.header.channel_id.clone();
        let (chain_path, snapshot_path) = Self::paths(dir, &channel_id);
        if !chain_path.exists() {
            let mut f = File::create(&chain_path).map_err(storage)?;
            f.write_all(&encode_block(&genesis)).map_err(storage)?;
            f.sync_all().map_err(storage)?;
        }
        let bytes = fs::read(&chain_path).map_err(storage)?;
        let (blocks, decode_error) = decode_chain(&bytes);
        if let Some((n, reason)) = decode_error {
            return Err(storage(format!("chain file damaged at block {n}: {reason}")));
        }
        if blocks.first().map(|b| b.block_hash) != Some(genesis.block_hash) {
            return Err(storage("chain file belongs to a different genesis"));
        }
        let channel = Channel::replay(blocks, registry)
            .map_err(|(n, reason)| storage(format!("chain file invalid at block {n}: {reason}")))?;

        let snapshot_ok = match fs::read(&snapshot_path) {
            Ok(bytes) => decode_canonical::<Snapshot>(&bytes).ok().is_some_and(|s| s.check_against(&channel).is_none()),
            Err(_) => false,
        };
        let chain_file = OpenOptions::new().append(true).open(&chain_path).map_err(storage)?;
        let store = ChannelStore { chain_path, snapshot_path, chain_file };
        if !snapshot_ok {
            store.write_snapshot(&channel)?;
        }
        Ok((channel, store, snapshot_ok))
    }

    pub fn chain_path(&self) -> &Path {
        &self.chain_path
    }

    pub fn snapshot_path(&self) -> &Path {
        &self.snapshot_path
    }

    /// Appends a committed block and syncs the file.
    pub fn append(&mut self, block: &Block) -> Result<(), LedgerError> {
        self.chain_file.write_all(&encode_block(block)).map_err(storage)?;
        self.chain_file.sync_data().map_err(storage)
    }

    pub fn write_snapshot(&self, channel: &Channel) -> Result<(), LedgerError> {
        let tmp = self.snapshot_path.with_extension("json.tmp");
        fs::write(&tmp, Snapshot::of(channel).to_bytes()).map_err(storage)?;
        fs::rename(&tmp, &self.snapshot_path).map_err(storage)
    }

    /// Verifies the files as they are on disk.
    pub fn verify(&self, registry: Arc<OrgRegistry>) -> Result<VerifyReport, LedgerError> {
        let chain = fs::read(&self.chain_path).map_err(storage)?;
        let snapshot = fs::read(&self.snapshot_path).ok();
        Ok(verify_persisted(&chain, snapshot.as_deref(), registry))
    }
}
