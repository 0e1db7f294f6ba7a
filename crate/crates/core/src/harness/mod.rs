// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

//! Scripted end-to-end scenarios: simulate, detect, order, commit, report.

mod client;
mod scenario;

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use client::InProcessLedger;
pub use scenario::{bundled, bundled_names, Scenario, ScenarioFile, Skeleton};

use crate::canonical::canonical_bytes;
use crate::gateway::{Gateway, Submitter};
use crate::ledger::{create_genesis, Channel, OrgRegistry};
use crate::raft::check::{check_liveness, check_trace};
use crate::raft::sim::{run_simulation, NetConfig, SimOptions, WorkItem};
use crate::{DefectRecord, TICK_MS};

pub const CHANNEL_ID: &str = "defects";
/// Org the edge gateway submits as.
pub const GATEWAY_ORG: &str = "Org1";

/// Demo identities: the manufacturer, the logistics partner, and an org
/// that holds credentials but is outside the channel.
pub fn demo_registry() -> OrgRegistry {
    OrgRegistry::new()
        .with_org("Org1", "org1-manufacturing-secret")
        .with_org("Org2", "org2-logistics-secret")
        .with_org("Org3", "org3-outsider-secret")
}

pub fn demo_members() -> BTreeSet<String> {
    ["Org1".to_string(), "Org2".to_string()].into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    InProcess,
    MultiProcess,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HarnessError {
    #[error("scenario parse error: {0}")]
    ScenarioParse(String),
    #[error("pipeline failure: {0}")]
    PipelineFailure(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        2
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchDiff {
    /// Expected skeletons with no committed counterpart.
    pub missing: Vec<Skeleton>,
    /// Committed records no expectation accounts for.
    pub unexpected: Vec<Skeleton>,
}

impl MatchDiff {
    pub fn is_empty(&self) -> bool {
        self.missing.is_empty() && self.unexpected.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: String,
    /// Sorted by (timestamp, record_id).
    pub committed: Vec<DefectRecord>,
    pub chain_ok: bool,
    pub first_bad_block: Option<u64>,
    pub matched: bool,
    pub diffs: MatchDiff,
}

impl ScenarioReport {
    pub fn exit_code(&self) -> i32 {
        if self.matched && self.chain_ok {
            0
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReportFormat {
    Text,
    Json,
}

pub fn report(r: &ScenarioReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = String::from_utf8(canonical_bytes(r)).expect("json is utf-8");
            s.push('\n');
            s
        }
        ReportFormat::Text => render_text(r),
    }
}

fn render_text(r: &ScenarioReport) -> String {
    let mut out = format!("scenario {}\n", r.scenario);
    out.push_str(&format!("committed {}\n", r.committed.len()));
    for rec in &r.committed {
        out.push_str(&format!(
            "  {} {} {} {:?} value={} {}",
            rec.timestamp, rec.sensor_id, rec.fault_type, rec.importance, rec.value, rec.unit
        ));
        if let Some(s) = &rec.shipment_id {
            out.push_str(&format!(" shipment={s}"));
        }
        if let Some(l) = &rec.location {
            out.push_str(&format!(" at={},{}", l.lat, l.lon));
        }
        if let Some(t) = &rec.tilt_status {
            out.push_str(&format!(" tilt={}", t.as_str()));
        }
        out.push('\n');
    }
    match r.first_bad_block {
        None => out.push_str(&format!("chain ok={}\n", r.chain_ok)),
        Some(b) => out.push_str(&format!("chain ok={} first_bad_block={b}\n", r.chain_ok)),
    }
    out.push_str(&format!("matched {}\n", r.matched));
    for s in &r.diffs.missing {
        out.push_str(&format!("  missing {}\n", s.describe()));
    }
    for s in &r.diffs.unexpected {
        out.push_str(&format!("  unexpected {}\n", s.describe()));
    }
    out
}

/// Matches each expected skeleton to exactly one committed record.
pub fn match_expected(expected: &[Skeleton], committed: &[DefectRecord]) -> MatchDiff {
    let mut remaining: Vec<Skeleton> = committed.iter().map(Skeleton::of).collect();
    let mut missing = Vec::new();
    for e in expected {
        match remaining.iter().position(|s| s == e) {
            Some(i) => {
                remaining.remove(i);
            }
            None => missing.push(e.clone()),
        }
    }
    MatchDiff { missing, unexpected: remaining }
}

/// Assembles a report from the committed channel state.
pub fn build_report(scenario: &Scenario, channel: &Channel) -> ScenarioReport {
    let mut committed: Vec<DefectRecord> = channel.world_state().values().cloned().collect();
    committed.sort_by(|a, b| (a.timestamp, &a.record_id).cmp(&(b.timestamp, &b.record_id)));
    let verify = channel.verify_chain();
    let diffs = match_expected(&scenario.file.expected, &committed);
    ScenarioReport {
        scenario: scenario.file.name.clone(),
        committed,
        chain_ok: verify.ok,
        first_bad_block: verify.first_bad_block,
        matched: diffs.is_empty(),
        diffs,
    }
}

/// Readings and the records the gateway derives from them.
pub fn detect(scenario: &Scenario) -> Result<Vec<DefectRecord>, HarnessError> {
    let readings = scenario.file.world.run().map_err(|e| HarnessError::PipelineFailure(format!("telemetry: {e}")))?;
    let mut gateway = Gateway::new(scenario.rules.clone(), scenario.file.world.constants.shipment_id.clone());
    gateway.run(&readings).map_err(|e| HarnessError::PipelineFailure(format!("gateway: {e}")))
}

/// Runs the whole pipeline in this process on simulated time: telemetry,
/// gateway, submission, a three-node Raft cluster on a lossless simulated
/// network, block cutting, and peer commit.
pub fn run_in_process(scenario: &Scenario) -> Result<ScenarioReport, HarnessError> {
    let (report, _) = run_in_process_with_channel(scenario)?;
    Ok(report)
}

pub fn run_in_process_with_channel(scenario: &Scenario) -> Result<(ScenarioReport, Channel), HarnessError> {
    let registry = Arc::new(demo_registry());
    let world = &scenario.file.world;
    let epoch = world.constants.start_epoch_ms;
    let members = demo_members();

    let records = detect(scenario)?;

    let ledger = InProcessLedger::new((*registry).clone(), CHANNEL_ID, members.clone(), world.seed);
    let secret = registry.secret(GATEWAY_ORG).expect("gateway org registered").expose().to_string();
    let mut submitter = Submitter::new(ledger, GATEWAY_ORG, secret);
    for rec in records {
        submitter.client_mut().set_time(rec.timestamp);
        submitter.submit(rec).map_err(|e| HarnessError::PipelineFailure(format!("submit: {e}")))?;
    }
    let workload: Vec<WorkItem> = submitter
        .client_mut()
        .take_accepted()
        .into_iter()
        .map(|(ts, tx)| WorkItem { at: ts.saturating_sub(epoch) / TICK_MS, tx })
        .collect();

    let opts = SimOptions {
        channel_id: CHANNEL_ID.into(),
        members: members.clone(),
        epoch_ms: epoch,
        record_messages: false,
        ..SimOptions::default()
    };
    let trace = run_simulation(3, &NetConfig::lossless(world.seed), &workload, world.duration_ticks, &opts);
    let mut violations = check_trace(&trace);
    violations.extend(check_liveness(&trace));
    if let Some(v) = violations.first() {
        return Err(HarnessError::PipelineFailure(format!("orderer: {}: {}", v.check, v.detail)));
    }

    let genesis =
        create_genesis(CHANNEL_ID, &members, epoch).map_err(|e| HarnessError::PipelineFailure(e.to_string()))?;
    let mut channel =
        Channel::from_genesis(genesis, registry).map_err(|e| HarnessError::PipelineFailure(e.to_string()))?;
    for block in trace.blocks {
        channel.commit_block(block).map_err(|e| HarnessError::PipelineFailure(format!("peer commit: {e}")))?;
    }
    Ok((build_report(scenario, &channel), channel))
}
