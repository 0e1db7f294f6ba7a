// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

//! Manufacturing defect pipeline: a deterministic factory and shipment
//! telemetry simulator, an edge gateway that turns threshold violations into
//! defect records, a permissioned hash-chained ledger, and a Raft ordering
//! service with a deterministic network simulator.
//!
//! The pieces compose in [`harness`], which runs scripted scenarios end to
//! end and renders canonical reports.

pub mod access;
pub mod canonical;
pub mod gateway;
pub mod harness;
pub mod ledger;
pub mod raft;
pub mod telemetry;

pub use canonical::{canonical_bytes, canonical_json, sha256, Hash32};
pub use gateway::record::{DefectRecord, Importance, Location, TiltStatus};

/// Simulated milliseconds per tick.
pub const TICK_MS: u64 = 100;
