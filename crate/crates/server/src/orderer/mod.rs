// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

//! Live Raft driver: one task per node, wall-clock ticks, and either an
//! in-memory router or TCP between nodes.

mod client;
mod driver;
pub mod wire;

pub use client::{spawn_local_cluster, OrdererClient, SubmitFailure};
pub use driver::{run_node, NodeHandle, NodeInput, Outbound};
pub use wire::{serve_orderer, OrdererOptions};
