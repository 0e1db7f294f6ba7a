// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

//! Networked defectchain: the HTTP API over a live Raft orderer, the demo
//! simulator controls, and the multi-process scenario runner.

pub mod api;
pub mod app;
pub mod events;
pub mod http_client;
pub mod multiprocess;
pub mod orderer;
pub mod server;
pub mod simctl;
