// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

//! Edge gateway: threshold rules over the reading stream, alert/warning
//! classification, shipment enrichment and at-least-once submission.
//!
//! Only rule violations leave the gateway. Each violation episode yields one
//! record; a compliant reading closes the episode.

pub mod record;
pub mod rules;
pub mod submit;

mod evaluate;

use thiserror::Error;

pub use evaluate::{enrich_shipment, evaluate, ContainerSnapshot, DebounceState, Gateway};
pub use record::{DefectRecord, FieldIssue, Importance, Location, TiltStatus};
pub use rules::{classify_importance, default_rules, ImportanceTable, Predicate, RuleSet, ThresholdRule};
pub use submit::{ClientError, LedgerClient, PostOutcome, SubmitError, SubmitReceipt, SubmitStatus, Submitter};

pub const DEFAULT_TILT_THRESHOLD_DEG: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("unknown fault type {0}")]
    UnknownFaultType(String),
    #[error("invalid rule {rule_id}: {reason}")]
    InvalidRule { rule_id: String, reason: String },
    #[error("rule file: {0}")]
    RuleFile(String),
    #[error("sensor {0} does not belong to the container")]
    NotAContainerSensor(String),
    #[error("no position fix for the container yet")]
    NoPositionFix,
}
