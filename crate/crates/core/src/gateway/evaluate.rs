// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use uuid::Uuid;

use super::record::{is_container_sensor, DefectRecord, Location, TiltStatus};
use super::rules::{RuleSet, ThresholdRule};
use super::{GatewayError, DEFAULT_TILT_THRESHOLD_DEG};
use crate::telemetry::{SensorReading, CONTAINER_LABEL};
use crate::TICK_MS;

const RECORD_NAMESPACE: Uuid = Uuid::from_u128(0x7d44_5e0b_3c1f_4b8e_9a52_0c6f_d1e2_a3b4);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
enum Episode {
    /// Violating since this timestamp, not yet reported.
    Pending { since: u64 },
    /// Reported; stays open until a compliant reading.
    Open,
}

/// Per-rule violation episodes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DebounceState {
    episodes: BTreeMap<String, Episode>,
}

impl DebounceState {
    pub fn open_rules(&self) -> impl Iterator<Item = &str> {
        self.episodes.iter().filter(|(_, e)| matches!(e, Episode::Open)).map(|(k, _)| k.as_str())
    }
}

/// Record id derived from the triggering rule and reading, so a replay of
/// the same stream reproduces the same ids.
fn record_id(rule: &ThresholdRule, reading: &SensorReading) -> String {
    let name = format!("{}/{}/{}", rule.rule_id, reading.sensor_id, reading.timestamp);
    Uuid::new_v5(&RECORD_NAMESPACE, name.as_bytes()).hyphenated().to_string()
}

/// Folds one reading into the debounce state. Yields a record for each rule
/// whose violation has lasted `debounce_ticks` and has not been reported in
/// the current episode. Sensors without rules pass through.
pub fn evaluate(reading: &SensorReading, rules: &RuleSet, state: &mut DebounceState) -> Vec<DefectRecord> {
    let mut out = Vec::new();
    for rule in rules.for_sensor(&reading.sensor_id) {
        if !rule.is_violated(reading.value) {
            state.episodes.remove(&rule.rule_id);
            continue;
        }
        let since = match state.episodes.get(&rule.rule_id) {
            Some(Episode::Open) => continue,
            Some(Episode::Pending { since }) => *since,
            None => reading.timestamp,
        };
        if reading.timestamp.saturating_sub(since) >= rule.debounce_ticks * TICK_MS {
            state.episodes.insert(rule.rule_id.clone(), Episode::Open);
            out.push(DefectRecord {
                record_id: record_id(rule, reading),
                sensor_id: reading.sensor_id.clone(),
                fault_type: rule.fault_type.clone(),
                value: reading.value,
                unit: reading.unit.clone(),
                importance: rule.importance,
                timestamp: reading.timestamp,
                shipment_id: None,
                location: None,
                tilt_status: None,
            });
        } else {
            state.episodes.insert(rule.rule_id.clone(), Episode::Pending { since });
        }
    }
    out
}

/// Latest known container state, as seen by the gateway.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainerSnapshot {
    pub shipment_id: String,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
    pub gyro_deg: Option<f64>,
    pub tilt_threshold_deg: f64,
}

impl ContainerSnapshot {
    pub fn new(shipment_id: impl Into<String>) -> Self {
        ContainerSnapshot {
            shipment_id: shipment_id.into(),
            lat: None,
            lon: None,
            gyro_deg: None,
            tilt_threshold_deg: DEFAULT_TILT_THRESHOLD_DEG,
        }
    }

    pub fn observe(&mut self, reading: &SensorReading) {
        let Some(channel) = reading.sensor_id.strip_prefix(CONTAINER_LABEL).and_then(|s| s.strip_prefix('_')) else {
            return;
        };
        match channel {
            "GpsLat" => self.lat = Some(reading.value),
            "GpsLon" => self.lon = Some(reading.value),
            "Gyro" => self.gyro_deg = Some(reading.value),
            _ => {}
        }
    }

    pub fn tilt_status(&self) -> TiltStatus {
        match self.gyro_deg {
            Some(g) if g.abs() > self.tilt_threshold_deg => TiltStatus::Tilted,
            _ => TiltStatus::Upright,
        }
    }
}

/// Fills shipment id, latest position and tilt status on a container record.
pub fn enrich_shipment(record: DefectRecord, snapshot: &ContainerSnapshot) -> Result<DefectRecord, GatewayError> {
    if !is_container_sensor(&record.sensor_id) {
        return Err(GatewayError::NotAContainerSensor(record.sensor_id));
    }
    let (Some(lat), Some(lon)) = (snapshot.lat, snapshot.lon) else {
        return Err(GatewayError::NoPositionFix);
    };
    Ok(DefectRecord {
        shipment_id: Some(snapshot.shipment_id.clone()),
        location: Some(Location { lat, lon }),
        tilt_status: Some(snapshot.tilt_status()),
        ..record
    })
}

/// One logical gateway: rule evaluation plus container tracking.
#[derive(Debug, Clone)]
pub struct Gateway {
    rules: RuleSet,
    state: DebounceState,
    container: ContainerSnapshot,
}

impl Gateway {
    pub fn new(rules: RuleSet, shipment_id: impl Into<String>) -> Self {
        Gateway { rules, state: DebounceState::default(), container: ContainerSnapshot::new(shipment_id) }
    }

    pub fn with_tilt_threshold(mut self, degrees: f64) -> Self {
        self.container.tilt_threshold_deg = degrees;
        self
    }

    pub fn rules(&self) -> &RuleSet {
        &self.rules
    }

    pub fn container(&self) -> &ContainerSnapshot {
        &self.container
    }

    pub fn state(&self) -> &DebounceState {
        &self.state
    }

    pub fn observe(&mut self, reading: &SensorReading) -> Result<Vec<DefectRecord>, GatewayError> {
        self.container.observe(reading);
        evaluate(reading, &self.rules, &mut self.state)
            .into_iter()
            .map(|r| if is_container_sensor(&r.sensor_id) { enrich_shipment(r, &self.container) } else { Ok(r) })
            .collect()
    }

    pub fn run<'a>(
        &mut self,
        readings: impl IntoIterator<Item = &'a SensorReading>,
    ) -> Result<Vec<DefectRecord>, GatewayError> {
        let mut out = Vec::new();
        for r in readings {
            out.extend(self.observe(r)?);
        }
        Ok(out)
    }
}
