// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

//! The on-chain defect payload.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::telemetry::CONTAINER_LABEL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Importance {
    /// The anomaly disrupts the process.
    Alert,
    /// The process continues; operators are warned.
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TiltStatus {
    #[serde(rename = "TILTED")]
    Tilted,
    #[serde(rename = "UPRIGHT")]
    Upright,
}

impl TiltStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TiltStatus::Tilted => "TILTED",
            TiltStatus::Upright => "UPRIGHT",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Location {
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefectRecord {
    pub record_id: String,
    pub sensor_id: String,
    pub fault_type: String,
    pub value: f64,
    pub unit: String,
    pub importance: Importance,
    /// Simulated epoch milliseconds.
    pub timestamp: u64,
    pub shipment_id: Option<String>,
    pub location: Option<Location>,
    pub tilt_status: Option<TiltStatus>,
}

/// One validation failure, named by field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldIssue {
    pub field: String,
    pub message: String,
}

impl FieldIssue {
    fn new(field: &str, message: impl Into<String>) -> Self {
        FieldIssue { field: field.to_string(), message: message.into() }
    }
}

pub fn is_container_sensor(sensor_id: &str) -> bool {
    sensor_id.strip_prefix(CONTAINER_LABEL).is_some_and(|rest| rest.starts_with('_'))
}

const FIELDS: [&str; 10] = [
    "record_id",
    "sensor_id",
    "fault_type",
    "value",
    "unit",
    "importance",
    "timestamp",
    "shipment_id",
    "location",
    "tilt_status",
];

impl DefectRecord {
    /// Checks every record invariant, returning all failures at once.
    pub fn validate(&self) -> Result<(), Vec<FieldIssue>> {
        let mut issues = Vec::new();
        match uuid::Uuid::parse_str(&self.record_id) {
            Ok(u) if u.hyphenated().to_string() == self.record_id => {}
            _ => issues.push(FieldIssue::new("record_id", "must be a lowercase hyphenated UUID")),
        }
        if self.sensor_id.is_empty() {
            issues.push(FieldIssue::new("sensor_id", "must not be empty"));
        }
        if self.fault_type.is_empty() {
            issues.push(FieldIssue::new("fault_type", "must not be empty"));
        }
        if !self.value.is_finite() {
            issues.push(FieldIssue::new("value", "must be finite"));
        }
        if self.unit.is_empty() {
            issues.push(FieldIssue::new("unit", "must not be empty"));
        }
        if self.fault_type == "EmergencyStop" && self.importance != Importance::Alert {
            issues.push(FieldIssue::new("importance", "EmergencyStop records must be Alert"));
        }
        let container = is_container_sensor(&self.sensor_id);
        let shipment_fields = [
            ("shipment_id", self.shipment_id.is_some()),
            ("location", self.location.is_some()),
            ("tilt_status", self.tilt_status.is_some()),
        ];
        for (field, present) in shipment_fields {
            if present != container {
                let msg =
                    if container { "required for container sensors" } else { "must be null for non-container sensors" };
                issues.push(FieldIssue::new(field, msg));
            }
        }
        if matches!(&self.shipment_id, Some(s) if s.is_empty()) {
            issues.push(FieldIssue::new("shipment_id", "must not be empty"));
        }
        if let Some(loc) = &self.location {
            if !(loc.lat.is_finite() && (-90.0..=90.0).contains(&loc.lat)) {
                issues.push(FieldIssue::new("location", "lat out of range"));
            }
            if !(loc.lon.is_finite() && (-180.0..=180.0).contains(&loc.lon)) {
                issues.push(FieldIssue::new("location", "lon out of range"));
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(issues)
        }
    }

    /// Parses an untrusted JSON body field by field so that every problem is
    /// reported against the field that caused it.
    pub fn from_json(value: &Value) -> Result<DefectRecord, Vec<FieldIssue>> {
        let Some(obj) = value.as_object() else {
            return Err(vec![FieldIssue::new("$", "body must be a JSON object")]);
        };
        let mut issues: Vec<FieldIssue> =
            obj.keys().filter(|k| !FIELDS.contains(&k.as_str())).map(|k| FieldIssue::new(k, "unknown field")).collect();

        fn take<T: serde::de::DeserializeOwned>(
            obj: &serde_json::Map<String, Value>,
            field: &str,
            issues: &mut Vec<FieldIssue>,
        ) -> Option<T> {
            match obj.get(field) {
                None => {
                    issues.push(FieldIssue::new(field, "missing"));
                    None
                }
                Some(v) => match serde_json::from_value::<T>(v.clone()) {
                    Ok(t) => Some(t),
                    Err(e) => {
                        issues.push(FieldIssue::new(field, e.to_string()));
                        None
                    }
                },
            }
        }

        let record_id = take::<String>(obj, "record_id", &mut issues);
        let sensor_id = take::<String>(obj, "sensor_id", &mut issues);
        let fault_type = take::<String>(obj, "fault_type", &mut issues);
        let val = take::<f64>(obj, "value", &mut issues);
        let unit = take::<String>(obj, "unit", &mut issues);
        let importance = take::<Importance>(obj, "importance", &mut issues);
        let timestamp = take::<u64>(obj, "timestamp", &mut issues);
        let shipment_id = take::<Option<String>>(obj, "shipment_id", &mut issues);
        let location = take::<Option<Location>>(obj, "location", &mut issues);
        let tilt_status = take::<Option<TiltStatus>>(obj, "tilt_status", &mut issues);

        if !issues.is_empty() {
            return Err(issues);
        }
        let record = DefectRecord {
            record_id: record_id.unwrap(),
            sensor_id: sensor_id.unwrap(),
            fault_type: fault_type.unwrap(),
            value: val.unwrap(),
            unit: unit.unwrap(),
            importance: importance.unwrap(),
            timestamp: timestamp.unwrap(),
            shipment_id: shipment_id.unwrap(),
            location: location.unwrap(),
            tilt_status: tilt_status.unwrap(),
        };
        record.validate()?;
        Ok(record)
    }
}
