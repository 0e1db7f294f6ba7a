// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::record::Importance;
use super::GatewayError;
use crate::telemetry::{SensorKind, SensorSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Predicate {
    GreaterThan,
    LessThan,
    OutsideRange,
    Equals,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdRule {
    pub rule_id: String,
    pub sensor_id: String,
    pub predicate: Predicate,
    #[serde(default)]
    pub bound_low: Option<f64>,
    #[serde(default)]
    pub bound_high: Option<f64>,
    pub fault_type: String,
    pub importance: Importance,
    #[serde(default)]
    pub debounce_ticks: u64,
}

impl ThresholdRule {
    /// True when `value` breaks the rule. Comparisons are strict.
    pub fn is_violated(&self, value: f64) -> bool {
        let lo = self.bound_low.unwrap_or(f64::NEG_INFINITY);
        let hi = self.bound_high.unwrap_or(f64::INFINITY);
        match self.predicate {
            Predicate::GreaterThan => value > hi,
            Predicate::LessThan => value < lo,
            Predicate::OutsideRange => value < lo || value > hi,
            Predicate::Equals => Some(value) == self.bound_high,
        }
    }

    fn check_shape(&self) -> Result<(), String> {
        let finite = |b: Option<f64>| b.is_none_or(f64::is_finite);
        if !finite(self.bound_low) || !finite(self.bound_high) {
            return Err("bounds must be finite".into());
        }
        match self.predicate {
            Predicate::OutsideRange => match (self.bound_low, self.bound_high) {
                (Some(lo), Some(hi)) if lo < hi => Ok(()),
                (Some(_), Some(_)) => Err("OutsideRange requires bound_low < bound_high".into()),
                _ => Err("OutsideRange requires both bounds".into()),
            },
            Predicate::GreaterThan | Predicate::Equals if self.bound_high.is_none() => {
                Err(format!("{:?} requires bound_high", self.predicate))
            }
            Predicate::LessThan if self.bound_low.is_none() => Err("LessThan requires bound_low".into()),
            _ => Ok(()),
        }
    }
}

/// Maps each fault type to whether it disrupts the process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceTable(BTreeMap<String, bool>);

impl ImportanceTable {
    pub fn new(entries: impl IntoIterator<Item = (String, bool)>) -> Self {
        ImportanceTable(entries.into_iter().collect())
    }

    pub fn fault_types(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }
}

impl Default for ImportanceTable {
    fn default() -> Self {
        ImportanceTable::new(
            [
                ("EmergencyStop", true),
                ("Stall", true),
                ("GripperPosition", true),
                ("OverPressure", true),
                ("OverTemperature", false),
                ("ExcessVibration", false),
                ("TemperatureOutOfRange", false),
                ("HighHumidity", false),
                ("ExcessTilt", false),
            ]
            .map(|(k, v)| (k.to_string(), v)),
        )
    }
}

/// Alert when the fault disrupts the process, Warning when it continues.
/// Unlisted fault types fail closed.
pub fn classify_importance(fault_type: &str, table: &ImportanceTable) -> Result<Importance, GatewayError> {
    match table.0.get(fault_type) {
        Some(true) => Ok(Importance::Alert),
        Some(false) => Ok(Importance::Warning),
        None => Err(GatewayError::UnknownFaultType(fault_type.to_string())),
    }
}

/// A validated rule table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleSet {
    rules: Vec<ThresholdRule>,
}

impl RuleSet {
    pub fn new(rules: Vec<ThresholdRule>, table: &ImportanceTable) -> Result<Self, GatewayError> {
        let mut seen = HashSet::new();
        for rule in &rules {
            let invalid = |reason: String| GatewayError::InvalidRule { rule_id: rule.rule_id.clone(), reason };
            if !seen.insert(rule.rule_id.as_str()) {
                return Err(invalid("duplicate rule_id".into()));
            }
            rule.check_shape().map_err(invalid)?;
            let expected = classify_importance(&rule.fault_type, table)?;
            if expected != rule.importance {
                return Err(invalid(format!(
                    "importance {:?} disagrees with {:?} for {}",
                    rule.importance, expected, rule.fault_type
                )));
            }
            let estop = rule.sensor_id.ends_with("_EStop") || rule.fault_type == "EmergencyStop";
            if estop && rule.importance != Importance::Alert {
                return Err(invalid("e-stop rules must be Alert".into()));
            }
        }
        Ok(RuleSet { rules })
    }

    /// Parses and validates a rule file (a JSON array of rules).
    pub fn from_json(text: &str, table: &ImportanceTable) -> Result<Self, GatewayError> {
        let rules: Vec<ThresholdRule> =
            serde_json::from_str(text).map_err(|e| GatewayError::RuleFile(e.to_string()))?;
        RuleSet::new(rules, table)
    }

    pub fn rules(&self) -> &[ThresholdRule] {
        &self.rules
    }

    pub fn for_sensor<'a>(&'a self, sensor_id: &'a str) -> impl Iterator<Item = &'a ThresholdRule> + 'a {
        self.rules.iter().filter(move |r| r.sensor_id == sensor_id)
    }
}

/// The stock rule table for a roster.
pub fn default_rules(roster: &[SensorSpec]) -> Vec<ThresholdRule> {
    let table = ImportanceTable::default();
    let mut out = Vec::new();
    for spec in roster {
        let id = spec.sensor_id.as_str();
        let container = spec.asset.label.starts_with("Container");
        let mut push = |suffix: &str, predicate, lo: Option<f64>, hi: Option<f64>, fault: &str| {
            out.push(ThresholdRule {
                rule_id: format!("{id}.{suffix}"),
                sensor_id: id.to_string(),
                predicate,
                bound_low: lo,
                bound_high: hi,
                fault_type: fault.to_string(),
                importance: classify_importance(fault, &table).expect("stock fault types are classified"),
                debounce_ticks: 0,
            });
        };
        match spec.kind {
            SensorKind::Potentiometer => {
                push("window", Predicate::OutsideRange, Some(5.0), Some(95.0), "GripperPosition")
            }
            SensorKind::LoadCell => push("force", Predicate::GreaterThan, None, Some(800.0), "OverPressure"),
            SensorKind::PressureGauge => push("pressure", Predicate::GreaterThan, None, Some(6.0), "OverPressure"),
            SensorKind::Temperature if container => {
                push("coldchain", Predicate::OutsideRange, Some(2.0), Some(8.0), "TemperatureOutOfRange")
            }
            SensorKind::Temperature => push("overtemp", Predicate::GreaterThan, None, Some(70.0), "OverTemperature"),
            SensorKind::Vibration => push("vibration", Predicate::GreaterThan, None, Some(5.0), "ExcessVibration"),
            SensorKind::Speed => push("stall", Predicate::LessThan, Some(10.0), None, "Stall"),
            SensorKind::Humidity => push("humidity", Predicate::GreaterThan, None, Some(60.0), "HighHumidity"),
            SensorKind::Gyroscope => push("tilt", Predicate::GreaterThan, None, Some(10.0), "ExcessTilt"),
            SensorKind::EStop => push("estop", Predicate::Equals, None, Some(1.0), "EmergencyStop"),
            SensorKind::Gps => {}
        }
    }
    out
}
