// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::gateway::{ImportanceTable, RuleSet};
use crate::telemetry::SimScenario;
use crate::{DefectRecord, Importance, TiltStatus};

/// The fields of a committed record a scenario asserts on.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Skeleton {
    pub sensor_id: String,
    pub fault_type: String,
    pub importance: Importance,
    #[serde(default)]
    pub shipment_id: Option<String>,
    /// Whether the record carries a location.
    #[serde(default)]
    pub located: bool,
    #[serde(default)]
    pub tilt_status: Option<TiltStatus>,
}

impl Skeleton {
    pub fn of(r: &DefectRecord) -> Skeleton {
        Skeleton {
            sensor_id: r.sensor_id.clone(),
            fault_type: r.fault_type.clone(),
            importance: r.importance,
            shipment_id: r.shipment_id.clone(),
            located: r.location.is_some(),
            tilt_status: r.tilt_status,
        }
    }

    pub fn describe(&self) -> String {
        let mut s = format!("{} {} {:?}", self.sensor_id, self.fault_type, self.importance);
        if let Some(id) = &self.shipment_id {
            s.push_str(&format!(" shipment={id}"));
        }
        if self.located {
            s.push_str(" located");
        }
        if let Some(t) = self.tilt_status {
            s.push_str(&format!(" tilt={}", t.as_str()));
        }
        s
    }
}

/// Scenario file as written on disk. `rules` is a path relative to the
/// scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub world: SimScenario,
    pub rules: String,
    #[serde(default)]
    pub expected: Vec<Skeleton>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub rules: RuleSet,
}

impl Scenario {
    pub fn from_parts(file: ScenarioFile, rules_json: &str) -> Result<Scenario, HarnessError> {
        let rules = RuleSet::from_json(rules_json, &ImportanceTable::default())
            .map_err(|e| HarnessError::ScenarioParse(format!("rules {}: {e}", file.rules)))?;
        Ok(Scenario { file, rules })
    }

    pub fn parse(text: &str) -> Result<ScenarioFile, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::ScenarioParse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Scenario, HarnessError> {
        let text =
            fs::read_to_string(path).map_err(|e| HarnessError::ScenarioParse(format!("{}: {e}", path.display())))?;
        let file = Self::parse(&text)?;
        let rules_path = path.parent().unwrap_or(Path::new(".")).join(&file.rules);
        let rules_json = fs::read_to_string(&rules_path)
            .map_err(|e| HarnessError::ScenarioParse(format!("{}: {e}", rules_path.display())))?;
        Self::from_parts(file, &rules_json)
    }

    /// A bundled scenario by name, or a scenario file path.
    pub fn resolve(name_or_path: &str) -> Result<Scenario, HarnessError> {
        match bundled(name_or_path) {
            Some(s) => s,
            None => Self::load(Path::new(name_or_path)),
        }
    }
}

const SCENARIOS: &[(&str, &str)] = &[
    ("quiet", include_str!("../../testdata/scenarios/quiet.json")),
    ("conveyor-overtemp", include_str!("../../testdata/scenarios/conveyor-overtemp.json")),
    ("r02-overpressure", include_str!("../../testdata/scenarios/r02-overpressure.json")),
    ("multi-estop", include_str!("../../testdata/scenarios/multi-estop.json")),
    ("shipment-tilt", include_str!("../../testdata/scenarios/shipment-tilt.json")),
];

const RULES: &[(&str, &str)] = &[
    ("rules/default.json", include_str!("../../testdata/scenarios/rules/default.json")),
    ("rules/wide.json", include_str!("../../testdata/scenarios/rules/wide.json")),
];

pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    SCENARIOS.iter().map(|(n, _)| *n)
}

pub fn bundled(name: &str) -> Option<Result<Scenario, HarnessError>> {
    let (_, text) = SCENARIOS.iter().find(|(n, _)| *n == name)?;
    Some(Scenario::parse(text).and_then(|file| {
        let rules = RULES
            .iter()
            .find(|(p, _)| *p == file.rules)
            .map(|(_, r)| *r)
            .ok_or_else(|| HarnessError::ScenarioParse(format!("unknown bundled rules {}", file.rules)))?;
        Scenario::from_parts(file, rules)
    }))
}
