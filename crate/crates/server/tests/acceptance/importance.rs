// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

use defectchain_core::gateway::{ImportanceTable, RuleSet};
use defectchain_core::harness::bundled_names;
use defectchain_core::{DefectRecord, Importance};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::common::*;
use crate::edge::{bundled_scenario, check, random_scenario};
use crate::{ensure, Outcome};

const CORPUS_RUNS: u64 = 60;

pub fn run() -> Outcome {
    let mut corpus: Vec<DefectRecord> = Vec::new();
    for name in bundled_names() {
        let (s, rules) = bundled_scenario(name);
        corpus.extend(check(&s, &rules)?);
    }
    // seeds disjoint from the edge criterion
    for seed in 10_000..10_000 + CORPUS_RUNS {
        let (s, rules) = random_scenario(seed);
        corpus.extend(check(&s, &rules)?);
    }
    let mut estops = 0;
    let mut overtemps = 0;
    for r in &corpus {
        if r.fault_type == "EmergencyStop" {
            ensure!(r.importance == Importance::Alert, "{} EmergencyStop is {:?}", r.sensor_id, r.importance);
            estops += 1;
        }
        if r.fault_type == "OverTemperature" && r.sensor_id.starts_with("Conv") {
            ensure!(r.importance == Importance::Warning, "{} OverTemperature is {:?}", r.sensor_id, r.importance);
            overtemps += 1;
        }
    }
    ensure!(estops > 0 && overtemps > 0, "corpus is vacuous: {estops} e-stops, {overtemps} over-temperatures");

    // a rule table that downgrades an e-stop is refused
    let table = json!([{
        "rule_id": "HMI_EStop.estop", "sensor_id": "HMI_EStop", "predicate": "Equals",
        "bound_low": null, "bound_high": 1.0, "fault_type": "EmergencyStop",
        "importance": "Warning", "debounce_ticks": 0
    }]);
    ensure!(
        RuleSet::from_json(&table.to_string(), &ImportanceTable::default()).is_err(),
        "rule set with a Warning e-stop was accepted"
    );

    // and so is a Warning e-stop record at the API
    let s = serve(|_| {});
    let token = s.token("Org1", ORG1_SECRET);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut rec = random_record(&mut rng);
    while !rec.sensor_id.ends_with("EStop") {
        rec = random_record(&mut rng);
    }
    rec.importance = Importance::Warning;
    let (status, body) = s.client.post("/api/defects", Some(&token), &rec).map_err(|e| e.to_string())?;
    ensure!(status == 422, "Warning e-stop POST got {status}");
    let v: serde_json::Value = serde_json::from_slice(&body).map_err(|e| e.to_string())?;
    ensure!(
        v["issues"].as_array().is_some_and(|a| a.iter().any(|i| i["field"] == "importance")),
        "422 body does not name the importance field"
    );
    ensure!(!s.state().with_channel(|c| c.contains_record(&rec.record_id)), "Warning e-stop was committed");

    Ok(format!(
        "{} records from {} runs: {estops} EmergencyStop all Alert, {overtemps} conveyor OverTemperature all Warning; Warning e-stop refused by the rule loader and by the API (422)",
        corpus.len(),
        bundled_names().count() as u64 + CORPUS_RUNS
    ))
}
