// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use defectchain_core::harness::{bundled, bundled_names, run_in_process_with_channel, Scenario, ScenarioFile};
use defectchain_core::telemetry::{FaultInjection, InjectionMode, SensorReading, SimConstants, SimScenario};
use defectchain_core::DefectRecord;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use crate::{ensure, Outcome};

pub const RANDOM_RUNS: u64 = 200;

/// A rule as read straight from the JSON table.
#[derive(Debug, Clone)]
pub struct OracleRule {
    sensor: String,
    predicate: String,
    low: Option<f64>,
    high: Option<f64>,
    fault: String,
    importance: String,
    debounce: u64,
}

impl OracleRule {
    fn from_json(v: &Value) -> OracleRule {
        OracleRule {
            sensor: v["sensor_id"].as_str().unwrap().to_string(),
            predicate: v["predicate"].as_str().unwrap().to_string(),
            low: v["bound_low"].as_f64(),
            high: v["bound_high"].as_f64(),
            fault: v["fault_type"].as_str().unwrap().to_string(),
            importance: v["importance"].as_str().unwrap().to_string(),
            debounce: v["debounce_ticks"].as_u64().unwrap(),
        }
    }

    fn flags(&self, x: f64) -> bool {
        match self.predicate.as_str() {
            "GreaterThan" => x > self.high.unwrap(),
            "LessThan" => x < self.low.unwrap(),
            "OutsideRange" => x < self.low.unwrap() || x > self.high.unwrap(),
            "Equals" => x == self.high.unwrap(),
            p => panic!("unknown predicate {p}"),
        }
    }
}

/// Comparable view of a record, floats by bit pattern.
pub type Row = (u64, String, String, String, u64, Option<String>, Option<(u64, u64)>, Option<String>);

pub fn row_of(r: &DefectRecord) -> Row {
    (
        r.timestamp,
        r.sensor_id.clone(),
        r.fault_type.clone(),
        serde_json::to_value(r.importance).unwrap().as_str().unwrap().to_string(),
        r.value.to_bits(),
        r.shipment_id.clone(),
        r.location.map(|l| (l.lat.to_bits(), l.lon.to_bits())),
        r.tilt_status.map(|t| t.as_str().to_string()),
    )
}

/// Brute-force pass of the rule table over the reading log.
pub fn oracle(readings: &[SensorReading], rules: &[OracleRule], shipment: &str) -> Vec<Row> {
    // per rule: start of the current violating run, and whether it fired
    let mut runs: Vec<Option<(u64, bool)>> = vec![None; rules.len()];
    let (mut lat, mut lon, mut gyro) = (None, None, None);
    let mut out = Vec::new();
    for r in readings {
        match r.sensor_id.as_str() {
            "Container1_GpsLat" => lat = Some(r.value),
            "Container1_GpsLon" => lon = Some(r.value),
            "Container1_Gyro" => gyro = Some(r.value),
            _ => {}
        }
        for (i, rule) in rules.iter().enumerate() {
            if rule.sensor != r.sensor_id {
                continue;
            }
            if !rule.flags(r.value) {
                runs[i] = None;
                continue;
            }
            let (start, fired) = *runs[i].get_or_insert((r.timestamp, false));
            if fired || r.timestamp - start < rule.debounce * 100 {
                continue;
            }
            runs[i] = Some((start, true));
            let container = r.sensor_id.starts_with("Container1_");
            out.push((
                r.timestamp,
                r.sensor_id.clone(),
                rule.fault.clone(),
                rule.importance.clone(),
                r.value.to_bits(),
                container.then(|| shipment.to_string()),
                container.then(|| (lat.unwrap().to_bits(), lon.unwrap().to_bits())),
                container
                    .then(|| if gyro.is_some_and(|g: f64| g.abs() > 10.0) { "TILTED" } else { "UPRIGHT" }.to_string()),
            ));
        }
    }
    out.sort();
    out
}

fn rules_text(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/testdata/scenarios").join(name);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

/// A randomized run: conveyor speeds, rule debounce, and injections placed
/// around the rule bounds.
pub fn random_scenario(seed: u64) -> (Scenario, Vec<OracleRule>) {
    let mut rng = ChaCha8Rng::seed_from_u64(0xed9e_0000 ^ seed);
    let rules_file = if rng.random_bool(0.8) { "rules/default.json" } else { "rules/wide.json" };
    let mut table: Value = serde_json::from_str(&rules_text(rules_file)).unwrap();
    for r in table.as_array_mut().unwrap() {
        if rng.random_bool(0.4) {
            r["debounce_ticks"] = rng.random_range(1..=4u64).into();
        }
    }
    let rules: Vec<OracleRule> = table.as_array().unwrap().iter().map(OracleRule::from_json).collect();

    let duration = rng.random_range(300..=900u64);
    let constants = SimConstants {
        conveyor_speeds: (0..4).map(|_| rng.random_range(20.0..160.0)).collect(),
        ..SimConstants::default()
    };
    let mut injections = Vec::new();
    for _ in 0..rng.random_range(1..=6) {
        let rule = rules.choose(&mut rng).unwrap();
        let at_tick = rng.random_range(50..duration - 10);
        let duration_ticks = rng.random_range(1..=60);
        let (mode, magnitude) = if rule.sensor.ends_with("EStop") {
            match rng.random_range(0..3) {
                0 => (InjectionMode::Press, 0.0),
                1 => (InjectionMode::SetValue, 1.0),
                _ => (InjectionMode::SetValue, 0.999),
            }
        } else {
            let bound = **[rule.low, rule.high].iter().flatten().collect::<Vec<_>>().choose(&mut rng).unwrap();
            let delta = rng.random_range(0.0..(0.1 * bound.abs()).max(1.0));
            let near = *[bound - delta, bound, bound + delta].choose(&mut rng).unwrap();
            if rng.random_bool(0.75) {
                (InjectionMode::SetValue, near)
            } else {
                (InjectionMode::Offset, rng.random_range(-delta * 3.0..delta * 3.0))
            }
        };
        injections.push(FaultInjection { at_tick, sensor_id: rule.sensor.clone(), mode, magnitude, duration_ticks });
    }
    let file = ScenarioFile {
        name: format!("random-{seed}"),
        description: String::new(),
        world: SimScenario { seed, duration_ticks: duration, constants, injections },
        rules: rules_file.to_string(),
        expected: Vec::new(),
    };
    let scenario = Scenario::from_parts(file, &serde_json::to_string(&table).unwrap()).unwrap();
    (scenario, rules)
}

pub fn bundled_scenario(name: &str) -> (Scenario, Vec<OracleRule>) {
    let scenario = bundled(name).unwrap().unwrap();
    let table: Value = serde_json::from_str(&rules_text(&scenario.file.rules)).unwrap();
    let rules = table.as_array().unwrap().iter().map(OracleRule::from_json).collect();
    (scenario, rules)
}

/// Runs the full pipeline and compares the committed set with the oracle.
/// Returns the committed records.
pub fn check(scenario: &Scenario, rules: &[OracleRule]) -> Result<Vec<DefectRecord>, String> {
    let name = &scenario.file.name;
    let readings = scenario.file.world.run().map_err(|e| format!("{name}: {e}"))?;
    let expected = oracle(&readings, rules, &scenario.file.world.constants.shipment_id);
    let (_, channel) = run_in_process_with_channel(scenario).map_err(|e| format!("{name}: {e}"))?;
    let committed: Vec<DefectRecord> = channel.world_state().values().cloned().collect();
    let mut got: Vec<Row> = committed.iter().map(row_of).collect();
    got.sort();
    if got != expected {
        let missing: Vec<_> = expected.iter().filter(|r| !got.contains(r)).take(3).collect();
        let extra: Vec<_> = got.iter().filter(|r| !expected.contains(r)).take(3).collect();
        return Err(format!(
            "{name}: committed {} records, oracle flags {}; missing {missing:?}; unexpected {extra:?}",
            got.len(),
            expected.len()
        ));
    }
    Ok(committed)
}

pub fn run() -> Outcome {
    let mut records = 0;
    let mut nonempty = 0;
    for name in bundled_names() {
        let (s, rules) = bundled_scenario(name);
        records += check(&s, &rules)?.len();
    }
    for seed in 0..RANDOM_RUNS {
        let (s, rules) = random_scenario(seed);
        let n = check(&s, &rules)?.len();
        records += n;
        nonempty += (n > 0) as usize;
    }
    ensure!(nonempty * 2 > RANDOM_RUNS as usize, "only {nonempty} random runs produced any record");
    Ok(format!(
        "{} bundled and {RANDOM_RUNS} random schedules: committed records equal the brute-force rule pass exactly ({records} records, {nonempty} random runs non-empty)",
        bundled_names().count()
    ))
}
