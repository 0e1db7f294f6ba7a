// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

//! Python bindings. Structured values cross the boundary as JSON text.

use std::sync::Arc;

use defectchain_core::gateway::{Gateway, ImportanceTable, RuleSet};
use defectchain_core::harness::{self, bundled_names, demo_registry, report, ReportFormat, Scenario};
use defectchain_core::ledger::{verify_persisted, OrgRegistry};
use defectchain_core::telemetry::{
    conveyor_thermal_step, read_ndjson, write_ndjson, ConveyorState, SimScenario, ThermalParams,
};
use defectchain_core::{canonical_bytes, DefectRecord};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn text(bytes: Vec<u8>) -> String {
    String::from_utf8(bytes).expect("canonical json is utf-8")
}

/// Names of the scenarios compiled into the library.
#[pyfunction]
fn bundled_scenarios() -> Vec<String> {
    bundled_names().map(str::to_string).collect()
}

/// Runs a bundled scenario or scenario file in process and returns the JSON
/// report, as printed by `defectchain run --format json`.
#[pyfunction]
fn run_scenario(py: Python<'_>, name_or_path: &str) -> PyResult<String> {
    let scenario = Scenario::resolve(name_or_path).map_err(value_err)?;
    let r = py.detach(|| harness::run_in_process(&scenario)).map_err(value_err)?;
    Ok(report(&r, ReportFormat::Json))
}

/// Simulates a world description (the `world` object of a scenario file)
/// and returns its readings as NDJSON.
#[pyfunction]
fn simulate(world_json: &str) -> PyResult<String> {
    let world: SimScenario = serde_json::from_str(world_json).map_err(value_err)?;
    let readings = world.run().map_err(value_err)?;
    let mut out = Vec::new();
    write_ndjson(&readings, &mut out).map_err(value_err)?;
    Ok(text(out))
}

/// Runs the edge gateway over NDJSON readings and returns the records it
/// emits as a JSON array.
#[pyfunction]
#[pyo3(signature = (rules_json, readings_ndjson, shipment_id = "SHIP-001"))]
fn detect(rules_json: &str, readings_ndjson: &str, shipment_id: &str) -> PyResult<String> {
    let rules = RuleSet::from_json(rules_json, &ImportanceTable::default()).map_err(value_err)?;
    let readings = read_ndjson(readings_ndjson).map_err(value_err)?;
    let records: Vec<DefectRecord> = Gateway::new(rules, shipment_id).run(&readings).map_err(value_err)?;
    Ok(text(canonical_bytes(&records)))
}

/// Verifies a persisted chain file and optional world-state snapshot.
/// Returns `{"ok", "first_bad_block", "reason"?}` as JSON.
#[pyfunction]
#[pyo3(signature = (chain, snapshot = None, registry_json = None))]
fn verify_chain(chain: &[u8], snapshot: Option<&[u8]>, registry_json: Option<&str>) -> PyResult<String> {
    let registry = match registry_json {
        Some(t) => OrgRegistry::from_json(t).map_err(value_err)?,
        None => demo_registry(),
    };
    Ok(text(canonical_bytes(&verify_persisted(chain, snapshot, Arc::new(registry)))))
}

/// Re-encodes JSON text in canonical form.
#[pyfunction]
fn canonical_json(json_text: &str) -> PyResult<String> {
    let v: serde_json::Value = serde_json::from_str(json_text).map_err(value_err)?;
    Ok(text(canonical_bytes(&v)))
}

/// One conveyor step with default constants:
/// `(temperature, actual_speed, safety_mode)` after `dt` seconds.
#[pyfunction]
#[pyo3(signature = (temperature, commanded_speed, safety_mode = false, dt = 0.1))]
fn thermal_step(temperature: f64, commanded_speed: f64, safety_mode: bool, dt: f64) -> PyResult<(f64, f64, bool)> {
    if dt.is_nan() || dt <= 0.0 {
        return Err(value_err("dt must be positive"));
    }
    let p = ThermalParams::default();
    let actual_speed = if safety_mode { commanded_speed.min(p.s_safe) } else { commanded_speed };
    let s = ConveyorState { temperature, commanded_speed, actual_speed, safety_mode };
    let n = conveyor_thermal_step(s, &p, dt);
    Ok((n.temperature, n.actual_speed, n.safety_mode))
}

#[pymodule]
fn defectchain(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(bundled_scenarios, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(detect, m)?)?;
    m.add_function(wrap_pyfunction!(verify_chain, m)?)?;
    m.add_function(wrap_pyfunction!(canonical_json, m)?)?;
    m.add_function(wrap_pyfunction!(thermal_step, m)?)?;
    Ok(())
}
