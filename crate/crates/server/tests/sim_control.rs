// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

mod common;

use std::time::{Duration, Instant};

use common::*;
use defectchain_core::gateway::{default_rules, ImportanceTable, RuleSet};
use defectchain_core::harness::GATEWAY_ORG;
use defectchain_core::telemetry::build_default_world;
use defectchain_core::{DefectRecord, Importance};
use defectchain_server::server::SimSetup;
use serde_json::{json, Value};

fn with_sim() -> TestServer {
    serve(|o| {
        let world = build_default_world(9);
        let rules = RuleSet::new(default_rules(world.roster()), &ImportanceTable::default()).unwrap();
        o.sim = Some(SimSetup { world, rules, step: Duration::from_millis(5), org: GATEWAY_ORG.into() });
    })
}

fn call(s: &TestServer, token: &str, verb: &str, body: Option<Value>) -> (u16, Value) {
    let path = format!("/api/sim/{verb}");
    let (status, b) = match body {
        Some(b) => s.client.post(&path, Some(token), &b).unwrap(),
        None if verb == "status" => s.client.get(&path, Some(token)).unwrap(),
        None => s.client.post_bytes(&path, Some(token), b"").unwrap(),
    };
    (status, serde_json::from_slice(&b).unwrap())
}

#[test]
fn sim_routes_need_a_simulator_and_auth() {
    let s = serve(|_| {});
    let token = s.token("Org1", ORG1_SECRET);
    assert_eq!(call(&s, &token, "status", None).0, 404);
    let s = with_sim();
    assert_eq!(s.client.get("/api/sim/status", None).unwrap().0, 401);
    assert_eq!(s.client.post_bytes("/api/sim/start", Some("garbage"), b"").unwrap().0, 401);
    let t3 = s.token("Org3", ORG3_SECRET);
    assert_eq!(call(&s, &t3, "start", None).0, 403);
    let t1 = s.token("Org1", ORG1_SECRET);
    assert_eq!(call(&s, &t1, "status", None).1["running"], false);
}

#[test]
fn start_stop_are_idempotent_and_stop_freezes() {
    let s = with_sim();
    let token = s.token("Org2", ORG2_SECRET);
    let (_, st) = call(&s, &token, "status", None);
    assert_eq!(st["running"], false);
    assert_eq!(st["tick"], 0);
    std::thread::sleep(Duration::from_millis(50));
    assert_eq!(call(&s, &token, "status", None).1["tick"], 0);

    assert_eq!(call(&s, &token, "start", None).1["running"], true);
    assert_eq!(call(&s, &token, "start", None).1["running"], true);
    std::thread::sleep(Duration::from_millis(100));
    let (status, st) = call(&s, &token, "stop", None);
    assert_eq!(status, 200);
    assert_eq!(st["running"], false);
    let frozen = st["tick"].as_u64().unwrap();
    assert!(frozen > 0);
    std::thread::sleep(Duration::from_millis(100));
    assert_eq!(call(&s, &token, "stop", None).1["tick"].as_u64().unwrap(), frozen);
    let last = s.state().events.last_seq();
    std::thread::sleep(Duration::from_millis(150));
    assert_eq!(s.state().events.last_seq(), last, "telemetry kept flowing after stop");
}

#[test]
fn bad_injection_is_a_validation_error() {
    let s = with_sim();
    let token = s.token("Org1", ORG1_SECRET);
    let (status, e) = call(
        &s,
        &token,
        "inject",
        Some(json!({"sensor_id": "R99_Nope", "mode": "SetValue", "magnitude": 1.0, "duration_ticks": 3})),
    );
    assert_eq!(status, 422);
    assert_eq!(e["code"], "VALIDATION_FAILED");
    let (status, _) = call(&s, &token, "inject", Some(json!({"sensor_id": "R03_EStop"})));
    assert_eq!(status, 422);
}

#[test]
fn injected_estop_commits_an_alert() {
    let s = with_sim();
    let token = s.token("Org2", ORG2_SECRET);
    let (status, st) = call(
        &s,
        &token,
        "inject",
        Some(json!({"sensor_id": "R03_EStop", "mode": "SetValue", "magnitude": 1.0, "duration_ticks": 5})),
    );
    assert_eq!(status, 200);
    assert_eq!(st["pending_injections"][0]["sensor_id"], "R03_EStop");
    call(&s, &token, "start", None);
    let deadline = Instant::now() + Duration::from_secs(20);
    let rows = loop {
        let rows: Vec<DefectRecord> = s.client.query_sensor(&token, "R03_EStop").unwrap();
        if !rows.is_empty() || Instant::now() > deadline {
            break rows;
        }
        std::thread::sleep(Duration::from_millis(20));
    };
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].fault_type, "EmergencyStop");
    assert_eq!(rows[0].importance, Importance::Alert);
}
