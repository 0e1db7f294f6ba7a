// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use defectchain_core::access::DEFAULT_TOKEN_TTL_MS;
use defectchain_core::gateway::{default_rules, ImportanceTable, RuleSet};
use defectchain_core::harness::GATEWAY_ORG;
use defectchain_core::telemetry::build_default_world;
use defectchain_core::{canonical_bytes, DefectRecord};
use defectchain_server::server::SimSetup;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::common::*;
use crate::{ensure, Outcome};

const ROUNDS: usize = 1000;

struct Endpoint {
    method: &'static str,
    path: &'static str,
    body: Option<Value>,
}

fn endpoints(sample: &DefectRecord) -> Vec<Endpoint> {
    let e = |method, path, body| Endpoint { method, path, body };
    vec![
        e("POST", "/api/defects", Some(serde_json::to_value(sample).unwrap())),
        e("GET", "/api/defects/shipment/SHIP-001", None),
        e("GET", "/api/defects/sensor/R01_LoadCell", None),
        e("GET", "/api/blocks/0", None),
        e("GET", "/api/chain/verify", None),
        e("GET", "/api/stream", None),
        e("GET", "/api/sim/status", None),
        e("POST", "/api/sim/start", Some(json!({}))),
        e("POST", "/api/sim/stop", Some(json!({}))),
        e("POST", "/api/sim/inject", Some(json!({"sensor_id": "R01_EStop", "mode": "Press", "duration_ticks": 5}))),
    ]
}

/// One raw request; `auth` is the literal Authorization header.
fn call(agent: &ureq::Agent, base: &str, ep: &Endpoint, auth: Option<&str>, query: &str) -> (u16, Vec<u8>) {
    let url = format!("{base}{}{query}", ep.path);
    let resp = if ep.method == "GET" {
        let mut req = agent.get(&url);
        if let Some(a) = auth {
            req = req.header("Authorization", a);
        }
        req.call()
    } else {
        let mut req = agent.post(&url).content_type("application/json");
        if let Some(a) = auth {
            req = req.header("Authorization", a);
        }
        req.send(serde_json::to_vec(ep.body.as_ref().unwrap()).unwrap())
    };
    let mut resp = resp.expect("request reached the server");
    let status = resp.status().as_u16();
    (status, resp.body_mut().read_to_vec().unwrap())
}

/// An error body: status, code and message only, nothing secret in it.
fn check_error(body: &[u8], status: u16, code: &str, secrets: &[&str]) -> Result<(), String> {
    let v: Value = serde_json::from_slice(body).map_err(|e| format!("error body not JSON: {e}"))?;
    let obj = v.as_object().ok_or("error body not an object")?;
    let mut keys: Vec<&str> = obj.keys().map(String::as_str).collect();
    keys.sort();
    ensure!(keys == ["code", "http_status", "message"], "error body has keys {keys:?}");
    ensure!(obj["code"] == code, "expected code {code}, got {}", obj["code"]);
    ensure!(obj["http_status"] == status, "body http_status {} on a {status}", obj["http_status"]);
    let text = String::from_utf8_lossy(body);
    for s in secrets {
        ensure!(!text.contains(s), "error body echoes a credential");
    }
    Ok(())
}

fn flip(token: &str, at: usize) -> String {
    let mut chars: Vec<char> = token.chars().collect();
    chars[at] = if chars[at] == '0' { '1' } else { '0' };
    chars.into_iter().collect()
}

fn auth_fuzz(s: &TestServer, rng: &mut ChaCha8Rng) -> Result<(usize, usize), String> {
    let agent = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_secs(10)))
        .build()
        .new_agent();
    let base = s.url();
    let sample = random_record(rng);
    let eps = endpoints(&sample);

    let expired = s.token("Org1", ORG1_SECRET);
    s.advance_clock(DEFAULT_TOKEN_TTL_MS + 1);
    let good = s.token("Org1", ORG1_SECRET);
    let outsider = s.token("Org3", ORG3_SECRET);

    let mut bad: Vec<Option<String>> = vec![
        None,
        Some("Bearer garbage".into()),
        Some("Bearer ".into()),
        Some(format!("Bearer {expired}")),
        Some(format!("Basic {good}")),
        Some(format!("Token {good}")),
        Some(good.clone()),
        Some(format!("Bearer {}", &good[..63])),
        Some(format!("Bearer {good}x")),
    ];
    for _ in 0..20 {
        bad.push(Some(format!("Bearer {}", flip(&good, rng.random_range(0..good.len())))));
    }
    let secrets = [good.as_str(), expired.as_str(), ORG1_SECRET];
    let mut unauthorized = 0;
    for ep in &eps {
        for auth in &bad {
            let (status, body) = call(&agent, &base, ep, auth.as_deref(), "");
            ensure!(
                status == 401,
                "{} {} with {:?}: status {status}",
                ep.method,
                ep.path,
                auth.as_ref().map(|a| a.split(' ').next())
            );
            check_error(&body, 401, "UNAUTHORIZED", &secrets)?;
            unauthorized += 1;
        }
    }
    // the stream also takes its token from the query string
    let stream = &eps[5];
    for q in ["?token=garbage".to_string(), format!("?token={expired}"), format!("?token={}", flip(&good, 0))] {
        let (status, body) = call(&agent, &base, stream, None, &q);
        ensure!(status == 401, "stream with query token: status {status}");
        check_error(&body, 401, "UNAUTHORIZED", &secrets)?;
        unauthorized += 1;
    }

    let mut forbidden = 0;
    let auth = format!("Bearer {outsider}");
    for ep in &eps {
        let (status, body) = call(&agent, &base, ep, Some(&auth), "");
        ensure!(status == 403, "{} {} as a non-member: status {status}", ep.method, ep.path);
        check_error(&body, 403, "FORBIDDEN", &[outsider.as_str(), ORG3_SECRET])?;
        forbidden += 1;
    }
    let (status, body) = call(&agent, &base, stream, None, &format!("?token={outsider}"));
    ensure!(status == 403, "stream as a non-member via query: status {status}");
    check_error(&body, 403, "FORBIDDEN", &[outsider.as_str()])?;
    forbidden += 1;

    // nothing the refused calls carried reached the ledger
    let leaked = s.state().with_channel(|c| c.contains_record(&sample.record_id));
    ensure!(!leaked, "a refused POST was committed");
    Ok((unauthorized, forbidden))
}

fn wait_committed(s: &TestServer, ids: &[String]) -> Result<(), String> {
    let deadline = Instant::now() + Duration::from_secs(20);
    while !s.state().with_channel(|c| ids.iter().all(|id| c.contains_record(id))) {
        ensure!(Instant::now() < deadline, "records not committed within 20 s");
        std::thread::sleep(Duration::from_millis(2));
    }
    Ok(())
}

fn sorted(mut v: Vec<DefectRecord>) -> Vec<DefectRecord> {
    v.sort_by(|a, b| (a.timestamp, &a.record_id).cmp(&(b.timestamp, &b.record_id)));
    v
}

fn differential(s: &TestServer, rng: &mut ChaCha8Rng) -> Result<usize, String> {
    let tokens = [s.token("Org1", ORG1_SECRET), s.token("Org2", ORG2_SECRET)];
    let sensors = all_sensors();
    let mut oracle: BTreeMap<String, DefectRecord> = BTreeMap::new();
    let mut posted: Vec<DefectRecord> = Vec::new();
    let mut compared = 0;
    for round in 0..ROUNDS {
        let mut ids = Vec::new();
        for _ in 0..rng.random_range(1..=3) {
            let rec = if !posted.is_empty() && rng.random_bool(0.15) {
                posted.choose(rng).unwrap().clone()
            } else {
                random_record(rng)
            };
            let token = tokens.choose(rng).unwrap();
            let (status, body) = s.client.post("/api/defects", Some(token), &rec).map_err(|e| e.to_string())?;
            ensure!(
                matches!(status, 200..=202),
                "round {round}: POST status {status}: {}",
                String::from_utf8_lossy(&body)
            );
            ids.push(rec.record_id.clone());
            oracle.entry(rec.record_id.clone()).or_insert_with(|| rec.clone());
            posted.push(rec);
        }
        wait_committed(s, &ids)?;

        let token = tokens.choose(rng).unwrap();
        let sensor = *sensors.choose(rng).unwrap();
        let shipment = *SHIPMENTS.choose(rng).unwrap();
        let height = s.state().with_channel(|c| c.height());
        let block = rng.random_range(0..height);

        let (st, got) =
            s.client.get(&format!("/api/defects/sensor/{sensor}"), Some(token)).map_err(|e| e.to_string())?;
        ensure!(st == 200, "round {round}: sensor query status {st}");
        let direct = s.state().with_channel(|c| canonical_bytes(&c.query_by_sensor(sensor, "Org1").unwrap()));
        let mine = canonical_bytes(&sorted(oracle.values().filter(|r| r.sensor_id == sensor).cloned().collect()));
        ensure!(got == direct, "round {round}: sensor {sensor} differs from the ledger query");
        ensure!(got == mine, "round {round}: sensor {sensor} differs from the oracle");

        let (st, got) =
            s.client.get(&format!("/api/defects/shipment/{shipment}"), Some(token)).map_err(|e| e.to_string())?;
        ensure!(st == 200, "round {round}: shipment query status {st}");
        let direct = s.state().with_channel(|c| canonical_bytes(&c.query_by_shipment(shipment, "Org2").unwrap()));
        let mine = canonical_bytes(&sorted(
            oracle.values().filter(|r| r.shipment_id.as_deref() == Some(shipment)).cloned().collect(),
        ));
        ensure!(got == direct, "round {round}: shipment {shipment} differs from the ledger query");
        ensure!(got == mine, "round {round}: shipment {shipment} differs from the oracle");

        let (st, got) = s.client.get(&format!("/api/blocks/{block}"), Some(token)).map_err(|e| e.to_string())?;
        ensure!(st == 200, "round {round}: block {block} status {st}");
        let direct = s.state().with_channel(|c| canonical_bytes(c.block(block).unwrap()));
        ensure!(got == direct, "round {round}: block {block} differs from the ledger");
        compared += 3;
    }
    let committed = s.state().with_channel(|c| c.world_state().len());
    ensure!(committed == oracle.len(), "{committed} records committed, {} distinct posted", oracle.len());
    Ok(compared)
}

pub fn run() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xa11_0c8);
    let s = serve(|o| {
        let world = build_default_world(3);
        let rules = RuleSet::new(default_rules(world.roster()), &ImportanceTable::default()).unwrap();
        o.sim = Some(SimSetup { world, rules, step: Duration::from_millis(50), org: GATEWAY_ORG.into() });
    });
    let (unauthorized, forbidden) = auth_fuzz(&s, &mut rng)?;
    let compared = differential(&s, &mut rng)?;
    Ok(format!(
        "{unauthorized}/{unauthorized} bad-credential calls got 401 and {forbidden}/{forbidden} non-member calls got 403, no credential echoed; {compared} GET payloads over {ROUNDS} random committed states byte-equal to the ledger query and an independent filter"
    ))
}
