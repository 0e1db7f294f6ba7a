// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

//! Scenario runs against real processes: three orderer nodes and an API
//! server, driven only through their network interfaces.

use std::collections::BTreeSet;
use std::net::{SocketAddr, TcpListener};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::thread::sleep;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use defectchain_core::gateway::{LedgerClient, Submitter};
use defectchain_core::harness::{
    demo_registry, detect, match_expected, HarnessError, Scenario, ScenarioReport, GATEWAY_ORG,
};
use defectchain_core::DefectRecord;

use crate::http_client::HttpLedger;

const NODES: u64 = 3;
const STARTUP: Duration = Duration::from_secs(30);
const SETTLE: Duration = Duration::from_secs(60);

/// Kills and reaps its children on drop.
struct Fleet {
    children: Vec<Child>,
    dir: PathBuf,
}

impl Drop for Fleet {
    fn drop(&mut self) {
        for c in &mut self.children {
            let _ = c.kill();
            let _ = c.wait();
        }
        let _ = std::fs::remove_dir_all(&self.dir);
    }
}

fn free_addr() -> std::io::Result<SocketAddr> {
    TcpListener::bind("127.0.0.1:0")?.local_addr()
}

fn fail(what: &str, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::PipelineFailure(format!("{what}: {e}"))
}

fn spawn(bin: &Path, args: &[String]) -> Result<Child, HarnessError> {
    Command::new(bin)
        .args(args)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| fail(&format!("cannot start {}", bin.display()), e))
}

/// Starts the cluster and API from `bin` (the `defectchain` executable),
/// feeds the scenario's gateway output through HTTP, and reports on what
/// the API says was committed.
pub fn run_multi_process(scenario: &Scenario, bin: &Path) -> Result<ScenarioReport, HarnessError> {
    let nanos = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.subsec_nanos());
    let dir = std::env::temp_dir().join(format!("defectchain-mp-{}-{nanos}", std::process::id()));
    let mut fleet = Fleet { children: Vec::new(), dir: dir.clone() };

    let orderers: Vec<(u64, SocketAddr)> = (1..=NODES)
        .map(|id| free_addr().map(|a| (id, a)))
        .collect::<Result<_, _>>()
        .map_err(|e| fail("port allocation", e))?;
    let api = free_addr().map_err(|e| fail("port allocation", e))?;

    for &(id, addr) in &orderers {
        let mut args = vec![
            "orderer".to_string(),
            "--id".into(),
            id.to_string(),
            "--listen".into(),
            addr.to_string(),
            "--data-dir".into(),
            dir.join(format!("orderer-{id}")).display().to_string(),
            "--seed".into(),
            scenario.file.world.seed.to_string(),
        ];
        for &(peer, paddr) in orderers.iter().filter(|(p, _)| *p != id) {
            args.push("--peer".into());
            args.push(format!("{peer}={paddr}"));
        }
        fleet.children.push(spawn(bin, &args)?);
    }
    let mut args = vec![
        "serve".to_string(),
        "--listen".into(),
        api.to_string(),
        "--data-dir".into(),
        dir.join("api").display().to_string(),
    ];
    for &(id, addr) in &orderers {
        args.push("--orderer".into());
        args.push(format!("{id}={addr}"));
    }
    fleet.children.push(spawn(bin, &args)?);

    let registry = demo_registry();
    let secret = registry.secret(GATEWAY_ORG).expect("gateway org registered").expose().to_string();
    let mut client = HttpLedger::new(&format!("http://{api}"), Duration::from_secs(10));
    let deadline = Instant::now() + STARTUP;
    let token = loop {
        match client.register(GATEWAY_ORG, &secret) {
            Ok(t) => break t,
            Err(e) if Instant::now() > deadline => return Err(fail("api server did not come up", e)),
            Err(_) => sleep(Duration::from_millis(100)),
        }
    };

    let records = detect(scenario)?;
    let mut submitter = Submitter::new(client.clone(), GATEWAY_ORG, secret).with_retry(50, Duration::from_millis(200));
    for rec in &records {
        submitter.submit(rec.clone()).map_err(|e| fail("submit", e))?;
    }

    // PENDING answers commit later; wait until every record is readable
    let sensors: BTreeSet<String> = scenario
        .file
        .world
        .build_world()
        .map_err(|e| fail("telemetry", e))?
        .roster()
        .iter()
        .map(|s| s.sensor_id.clone())
        .collect();
    let want: BTreeSet<&str> = records.iter().map(|r| r.record_id.as_str()).collect();
    let deadline = Instant::now() + SETTLE;
    let committed = loop {
        let committed = read_committed(&client, &token, &sensors)?;
        let have: BTreeSet<&str> = committed.iter().map(|r| r.record_id.as_str()).collect();
        if want.is_subset(&have) || Instant::now() > deadline {
            break committed;
        }
        sleep(Duration::from_millis(100));
    };
    let verify = client.verify(&token).map_err(|e| fail("verify", e))?;
    let diffs = match_expected(&scenario.file.expected, &committed);
    drop(fleet);
    Ok(ScenarioReport {
        scenario: scenario.file.name.clone(),
        committed,
        chain_ok: verify.ok,
        first_bad_block: verify.first_bad_block,
        matched: diffs.is_empty(),
        diffs,
    })
}

fn read_committed(
    client: &HttpLedger,
    token: &str,
    sensors: &BTreeSet<String>,
) -> Result<Vec<DefectRecord>, HarnessError> {
    let mut all = Vec::new();
    for s in sensors {
        all.extend(client.query_sensor(token, s).map_err(|e| fail("query", e))?);
    }
    all.sort_by(|a, b| (a.timestamp, &a.record_id).cmp(&(b.timestamp, &b.record_id)));
    Ok(all)
}
