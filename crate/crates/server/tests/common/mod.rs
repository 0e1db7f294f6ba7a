// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use defectchain_core::harness::{demo_members, demo_registry, CHANNEL_ID};
use defectchain_core::raft::BatchPolicy;
use defectchain_core::{DefectRecord, Importance, Location, TiltStatus};
use defectchain_server::app::AppState;
use defectchain_server::http_client::HttpLedger;
use defectchain_server::server::{start, RunningServer, ServeOptions};
use rand::Rng;

pub const ORG1_SECRET: &str = "org1-manufacturing-secret";
pub const ORG2_SECRET: &str = "org2-logistics-secret";
pub const ORG3_SECRET: &str = "org3-outsider-secret";

/// An API server on an ephemeral port with its own runtime. Server tasks
/// are aborted before the runtime shuts down.
pub struct TestServer {
    pub server: Option<RunningServer>,
    pub client: HttpLedger,
    pub clock: Arc<AtomicU64>,
    pub rt: tokio::runtime::Runtime,
}

impl TestServer {
    pub fn state(&self) -> &Arc<AppState> {
        &self.server.as_ref().unwrap().state
    }

    pub fn url(&self) -> String {
        self.server.as_ref().unwrap().url()
    }

    pub fn advance_clock(&self, ms: u64) {
        self.clock.fetch_add(ms, Ordering::SeqCst);
    }

    pub fn token(&self, org: &str, secret: &str) -> String {
        let (status, body) = self
            .client
            .post("/api/auth/register", None, &serde_json::json!({"org_id": org, "secret": secret}))
            .unwrap();
        assert_eq!(status, 200, "{}", String::from_utf8_lossy(&body));
        let v: serde_json::Value = serde_json::from_slice(&body).unwrap();
        v["token"].as_str().unwrap().to_string()
    }
}

impl Drop for TestServer {
    fn drop(&mut self) {
        self.server.take();
    }
}

/// Fast cutter settings so that sequential POSTs commit in a few ms.
pub fn fast_options() -> ServeOptions {
    let mut opts = ServeOptions::new("127.0.0.1:0".parse().unwrap(), demo_registry(), CHANNEL_ID, demo_members());
    opts.app.cutter_tick = Duration::from_millis(1);
    opts.app.batch = BatchPolicy { max_tx: 10, max_wait: 3 };
    opts
}

pub fn serve(configure: impl FnOnce(&mut ServeOptions)) -> TestServer {
    let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(4).enable_all().build().unwrap();
    let clock = Arc::new(AtomicU64::new(1_800_000_000_000));
    let mut opts = fast_options();
    let c = clock.clone();
    opts.app.clock = Arc::new(move || c.load(Ordering::SeqCst));
    configure(&mut opts);
    let server = rt.block_on(start(opts)).unwrap();
    let client = HttpLedger::new(&server.url(), Duration::from_secs(20));
    TestServer { server: Some(server), client, clock, rt }
}

const SENSORS: [&str; 6] = ["R01_LoadCell", "R02_LoadCell", "R03_EStop", "Conv1_Temp", "Conv2_Temp", "HMI_EStop"];
const CONTAINER_SENSORS: [&str; 2] = ["Container1_Temp", "Container1_Gyro"];
pub const SHIPMENTS: [&str; 3] = ["SHIP-001", "SHIP-002", "SHIP-003"];

pub fn all_sensors() -> Vec<&'static str> {
    SENSORS.iter().chain(CONTAINER_SENSORS.iter()).copied().collect()
}

/// A valid record with random content.
pub fn random_record<R: Rng>(rng: &mut R) -> DefectRecord {
    let mut id_bytes = [0u8; 16];
    rng.fill(&mut id_bytes);
    id_bytes[6] = (id_bytes[6] & 0x0f) | 0x40;
    id_bytes[8] = (id_bytes[8] & 0x3f) | 0x80;
    let hex: String = id_bytes.iter().map(|b| format!("{b:02x}")).collect();
    let record_id = format!("{}-{}-{}-{}-{}", &hex[0..8], &hex[8..12], &hex[12..16], &hex[16..20], &hex[20..32]);
    let container = rng.random_bool(0.4);
    let timestamp = 1_714_521_600_000 + rng.random_range(0..5u64) * 100;
    if container {
        let sensor = CONTAINER_SENSORS[rng.random_range(0..CONTAINER_SENSORS.len())];
        DefectRecord {
            record_id,
            sensor_id: sensor.into(),
            fault_type: if sensor.ends_with("Gyro") { "ExcessTilt" } else { "TemperatureOutOfRange" }.into(),
            value: rng.random_range(-50.0..50.0),
            unit: "u".into(),
            importance: Importance::Warning,
            timestamp,
            shipment_id: Some(SHIPMENTS[rng.random_range(0..SHIPMENTS.len())].into()),
            location: Some(Location { lat: rng.random_range(-90.0..90.0), lon: rng.random_range(-180.0..180.0) }),
            tilt_status: Some(if rng.random_bool(0.5) { TiltStatus::Tilted } else { TiltStatus::Upright }),
        }
    } else {
        let sensor = SENSORS[rng.random_range(0..SENSORS.len())];
        let estop = sensor.ends_with("EStop");
        DefectRecord {
            record_id,
            sensor_id: sensor.into(),
            fault_type: if estop { "EmergencyStop" } else { "OverPressure" }.into(),
            value: rng.random_range(0.0..1000.0),
            unit: "u".into(),
            importance: if estop || rng.random_bool(0.5) { Importance::Alert } else { Importance::Warning },
            timestamp,
            shipment_id: None,
            location: None,
            tilt_status: None,
        }
    }
}
