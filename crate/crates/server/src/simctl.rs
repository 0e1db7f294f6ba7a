// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

//! Simulated cell driven in wall-clock time for the demo: start, stop and
//! fault injection over HTTP, telemetry onto the event stream, and detected
//! defects into the normal submission path.

use std::sync::{Arc, Mutex};
use std::time::Duration;

use defectchain_core::access::{ApiError, ErrorCode};
use defectchain_core::gateway::{Gateway, RuleSet};
use defectchain_core::telemetry::{FaultInjection, InjectionMode, SimWorld};
use defectchain_core::DefectRecord;
use serde::{Deserialize, Serialize};
use tokio::sync::mpsc;
use tokio::time::{interval, MissedTickBehavior};

use crate::app::AppState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStatus {
    pub running: bool,
    pub tick: u64,
    pub sim_time_ms: u64,
    pub shipment_id: String,
    pub pending_injections: Vec<FaultInjection>,
}

/// Body of `POST /api/sim/inject`. Without `at_tick` the fault starts at
/// the current tick.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectRequest {
    pub sensor_id: String,
    pub mode: InjectionMode,
    #[serde(default)]
    pub magnitude: f64,
    pub duration_ticks: u64,
    #[serde(default)]
    pub at_tick: Option<u64>,
}

struct Core {
    world: SimWorld,
    gateway: Gateway,
    running: bool,
}

#[derive(Clone)]
pub struct SimHandle {
    core: Arc<Mutex<Core>>,
}

impl SimHandle {
    /// Starts the stepping and submission tasks; the cell begins stopped.
    pub fn spawn(state: Arc<AppState>, world: SimWorld, rules: RuleSet, step: Duration, org: String) -> SimHandle {
        let shipment = world.constants().shipment_id.clone();
        let core = Arc::new(Mutex::new(Core { world, gateway: Gateway::new(rules, shipment), running: false }));
        let (rec_tx, mut rec_rx) = mpsc::unbounded_channel::<DefectRecord>();

        let submit_state = state.clone();
        tokio::spawn(async move {
            while let Some(rec) = rec_rx.recv().await {
                if let Err(e) = submit_state.submit_record(&org, rec).await {
                    eprintln!("sim: submission failed: {e}");
                }
            }
        });

        let step_core = core.clone();
        tokio::spawn(async move {
            let mut timer = interval(step);
            timer.set_missed_tick_behavior(MissedTickBehavior::Delay);
            loop {
                timer.tick().await;
                let (readings, records) = {
                    let mut c = step_core.lock().expect("sim lock");
                    if !c.running {
                        continue;
                    }
                    let readings = match c.world.step(1) {
                        Ok(r) => r,
                        Err(e) => {
                            eprintln!("sim: step failed: {e}");
                            c.running = false;
                            continue;
                        }
                    };
                    let records = c.gateway.run(&readings).unwrap_or_else(|e| {
                        eprintln!("sim: gateway: {e}");
                        Vec::new()
                    });
                    (readings, records)
                };
                for r in &readings {
                    state.events.publish_telemetry(r);
                }
                for rec in records {
                    if rec_tx.send(rec).is_err() {
                        return;
                    }
                }
            }
        });
        SimHandle { core }
    }

    pub fn status(&self) -> SimStatus {
        let c = self.core.lock().expect("sim lock");
        SimStatus {
            running: c.running,
            tick: c.world.tick(),
            sim_time_ms: c.world.timestamp_of(c.world.tick()),
            shipment_id: c.world.constants().shipment_id.clone(),
            pending_injections: c.world.pending_injections().to_vec(),
        }
    }

    /// Idempotent.
    pub fn start(&self) -> SimStatus {
        self.core.lock().expect("sim lock").running = true;
        self.status()
    }

    pub fn stop(&self) -> SimStatus {
        self.core.lock().expect("sim lock").running = false;
        self.status()
    }

    pub fn inject(&self, req: InjectRequest) -> Result<SimStatus, ApiError> {
        {
            let mut c = self.core.lock().expect("sim lock");
            let at_tick = req.at_tick.unwrap_or_else(|| c.world.tick());
            c.world
                .inject(FaultInjection {
                    at_tick,
                    sensor_id: req.sensor_id,
                    mode: req.mode,
                    magnitude: req.magnitude,
                    duration_ticks: req.duration_ticks,
                })
                .map_err(|e| ApiError::new(ErrorCode::ValidationFailed, e.to_string()))?;
        }
        Ok(self.status())
    }
}
