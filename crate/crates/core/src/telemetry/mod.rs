// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

//! Discrete-time simulator of the factory cell and the shipment container.
//!
//! One tick is [`crate::TICK_MS`] simulated milliseconds. A world is a pure
//! value: stepping it produces readings and never consults wall-clock time,
//! so identical seeds and injection schedules reproduce identical streams.

mod roster;
mod thermal;
mod world;

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use roster::{default_roster, AssetId, AssetKind, SensorKind, SensorSpec, CONTAINER_LABEL};
pub use thermal::{conveyor_thermal_step, ConveyorState, ThermalParams};
pub use world::{build_default_world, SimConstants, SimScenario, SimWorld};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorReading {
    pub sensor_id: String,
    /// Simulated epoch milliseconds.
    pub timestamp: u64,
    pub value: f64,
    pub unit: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InjectionMode {
    /// Adds `magnitude` to the physical value.
    Offset,
    /// Reports `magnitude` verbatim.
    SetValue,
    /// Holds an e-stop pressed (1.0).
    Press,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultInjection {
    pub at_tick: u64,
    pub sensor_id: String,
    pub mode: InjectionMode,
    #[serde(default)]
    pub magnitude: f64,
    pub duration_ticks: u64,
}

impl FaultInjection {
    pub fn is_active(&self, tick: u64) -> bool {
        tick >= self.at_tick && tick < self.at_tick.saturating_add(self.duration_ticks)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("unknown sensor {0}")]
    UnknownSensor(String),
    #[error("mode {mode:?} is not valid for sensor {sensor_id}")]
    InvalidMode { sensor_id: String, mode: InjectionMode },
    #[error("injection at tick {at_tick} is before the current tick {now}")]
    InjectionInPast { at_tick: u64, now: u64 },
    #[error("injection duration must be at least one tick")]
    ZeroDuration,
    #[error("step requires at least one tick")]
    ZeroTicks,
    #[error("invalid constants: {0}")]
    InvalidConstants(String),
}

/// Writes readings as newline-delimited JSON.
pub fn write_ndjson<W: Write>(readings: &[SensorReading], mut out: W) -> io::Result<()> {
    for r in readings {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_ndjson(text: &str) -> Result<Vec<SensorReading>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}
