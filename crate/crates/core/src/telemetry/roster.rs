// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

pub const CONTAINER_LABEL: &str = "Container1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AssetKind {
    Robot,
    Conveyor,
    Container,
    Hmi,
    ControlPanel,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AssetId {
    pub kind: AssetKind,
    pub label: String,
}

impl AssetId {
    fn new(kind: AssetKind, label: impl Into<String>) -> Self {
        AssetId { kind, label: label.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SensorKind {
    Potentiometer,
    LoadCell,
    PressureGauge,
    Temperature,
    Speed,
    Vibration,
    EStop,
    Humidity,
    Gyroscope,
    Gps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    /// `<AssetLabel>_<SensorKind>`, e.g. `R02_LoadCell`.
    pub sensor_id: String,
    pub asset: AssetId,
    pub kind: SensorKind,
    pub unit: String,
    pub sample_period: u64,
    pub noise_sigma: f64,
}

impl SensorSpec {
    fn new(asset: &AssetId, suffix: &str, kind: SensorKind, unit: &str, period: u64, sigma: f64) -> Self {
        SensorSpec {
            sensor_id: format!("{}_{}", asset.label, suffix),
            asset: asset.clone(),
            kind,
            unit: unit.to_string(),
            sample_period: period,
            noise_sigma: sigma,
        }
    }
}

/// The testbed's sensor placements plus the shipment container, sorted by
/// sensor id. GPS is two scalar channels.
pub fn default_roster() -> Vec<SensorSpec> {
    let mut out = Vec::new();
    for i in 1..=5 {
        let robot = AssetId::new(AssetKind::Robot, format!("R{i:02}"));
        if i <= 4 {
            out.push(SensorSpec::new(&robot, "Potentiometer", SensorKind::Potentiometer, "%", 2, 0.5));
            out.push(SensorSpec::new(&robot, "LoadCell", SensorKind::LoadCell, "N", 2, 2.0));
        } else {
            out.push(SensorSpec::new(&robot, "PressureGauge", SensorKind::PressureGauge, "bar", 2, 0.05));
        }
        out.push(SensorSpec::new(&robot, "EStop", SensorKind::EStop, "state", 1, 0.0));
    }
    for i in 1..=4 {
        let conv = AssetId::new(AssetKind::Conveyor, format!("Conv{i}"));
        out.push(SensorSpec::new(&conv, "Temp", SensorKind::Temperature, "C", 1, 0.05));
        out.push(SensorSpec::new(&conv, "Speed", SensorKind::Speed, "mm/s", 5, 0.5));
        out.push(SensorSpec::new(&conv, "Vibration", SensorKind::Vibration, "mm/s", 5, 0.1));
    }
    let hmi = AssetId::new(AssetKind::Hmi, "HMI");
    out.push(SensorSpec::new(&hmi, "EStop", SensorKind::EStop, "state", 1, 0.0));
    let panel = AssetId::new(AssetKind::ControlPanel, "ControlPanel");
    out.push(SensorSpec::new(&panel, "EStop", SensorKind::EStop, "state", 1, 0.0));

    let container = AssetId::new(AssetKind::Container, CONTAINER_LABEL);
    out.push(SensorSpec::new(&container, "Temp", SensorKind::Temperature, "C", 10, 0.1));
    out.push(SensorSpec::new(&container, "Humidity", SensorKind::Humidity, "%RH", 10, 0.5));
    out.push(SensorSpec::new(&container, "Gyro", SensorKind::Gyroscope, "deg", 10, 0.2));
    out.push(SensorSpec::new(&container, "GpsLat", SensorKind::Gps, "deg", 10, 0.0));
    out.push(SensorSpec::new(&container, "GpsLon", SensorKind::Gps, "deg", 10, 0.0));

    out.sort_by(|a, b| a.sensor_id.cmp(&b.sensor_id));
    out
}
