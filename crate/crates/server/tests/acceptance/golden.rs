// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

use std::time::Instant;

use defectchain_core::harness::{bundled, report, run_in_process, ReportFormat};
use defectchain_core::{Importance, TiltStatus};

use crate::{ensure, Outcome};

const EPOCH_MS: u64 = 1_714_521_600_000;

/// Linear interpolation along the first GPS leg (600 ticks).
fn first_leg(tick: u64) -> (f64, f64) {
    let f = tick as f64 / 600.0;
    (33.9937 + (34.0007 - 33.9937) * f, -81.0300 + (-81.0348 + 81.0300) * f)
}

pub fn run() -> Outcome {
    let scenario = bundled("shipment-tilt").unwrap().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let first = run_in_process(&scenario).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 30.0, "run took {secs:.1}s");
    ensure!(first.chain_ok, "chain verification failed at {:?}", first.first_bad_block);
    ensure!(first.committed.len() == 2, "{} records committed", first.committed.len());

    // gyro held at 20 deg from tick 150; container temp held at 12 C from tick 300
    let expect = [
        ("Container1_Gyro", "ExcessTilt", 150u64, 20.0, TiltStatus::Tilted),
        ("Container1_Temp", "TemperatureOutOfRange", 300, 12.0, TiltStatus::Upright),
    ];
    for (r, (sensor, fault, tick, value, tilt)) in first.committed.iter().zip(expect) {
        ensure!(r.sensor_id == sensor && r.fault_type == fault, "unexpected record {} {}", r.sensor_id, r.fault_type);
        ensure!(r.importance == Importance::Warning, "{fault} is {:?}", r.importance);
        ensure!(r.timestamp == EPOCH_MS + tick * 100, "{fault} at {}", r.timestamp);
        ensure!(r.value == value, "{fault} value {}", r.value);
        ensure!(r.shipment_id.as_deref() == Some("SHIP-001"), "{fault} shipment {:?}", r.shipment_id);
        ensure!(r.tilt_status == Some(tilt), "{fault} tilt {:?}", r.tilt_status);
        let loc = r.location.ok_or(format!("{fault} has no location"))?;
        let (lat, lon) = first_leg(tick);
        ensure!(
            (loc.lat - lat).abs() < 1e-9 && (loc.lon - lon).abs() < 1e-9,
            "{fault} at {loc:?}, expected ({lat}, {lon})"
        );
    }

    let json = report(&first, ReportFormat::Json);
    let golden =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/testdata/golden/shipment-tilt.json"))
            .map_err(|e| e.to_string())?;
    ensure!(json == golden, "report differs from the golden file");
    let second = report(&run_in_process(&scenario).map_err(|e| e.to_string())?, ReportFormat::Json);
    ensure!(second == json, "second run is not byte-identical");
    Ok(format!(
        "ExcessTilt TILTED and TemperatureOutOfRange UPRIGHT, both with shipment and location; chain ok; {secs:.2}s; two runs byte-identical and equal to the golden report"
    ))
}
