// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

use defectchain_core::telemetry::{SimConstants, SimWorld};

use crate::{ensure, Outcome};

const DT: f64 = 0.1;

fn world(speeds: [f64; 4]) -> Result<SimWorld, String> {
    let c = SimConstants { conveyor_speeds: speeds.to_vec(), noise_scale: 0.0, ..SimConstants::default() };
    SimWorld::with_constants(17, c).map_err(|e| e.to_string())
}

/// `Teq + (T0 - Teq)·e^(-k t)` for a belt started at ambient.
fn closed_form(c: &SimConstants, speed: f64, secs: f64) -> f64 {
    let p = &c.thermal;
    let teq = p.ambient + p.k_heat * speed / p.k_cool;
    teq + (p.ambient - teq) * (-p.k_cool * secs).exp()
}

fn trajectory() -> Result<f64, String> {
    let speeds = [60.0, 80.0, 100.0, 110.0];
    let mut w = world(speeds)?;
    let c = w.constants().clone();
    let mut worst: f64 = 0.0;
    for n in 1..=10_000u64 {
        w.step(1).map_err(|e| e.to_string())?;
        for (i, belt) in w.conveyors().iter().enumerate() {
            let want = closed_form(&c, speeds[i], n as f64 * DT);
            let rel = (belt.temperature - want).abs() / want.abs();
            worst = worst.max(rel);
            ensure!(rel <= 0.01, "Conv{} tick {n}: {} vs {want} ({:.3}%)", i + 1, belt.temperature, rel * 100.0);
            ensure!(!belt.safety_mode, "Conv{} entered safety mode below t_safe", i + 1);
        }
    }
    Ok(worst)
}

fn safety_entry() -> Result<String, String> {
    let speeds = [150.0, 200.0, 120.0, 300.0];
    let mut w = world(speeds)?;
    let c = w.constants().clone();
    let p = c.thermal;
    let mut entered: [Option<u64>; 4] = [None; 4];
    let mut was_safe = [false; 4];
    let mut capped_readings = 0;
    for n in 1..=4_000u64 {
        let readings = w.step(1).map_err(|e| e.to_string())?;
        for (i, belt) in w.conveyors().iter().enumerate() {
            let first = entered[i].is_none();
            if first {
                ensure!(
                    belt.safety_mode == (belt.temperature > p.t_safe),
                    "Conv{} tick {n}: safety {} at {:.4} C",
                    i + 1,
                    belt.safety_mode,
                    belt.temperature
                );
                if belt.safety_mode {
                    entered[i] = Some(n);
                }
            }
            ensure!(
                belt.temperature <= p.t_safe || belt.safety_mode,
                "Conv{} tick {n}: above t_safe outside safety mode",
                i + 1
            );
            if belt.safety_mode {
                let cap = speeds[i].min(p.s_safe);
                ensure!(
                    belt.actual_speed == cap,
                    "Conv{} tick {n}: actual speed {} in safety mode",
                    i + 1,
                    belt.actual_speed
                );
                let id = format!("Conv{}_Speed", i + 1);
                if let Some(r) = readings.iter().find(|r| r.sensor_id == id) {
                    ensure!(r.value == p.s_safe, "{id} reads {} in safety mode", r.value);
                    capped_readings += 1;
                }
            } else if was_safe[i] {
                ensure!(
                    belt.temperature < p.t_safe - p.hysteresis,
                    "Conv{} released at {:.3} C",
                    i + 1,
                    belt.temperature
                );
            }
            was_safe[i] = belt.safety_mode;
        }
    }
    let mut detail = Vec::new();
    for (i, at) in entered.iter().enumerate() {
        let at = at.ok_or(format!("Conv{} never entered safety mode", i + 1))?;
        let teq = p.ambient + p.k_heat * speeds[i] / p.k_cool;
        let cf = ((p.ambient - teq) / (p.t_safe - teq)).ln() / p.k_cool / DT;
        let err = (at as f64 - cf).abs();
        ensure!(err <= (0.01 * cf).max(1.0), "Conv{} entered at tick {at}, closed form {cf:.2}", i + 1);
        detail.push(format!("{at} (closed form {cf:.1})"));
    }
    ensure!(capped_readings > 0, "no speed reading taken in safety mode");
    Ok(format!("safety entry ticks {}; {capped_readings} capped speed readings at {}", detail.join(", "), p.s_safe))
}

pub fn run() -> Outcome {
    let worst = trajectory()?;
    let entry = safety_entry()?;
    Ok(format!("10^4-tick trajectories within {:.3}% of the closed form; {entry}", worst * 100.0))
}
