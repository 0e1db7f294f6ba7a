// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

//! First-order conveyor heating with an over-temperature safety mode.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalParams {
    pub ambient: f64,
    /// °C·s⁻¹ per mm/s of belt speed.
    pub k_heat: f64,
    /// s⁻¹.
    pub k_cool: f64,
    pub t_safe: f64,
    pub hysteresis: f64,
    /// Speed cap while in safety mode, mm/s.
    pub s_safe: f64,
}

impl Default for ThermalParams {
    fn default() -> Self {
        ThermalParams { ambient: 25.0, k_heat: 0.02, k_cool: 0.05, t_safe: 70.0, hysteresis: 5.0, s_safe: 50.0 }
    }
}

impl ThermalParams {
    /// Temperature a belt settles at when run at `speed` indefinitely.
    pub fn equilibrium(&self, speed: f64) -> f64 {
        self.ambient + self.k_heat * speed / self.k_cool
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConveyorState {
    pub temperature: f64,
    pub commanded_speed: f64,
    pub actual_speed: f64,
    pub safety_mode: bool,
}

impl ConveyorState {
    pub fn at_rest(ambient: f64, commanded_speed: f64) -> Self {
        ConveyorState { temperature: ambient, commanded_speed, actual_speed: commanded_speed, safety_mode: false }
    }
}

/// Advances one conveyor by `dt` seconds.
///
/// `T' = T + dt·(k_heat·actual_speed − k_cool·(T − ambient))`. Safety mode
/// latches when `T' > t_safe` and releases only once `T' < t_safe − hysteresis`.
pub fn conveyor_thermal_step(state: ConveyorState, params: &ThermalParams, dt: f64) -> ConveyorState {
    debug_assert!(dt > 0.0);
    let t = state.temperature;
    let next_t = t + dt * (params.k_heat * state.actual_speed - params.k_cool * (t - params.ambient));
    let safety_mode = if next_t > params.t_safe {
        true
    } else if state.safety_mode {
        next_t >= params.t_safe - params.hysteresis
    } else {
        false
    };
    let actual_speed = if safety_mode { state.commanded_speed.min(params.s_safe) } else { state.commanded_speed };
    ConveyorState { temperature: next_t, commanded_speed: state.commanded_speed, actual_speed, safety_mode }
}
