// Copyright 2026 The defectchain Authors
// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::roster::{default_roster, AssetKind, SensorKind, SensorSpec};
use super::thermal::{conveyor_thermal_step, ConveyorState, ThermalParams};
use super::{FaultInjection, InjectionMode, SensorReading, SimError};
use crate::TICK_MS;

/// Scenario-tunable constants. Every field has a default so scenario files
/// only list what they change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConstants {
    pub start_epoch_ms: u64,
    pub thermal: ThermalParams,
    /// Commanded belt speed per conveyor, mm/s.
    pub conveyor_speeds: Vec<f64>,
    pub robot_cycle_ticks: u64,
    pub gripper_open_pct: f64,
    pub gripper_closed_pct: f64,
    pub grip_force_n: f64,
    pub container_setpoint_c: f64,
    pub container_humidity_pct: f64,
    pub shipment_id: String,
    /// Lat/lon waypoints the container travels between, degrees.
    pub gps_waypoints: Vec<[f64; 2]>,
    pub gps_leg_ticks: u64,
    /// Multiplies every sensor's noise sigma; 0 gives noiseless readings.
    pub noise_scale: f64,
    /// Per-sensor sample period overrides, ticks.
    pub sample_periods: BTreeMap<String, u64>,
}

impl Default for SimConstants {
    fn default() -> Self {
        SimConstants {
            start_epoch_ms: 1_714_521_600_000,
            thermal: ThermalParams::default(),
            conveyor_speeds: vec![100.0; 4],
            robot_cycle_ticks: 60,
            gripper_open_pct: 10.0,
            gripper_closed_pct: 80.0,
            grip_force_n: 300.0,
            container_setpoint_c: 5.0,
            container_humidity_pct: 45.0,
            shipment_id: "SHIP-001".to_string(),
            gps_waypoints: vec![[33.9937, -81.0300], [34.0007, -81.0348], [34.0150, -81.0600]],
            gps_leg_ticks: 600,
            noise_scale: 1.0,
            sample_periods: BTreeMap::new(),
        }
    }
}

impl SimConstants {
    fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConstants(m.to_string()));
        if self.conveyor_speeds.len() != 4 {
            return bad("conveyor_speeds must list exactly 4 conveyors");
        }
        if self.conveyor_speeds.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return bad("conveyor speeds must be finite and nonnegative");
        }
        let t = &self.thermal;
        if !(t.k_cool > 0.0 && t.k_heat >= 0.0 && t.hysteresis >= 0.0 && t.s_safe >= 0.0) {
            return bad("thermal constants out of range");
        }
        if t.k_cool * (TICK_MS as f64 / 1000.0) > 1.0 {
            return bad("k_cool too large for the tick length");
        }
        if self.robot_cycle_ticks == 0 || self.gps_leg_ticks == 0 {
            return bad("cycle lengths must be positive");
        }
        if self.gps_waypoints.is_empty() {
            return bad("at least one gps waypoint is required");
        }
        if self.noise_scale.is_nan() || self.noise_scale < 0.0 {
            return bad("noise_scale must be nonnegative");
        }
        if self.sample_periods.values().any(|p| *p == 0) {
            return bad("sample periods must be positive");
        }
        Ok(())
    }
}

/// A scenario file: seed, run length, constants and an injection schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimScenario {
    pub seed: u64,
    pub duration_ticks: u64,
    #[serde(default)]
    pub constants: SimConstants,
    #[serde(default)]
    pub injections: Vec<FaultInjection>,
}

impl SimScenario {
    pub fn build_world(&self) -> Result<SimWorld, SimError> {
        let mut world = SimWorld::with_constants(self.seed, self.constants.clone())?;
        for inj in &self.injections {
            world.inject(inj.clone())?;
        }
        Ok(world)
    }

    /// Runs the whole scenario and returns every reading.
    pub fn run(&self) -> Result<Vec<SensorReading>, SimError> {
        let mut world = self.build_world()?;
        if self.duration_ticks == 0 {
            return Ok(Vec::new());
        }
        world.step(self.duration_ticks)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimWorld {
    seed: u64,
    tick: u64,
    constants: SimConstants,
    roster: Vec<SensorSpec>,
    conveyors: Vec<ConveyorState>,
    injections: Vec<FaultInjection>,
}

pub fn build_default_world(seed: u64) -> SimWorld {
    SimWorld::with_constants(seed, SimConstants::default()).expect("default constants are valid")
}

impl SimWorld {
    pub fn with_constants(seed: u64, constants: SimConstants) -> Result<Self, SimError> {
        constants.validate()?;
        let mut roster = default_roster();
        for spec in &mut roster {
            if let Some(p) = constants.sample_periods.get(&spec.sensor_id) {
                spec.sample_period = *p;
            }
        }
        if let Some(unknown) = constants.sample_periods.keys().find(|id| !roster.iter().any(|s| &s.sensor_id == *id)) {
            return Err(SimError::UnknownSensor(unknown.clone()));
        }
        let conveyors =
            constants.conveyor_speeds.iter().map(|&s| ConveyorState::at_rest(constants.thermal.ambient, s)).collect();
        Ok(SimWorld { seed, tick: 0, constants, roster, conveyors, injections: Vec::new() })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn constants(&self) -> &SimConstants {
        &self.constants
    }

    pub fn roster(&self) -> &[SensorSpec] {
        &self.roster
    }

    pub fn sensor(&self, sensor_id: &str) -> Option<&SensorSpec> {
        self.roster.iter().find(|s| s.sensor_id == sensor_id)
    }

    pub fn conveyors(&self) -> &[ConveyorState] {
        &self.conveyors
    }

    pub fn pending_injections(&self) -> &[FaultInjection] {
        &self.injections
    }

    /// Epoch milliseconds of `tick`.
    pub fn timestamp_of(&self, tick: u64) -> u64 {
        self.constants.start_epoch_ms + tick * TICK_MS
    }

    /// Changes a conveyor's commanded speed from the next tick on.
    pub fn set_conveyor_speed(&mut self, conveyor: usize, speed: f64) -> Result<(), SimError> {
        let Some(c) = self.conveyors.get_mut(conveyor) else {
            return Err(SimError::UnknownSensor(format!("Conv{}", conveyor + 1)));
        };
        if !speed.is_finite() || speed < 0.0 {
            return Err(SimError::InvalidConstants("speed must be finite and nonnegative".into()));
        }
        c.commanded_speed = speed;
        if !c.safety_mode {
            c.actual_speed = speed;
        } else {
            c.actual_speed = speed.min(self.constants.thermal.s_safe);
        }
        Ok(())
    }

    /// Queues a fault injection. Overlapping injections on one sensor
    /// resolve last-writer-wins: the most recently queued active one applies.
    pub fn inject(&mut self, injection: FaultInjection) -> Result<(), SimError> {
        let spec =
            self.sensor(&injection.sensor_id).ok_or_else(|| SimError::UnknownSensor(injection.sensor_id.clone()))?;
        if injection.mode == InjectionMode::Press && spec.kind != SensorKind::EStop {
            return Err(SimError::InvalidMode { sensor_id: injection.sensor_id.clone(), mode: injection.mode });
        }
        if injection.duration_ticks == 0 {
            return Err(SimError::ZeroDuration);
        }
        if injection.at_tick < self.tick {
            return Err(SimError::InjectionInPast { at_tick: injection.at_tick, now: self.tick });
        }
        self.injections.push(injection);
        Ok(())
    }

    /// Advances the clock by `ticks`, returning readings sorted by
    /// `(timestamp, sensor_id)`.
    pub fn step(&mut self, ticks: u64) -> Result<Vec<SensorReading>, SimError> {
        if ticks == 0 {
            return Err(SimError::ZeroTicks);
        }
        let dt = TICK_MS as f64 / 1000.0;
        let mut out = Vec::new();
        for _ in 0..ticks {
            self.tick += 1;
            let t = self.tick;
            for c in &mut self.conveyors {
                *c = conveyor_thermal_step(*c, &self.constants.thermal, dt);
            }
            let timestamp = self.timestamp_of(t);
            for spec in &self.roster {
                if !t.is_multiple_of(spec.sample_period) {
                    continue;
                }
                let mut value = self.physical_value(spec, t) + self.noise(spec, t);
                if let Some(inj) =
                    self.injections.iter().rev().find(|i| i.sensor_id == spec.sensor_id && i.is_active(t))
                {
                    value = match inj.mode {
                        InjectionMode::Offset => value + inj.magnitude,
                        InjectionMode::SetValue => inj.magnitude,
                        InjectionMode::Press => 1.0,
                    };
                }
                out.push(SensorReading {
                    sensor_id: spec.sensor_id.clone(),
                    timestamp,
                    value,
                    unit: spec.unit.clone(),
                });
            }
            self.injections.retain(|i| i.at_tick + i.duration_ticks > t);
        }
        Ok(out)
    }

    fn noise(&self, spec: &SensorSpec, tick: u64) -> f64 {
        let sigma = spec.noise_sigma * self.constants.noise_scale;
        if sigma == 0.0 {
            return 0.0;
        }
        // counter-based: one independent stream per (seed, sensor, tick)
        let key = splitmix(self.seed ^ splitmix(fnv1a(&spec.sensor_id)) ^ splitmix(tick.wrapping_mul(0x9E37_79B9)));
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let z: f64 = StandardNormal.sample(&mut rng);
        sigma * z
    }

    fn physical_value(&self, spec: &SensorSpec, tick: u64) -> f64 {
        let c = &self.constants;
        let label = spec.asset.label.as_str();
        match (spec.asset.kind, spec.kind) {
            (_, SensorKind::EStop) => 0.0,
            (AssetKind::Robot, kind) => {
                let closure = self.gripper_closure(label, tick);
                let frac =
                    ((closure - c.gripper_open_pct) / (c.gripper_closed_pct - c.gripper_open_pct)).clamp(0.0, 1.0);
                match kind {
                    SensorKind::Potentiometer => closure,
                    SensorKind::LoadCell => c.grip_force_n * frac,
                    SensorKind::PressureGauge => 1.0 + 3.0 * frac,
                    _ => 0.0,
                }
            }
            (AssetKind::Conveyor, kind) => {
                let idx = conveyor_index(label);
                let state = &self.conveyors[idx];
                match kind {
                    SensorKind::Temperature => state.temperature,
                    SensorKind::Speed => state.actual_speed,
                    SensorKind::Vibration => 1.0 + 0.02 * state.actual_speed,
                    _ => 0.0,
                }
            }
            (AssetKind::Container, SensorKind::Temperature) => c.container_setpoint_c,
            (AssetKind::Container, SensorKind::Humidity) => c.container_humidity_pct,
            (AssetKind::Container, SensorKind::Gyroscope) => 0.0,
            (AssetKind::Container, SensorKind::Gps) => {
                let [lat, lon] = self.gps_position(tick);
                if spec.sensor_id.ends_with("Lat") {
                    lat
                } else {
                    lon
                }
            }
            _ => 0.0,
        }
    }

    /// Scripted gripper profile: open, close ramp, hold, open ramp.
    fn gripper_closure(&self, robot_label: &str, tick: u64) -> f64 {
        let c = &self.constants;
        let cycle = c.robot_cycle_ticks;
        let robot: u64 = robot_label.trim_start_matches('R').parse().unwrap_or(1);
        let offset = (robot - 1) * cycle / 5;
        let phase = ((tick + offset) % cycle) as f64 / cycle as f64;
        let (open, closed) = (c.gripper_open_pct, c.gripper_closed_pct);
        let lerp = |a: f64, b: f64, x: f64| a + (b - a) * x;
        if phase < 0.2 {
            open
        } else if phase < 0.35 {
            lerp(open, closed, (phase - 0.2) / 0.15)
        } else if phase < 0.75 {
            closed
        } else if phase < 0.9 {
            lerp(closed, open, (phase - 0.75) / 0.15)
        } else {
            open
        }
    }

    fn gps_position(&self, tick: u64) -> [f64; 2] {
        let wp = &self.constants.gps_waypoints;
        let leg = self.constants.gps_leg_ticks;
        let i = (tick / leg) as usize;
        if i + 1 >= wp.len() {
            return wp[wp.len() - 1];
        }
        let x = (tick % leg) as f64 / leg as f64;
        [wp[i][0] + (wp[i + 1][0] - wp[i][0]) * x, wp[i][1] + (wp[i + 1][1] - wp[i][1]) * x]
    }
}

fn conveyor_index(label: &str) -> usize {
    label.trim_start_matches("Conv").parse::<usize>().map(|n| n - 1).unwrap_or(0)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
