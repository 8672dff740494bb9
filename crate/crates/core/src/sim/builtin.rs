//! Deterministic kinematic pedestrian-crossing world with a TTC-triggered AEB.
//!
//! The ego vehicle drives along +x. A pedestrian standing at `ped_pos` starts
//! walking along `ped_cross_direction` once the ego is within `PedDist` of it,
//! and becomes visible to the AEB after walking `occlusion_reveal_dist`. The
//! AEB requests full braking when the longitudinal time gap drops below
//! `ttc_brake_threshold`; the brake engages `reaction_delay` later.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ActorState, SimError, SimulationOutput, Simulator, EGO, PEDESTRIAN};
use crate::scenario::{ScenarioSpec, TestInput};

/// Floor on the ego speed used in the AEB time gap.
const MIN_TTC_SPEED: f64 = 0.1;
/// Distance past the pedestrian start after which the ego has cleared the scene.
const CLEARANCE: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AebWorldConfig {
    pub dt: f64,
    pub horizon: f64,
    pub ego_start: (f64, f64),
    pub ped_pos: (f64, f64),
    pub ped_cross_direction: (f64, f64),
    pub ped_stop_after: f64,
    pub detection_range: f64,
    pub occlusion_reveal_dist: f64,
    pub ttc_brake_threshold: f64,
    pub reaction_delay: f64,
    pub max_decel: f64,
    pub collision_radius: f64,
}

impl Default for AebWorldConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            horizon: 12.0,
            ego_start: (0.0, 0.0),
            ped_pos: (80.0, 4.0),
            ped_cross_direction: (0.0, -1.0),
            ped_stop_after: 8.0,
            detection_range: 50.0,
            occlusion_reveal_dist: 0.2,
            ttc_brake_threshold: 1.8,
            reaction_delay: 0.1,
            max_decel: 8.0,
            collision_radius: 1.0,
        }
    }
}

impl AebWorldConfig {
    /// Setting names accepted as fixed settings or search variables.
    pub const SETTINGS: [&'static str; 15] = [
        "dt",
        "horizon",
        "ego_start_x",
        "ego_start_y",
        "ped_x",
        "ped_y",
        "ped_dir_x",
        "ped_dir_y",
        "ped_stop_after",
        "detection_range",
        "occlusion_reveal_dist",
        "ttc_brake_threshold",
        "reaction_delay",
        "max_decel",
        "collision_radius",
    ];

    fn slot(&mut self, name: &str) -> Option<&mut f64> {
        Some(match name {
            "dt" => &mut self.dt,
            "horizon" => &mut self.horizon,
            "ego_start_x" => &mut self.ego_start.0,
            "ego_start_y" => &mut self.ego_start.1,
            "ped_x" => &mut self.ped_pos.0,
            "ped_y" => &mut self.ped_pos.1,
            "ped_dir_x" => &mut self.ped_cross_direction.0,
            "ped_dir_y" => &mut self.ped_cross_direction.1,
            "ped_stop_after" => &mut self.ped_stop_after,
            "detection_range" => &mut self.detection_range,
            "occlusion_reveal_dist" => &mut self.occlusion_reveal_dist,
            "ttc_brake_threshold" => &mut self.ttc_brake_threshold,
            "reaction_delay" => &mut self.reaction_delay,
            "max_decel" => &mut self.max_decel,
            "collision_radius" => &mut self.collision_radius,
            _ => return None,
        })
    }

    pub fn set(&mut self, name: &str, value: f64) -> bool {
        match self.slot(name) {
            Some(v) => {
                *v = value;
                true
            }
            None => false,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_owned()));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if self.horizon.is_nan() || self.horizon < 1.0 {
            return bad("horizon must be at least 1 s");
        }
        if self.max_decel.is_nan() || self.max_decel <= 0.0 {
            return bad("max_decel must be positive");
        }
        if self.collision_radius.is_nan() || self.collision_radius <= 0.0 {
            return bad("collision_radius must be positive");
        }
        let (dx, dy) = self.ped_cross_direction;
        if ((dx * dx + dy * dy).sqrt() - 1.0).abs() > 1e-9 {
            return bad("ped_cross_direction must be a unit vector");
        }
        if self.ped_stop_after < 0.0 || self.reaction_delay < 0.0 {
            return bad("ped_stop_after and reaction_delay must be non-negative");
        }
        Ok(())
    }

    fn reaction_steps(&self) -> u64 {
        (self.reaction_delay / self.dt).round() as u64
    }

    fn horizon_steps(&self) -> u64 {
        (self.horizon / self.dt).round() as u64
    }
}

/// The three scenario inputs of the pedestrian-crossing world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AebInputs {
    pub ego_speed: f64,
    pub ped_speed: f64,
    pub ped_dist: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub step: u64,
    pub ego: (f64, f64),
    pub ego_speed: f64,
    pub ped: (f64, f64),
    pub ped_walked: f64,
    pub ped_triggered: bool,
    pub ped_revealed: bool,
    /// Step at which the AEB first requested braking.
    pub brake_request: Option<u64>,
}

impl WorldState {
    pub fn initial(config: &AebWorldConfig, inputs: &AebInputs) -> Self {
        Self {
            step: 0,
            ego: config.ego_start,
            ego_speed: inputs.ego_speed,
            ped: config.ped_pos,
            ped_walked: 0.0,
            ped_triggered: false,
            ped_revealed: false,
            brake_request: None,
        }
    }

    pub fn distance(&self) -> f64 {
        (self.ego.0 - self.ped.0).hypot(self.ego.1 - self.ped.1)
    }

    pub fn time(&self, config: &AebWorldConfig) -> f64 {
        self.step as f64 * config.dt
    }

    pub fn brake_active(&self, config: &AebWorldConfig) -> bool {
        self.brake_request
            .is_some_and(|r| self.step >= r + config.reaction_steps())
    }

    fn ped_walking(&self, config: &AebWorldConfig) -> bool {
        self.ped_triggered && self.ped_walked < config.ped_stop_after
    }

    fn ego_state(&self, config: &AebWorldConfig) -> ActorState {
        ActorState {
            t: self.time(config),
            x: self.ego.0,
            y: self.ego.1,
            yaw: 0.0,
            speed: self.ego_speed,
        }
    }

    fn ped_state(&self, config: &AebWorldConfig, inputs: &AebInputs) -> ActorState {
        let (dx, dy) = config.ped_cross_direction;
        ActorState {
            t: self.time(config),
            x: self.ped.0,
            y: self.ped.1,
            yaw: dy.atan2(dx),
            speed: if self.ped_walking(config) { inputs.ped_speed } else { 0.0 },
        }
    }
}

/// Advances the world by one explicit Euler step of `config.dt`.
pub fn step_builtin_world(state: &WorldState, config: &AebWorldConfig, inputs: &AebInputs) -> WorldState {
    let mut next = state.clone();
    let distance = state.distance();

    if !next.ped_triggered && distance <= inputs.ped_dist {
        next.ped_triggered = true;
    }
    if !next.ped_revealed
        && next.ped_walked >= config.occlusion_reveal_dist
        && distance <= config.detection_range
    {
        next.ped_revealed = true;
    }
    if next.brake_request.is_none() && next.ped_revealed {
        let gap = state.ped.0 - state.ego.0;
        if gap > 0.0 && gap / state.ego_speed.max(MIN_TTC_SPEED) <= config.ttc_brake_threshold {
            next.brake_request = Some(state.step);
        }
    }

    next.ego.0 += state.ego_speed * config.dt;
    if next.brake_active(config) {
        next.ego_speed = (state.ego_speed - config.max_decel * config.dt).max(0.0);
    }

    if next.ped_walking(config) {
        let d = (inputs.ped_speed * config.dt).min(config.ped_stop_after - next.ped_walked);
        let (dx, dy) = config.ped_cross_direction;
        next.ped.0 += dx * d;
        next.ped.1 += dy * d;
        next.ped_walked += d;
    }

    next.step += 1;
    next
}

/// Time of the first recorded step at which the actors are closer than the
/// collision radius (strictly).
pub fn detect_collision(ego: &[ActorState], pedestrian: &[ActorState], config: &AebWorldConfig) -> Option<f64> {
    ego.iter()
        .zip(pedestrian)
        .find(|(e, p)| e.distance_to(p) < config.collision_radius)
        .map(|(e, _)| e.t)
}

/// The built-in backend. Pure function of (scenario, input); the seed is only recorded.
#[derive(Debug, Clone, Default)]
pub struct BuiltinSimulator {
    pub base: AebWorldConfig,
}

impl BuiltinSimulator {
    pub fn new(base: AebWorldConfig) -> Self {
        Self { base }
    }

    /// Resolves the world configuration and the three scenario inputs for one instance.
    pub fn resolve(&self, spec: &ScenarioSpec, input: &TestInput) -> Result<(AebWorldConfig, AebInputs), SimError> {
        let errors = spec.validate_input(input);
        if let Some(e) = errors.into_iter().next() {
            return Err(SimError::InvalidInput(e));
        }
        let mut config = self.base.clone();
        let mut inputs = AebInputs { ego_speed: f64::NAN, ped_speed: f64::NAN, ped_dist: f64::NAN };
        let named = spec
            .fixed_settings
            .iter()
            .map(|(k, v)| (k.as_str(), *v))
            .chain(spec.names().zip(input.values.iter().copied()));
        for (name, value) in named {
            match name {
                "EgoSpeed" => inputs.ego_speed = value,
                "PedSpeed" => inputs.ped_speed = value,
                "PedDist" => inputs.ped_dist = value,
                other => {
                    if !config.set(other, value) {
                        return Err(SimError::UnknownVariable(other.to_owned()));
                    }
                }
            }
        }
        for (name, v) in [("EgoSpeed", inputs.ego_speed), ("PedSpeed", inputs.ped_speed), ("PedDist", inputs.ped_dist)] {
            if v.is_nan() {
                return Err(SimError::InvalidConfig(format!("{name} is neither searched nor fixed")));
            }
            if v < 0.0 {
                return Err(SimError::InvalidConfig(format!("{name} must be non-negative")));
            }
        }
        config.validate()?;
        Ok((config, inputs))
    }

    pub fn run(config: &AebWorldConfig, inputs: &AebInputs, seed: u64) -> SimulationOutput {
        let mut state = WorldState::initial(config, inputs);
        let mut ego = Vec::new();
        let mut ped = Vec::new();
        let horizon = config.horizon_steps();
        let mut collision_time = None;

        loop {
            ego.push(state.ego_state(config));
            ped.push(state.ped_state(config, inputs));
            let k = ego.len() - 1;
            if let Some(t) = detect_collision(&ego[k..], &ped[k..], config) {
                collision_time = Some(t);
                break;
            }
            let cleared = state.ego.0 > config.ped_pos.0 + CLEARANCE;
            let settled = state.ego_speed == 0.0 && state.ped_walked >= config.ped_stop_after;
            if cleared || settled || state.step >= horizon {
                break;
            }
            state = step_builtin_world(&state, config, inputs);
        }

        let metadata: BTreeMap<String, String> = [
            ("simulator", "builtin-aeb".to_owned()),
            ("dt", config.dt.to_string()),
            ("sampling_rate_hz", (1.0 / config.dt).to_string()),
            ("seed", seed.to_string()),
            (crate::fitness::COLLISION_RADIUS_KEY, config.collision_radius.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_owned(), v))
        .collect();

        SimulationOutput {
            dt: config.dt,
            actors: [(EGO.to_owned(), ego), (PEDESTRIAN.to_owned(), ped)].into_iter().collect(),
            collision: collision_time.is_some(),
            collision_time,
            metadata,
        }
    }
}

impl Simulator for BuiltinSimulator {
    fn name(&self) -> &str {
        "builtin"
    }

    fn simulate(&self, spec: &ScenarioSpec, input: &TestInput, seed: u64) -> Result<SimulationOutput, SimError> {
        let (config, inputs) = self.resolve(spec, input)?;
        Ok(Self::run(&config, &inputs, seed))
    }
}
