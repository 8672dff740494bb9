//! Newline-delimited JSON messages exchanged with external simulators.
//!
//! One request object per line on the child's stdin, one response object per
//! line on its stdout. Responses are matched to requests by `id`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ActorState, SimError, SimulationOutput};
use crate::scenario::{ScenarioSpec, TestInput};

/// Maximum deviation of a reported timestamp from `k * dt`.
pub const GRID_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeRequest {
    pub id: u64,
    pub scenario: String,
    pub parameters: BTreeMap<String, f64>,
    pub dt: f64,
    pub seed: u64,
}

impl BridgeRequest {
    /// Search variables and fixed settings are sent together under `parameters`.
    pub fn new(id: u64, spec: &ScenarioSpec, input: &TestInput, dt: f64, seed: u64) -> Self {
        let mut parameters = spec.fixed_settings.clone();
        parameters.extend(spec.names().map(str::to_owned).zip(input.values.iter().copied()));
        Self {
            id,
            scenario: spec.scenario_path.clone(),
            parameters,
            dt,
            seed,
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("request serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeResponse {
    pub id: u64,
    pub dt: f64,
    /// Rows of `[t, x, y, yaw, speed]`.
    pub actors: BTreeMap<String, Vec<[f64; 5]>>,
    pub collision: bool,
    pub collision_time: Option<f64>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl BridgeResponse {
    pub fn from_output(id: u64, output: &SimulationOutput) -> Self {
        Self {
            id,
            dt: output.dt,
            actors: output
                .actors
                .iter()
                .map(|(name, states)| {
                    (name.clone(), states.iter().map(|s| [s.t, s.x, s.y, s.yaw, s.speed]).collect())
                })
                .collect(),
            collision: output.collision,
            collision_time: output.collision_time,
            metadata: output.metadata.clone(),
        }
    }

    pub fn parse(line: &str) -> Result<Self, SimError> {
        serde_json::from_str(line.trim_end()).map_err(|e| SimError::Malformed(e.to_string()))
    }

    /// Converts to a [`SimulationOutput`], validating every invariant and
    /// snapping timestamps onto the exact `k * dt` grid.
    pub fn into_output(self) -> Result<SimulationOutput, SimError> {
        let mut output = SimulationOutput {
            dt: self.dt,
            actors: self
                .actors
                .into_iter()
                .map(|(name, rows)| {
                    let states = rows
                        .into_iter()
                        .map(|[t, x, y, yaw, speed]| ActorState { t, x, y, yaw, speed })
                        .collect();
                    (name, states)
                })
                .collect(),
            collision: self.collision,
            collision_time: self.collision_time,
            metadata: self.metadata,
        };
        output.check(GRID_TOLERANCE)?;
        output.snap_to_grid();
        Ok(output)
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("response serializes")
    }
}
