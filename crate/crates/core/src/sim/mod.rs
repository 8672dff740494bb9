//! Simulator contract and simulation results.

mod builtin;
pub mod protocol;
mod subprocess;

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pool;
use crate::scenario::{ScenarioSpec, TestInput, ValidationError};

pub use builtin::{
    detect_collision, step_builtin_world, AebInputs, AebWorldConfig, BuiltinSimulator, WorldState,
};
pub use subprocess::{SubprocessSimulator, DEFAULT_BRIDGE_TIMEOUT};

pub const EGO: &str = "ego";
pub const PEDESTRIAN: &str = "pedestrian";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActorState {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub speed: f64,
}

impl ActorState {
    pub fn distance_to(&self, other: &ActorState) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn velocity(&self) -> (f64, f64) {
        (self.speed * self.yaw.cos(), self.speed * self.yaw.sin())
    }
}

/// Per-actor trajectories on a shared fixed-step time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub dt: f64,
    pub actors: BTreeMap<String, Vec<ActorState>>,
    pub collision: bool,
    pub collision_time: Option<f64>,
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OutputError {
    #[error("non-positive or non-finite time step")]
    InvalidStep,
    #[error("inconsistent trajectory lengths")]
    InconsistentLengths,
    #[error("timestamp of actor {actor:?} at step {step} is off the dt grid")]
    OffGrid { actor: String, step: usize },
    #[error("negative speed for actor {actor:?} at step {step}")]
    NegativeSpeed { actor: String, step: usize },
    #[error("non-finite state for actor {actor:?} at step {step}")]
    NonFinite { actor: String, step: usize },
    #[error("collision flag and collision time disagree")]
    CollisionTimeMismatch,
    #[error("collision time lies outside the simulated interval")]
    CollisionTimeOutOfRange,
    #[error("missing actor {0:?}")]
    MissingActor(String),
}

impl SimulationOutput {
    pub fn steps(&self) -> usize {
        self.actors.values().next().map_or(0, Vec::len)
    }

    pub fn last_time(&self) -> f64 {
        self.steps().saturating_sub(1) as f64 * self.dt
    }

    pub fn actor(&self, name: &str) -> Result<&[ActorState], OutputError> {
        self.actors
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| OutputError::MissingActor(name.to_owned()))
    }

    /// Checks the trajectory invariants. Timestamps must equal `k * dt` to
    /// within `grid_tolerance` (zero for outputs produced in-process).
    pub fn check(&self, grid_tolerance: f64) -> Result<(), OutputError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(OutputError::InvalidStep);
        }
        let len = self.steps();
        for (name, states) in &self.actors {
            if states.len() != len {
                return Err(OutputError::InconsistentLengths);
            }
            for (k, s) in states.iter().enumerate() {
                if ![s.t, s.x, s.y, s.yaw, s.speed].iter().all(|v| v.is_finite()) {
                    return Err(OutputError::NonFinite { actor: name.clone(), step: k });
                }
                if (s.t - k as f64 * self.dt).abs() > grid_tolerance {
                    return Err(OutputError::OffGrid { actor: name.clone(), step: k });
                }
                if s.speed < 0.0 {
                    return Err(OutputError::NegativeSpeed { actor: name.clone(), step: k });
                }
            }
        }
        match (self.collision, self.collision_time) {
            (true, Some(t)) => {
                if !(0.0..=self.last_time() + grid_tolerance).contains(&t) {
                    return Err(OutputError::CollisionTimeOutOfRange);
                }
            }
            (false, None) => {}
            _ => return Err(OutputError::CollisionTimeMismatch),
        }
        Ok(())
    }

    /// Rewrites every timestamp to exactly `k * dt`.
    pub fn snap_to_grid(&mut self) {
        let dt = self.dt;
        for states in self.actors.values_mut() {
            for (k, s) in states.iter_mut().enumerate() {
                s.t = k as f64 * dt;
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid input: {0}")]
    InvalidInput(ValidationError),
    #[error("scenario variable {0:?} is not understood by this simulator")]
    UnknownVariable(String),
    #[error("invalid world configuration: {0}")]
    InvalidConfig(String),
    #[error("backend produced an invalid output: {0}")]
    InvalidOutput(#[from] OutputError),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("backend terminated: {0}")]
    Terminated(String),
    #[error("backend did not respond within {0:?}")]
    Timeout(Duration),
    #[error("backend I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// A simulation failure tied to the input that caused it.
#[derive(Debug, Error)]
#[error("simulation of input #{index} {values:?} failed: {source}", values = input.values)]
pub struct SimulationFailure {
    pub index: usize,
    pub input: TestInput,
    #[source]
    pub source: SimError,
}

/// A backend that turns scenario instances into trajectories.
pub trait Simulator: Send + Sync {
    fn name(&self) -> &str;

    fn simulate(&self, spec: &ScenarioSpec, input: &TestInput, seed: u64) -> Result<SimulationOutput, SimError>;
}

/// Simulates `inputs` on `workers` threads. Instance `i` receives seed
/// `seed + i`; `result[i]` always belongs to `inputs[i]`.
pub fn simulate_batch(
    simulator: &dyn Simulator,
    spec: &ScenarioSpec,
    inputs: &[TestInput],
    seed: u64,
    workers: usize,
) -> Vec<Result<SimulationOutput, SimulationFailure>> {
    let jobs = pool::jobs_for(inputs, seed);
    pool::evaluate_pool(&jobs, workers, |job| {
        simulator
            .simulate(spec, &job.input, job.seed)
            .map_err(|source| SimulationFailure {
                index: job.index,
                input: job.input.clone(),
                source,
            })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(t: f64) -> ActorState {
        ActorState { t, x: 0.0, y: 0.0, yaw: 0.0, speed: 1.0 }
    }

    fn output(ego: Vec<ActorState>, ped: Vec<ActorState>) -> SimulationOutput {
        SimulationOutput {
            dt: 0.1,
            actors: [(EGO.to_owned(), ego), (PEDESTRIAN.to_owned(), ped)].into_iter().collect(),
            collision: false,
            collision_time: None,
            metadata: BTreeMap::new(),
        }
    }

    #[test]
    fn unequal_lengths_rejected() {
        let out = output(vec![state(0.0), state(0.1)], vec![state(0.0)]);
        assert_eq!(out.check(0.0), Err(OutputError::InconsistentLengths));
        assert_eq!(OutputError::InconsistentLengths.to_string(), "inconsistent trajectory lengths");
    }

    #[test]
    fn collision_time_must_match_flag() {
        let mut out = output(vec![state(0.0)], vec![state(0.0)]);
        out.collision = true;
        assert_eq!(out.check(0.0), Err(OutputError::CollisionTimeMismatch));
        out.collision_time = Some(5.0);
        assert_eq!(out.check(0.0), Err(OutputError::CollisionTimeOutOfRange));
        out.collision_time = Some(0.0);
        assert_eq!(out.check(0.0), Ok(()));
    }

    #[test]
    fn off_grid_timestamps_rejected_then_snapped() {
        let mut out = output(vec![state(0.0), state(0.1001)], vec![state(0.0), state(0.1)]);
        assert!(matches!(out.check(1e-9), Err(OutputError::OffGrid { step: 1, .. })));
        assert!(out.check(1e-3).is_ok());
        out.snap_to_grid();
        assert!(out.check(0.0).is_ok());
    }
}
