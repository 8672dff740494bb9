//! Objective functions and criticality predicates over simulation outputs.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{OutputError, SimulationOutput, EGO, PEDESTRIAN};

/// Finite stand-in for "never closing" so objective vectors stay totally ordered.
pub const TTC_SENTINEL: f64 = 1e9;
pub const DEFAULT_COLLISION_RADIUS: f64 = 1.0;
/// Metadata key a backend may use to report the contact radius it simulated with.
pub const COLLISION_RADIUS_KEY: &str = "collision_radius";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Minimize,
    Maximize,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Minimize => "min",
            Direction::Maximize => "max",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitnessError {
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("trajectory of {0:?} is empty")]
    EmptyTrajectory(String),
    #[error("objective vector has {found} entries, expected {expected}")]
    LengthMismatch { expected: usize, found: usize },
}

/// Maps a simulation output to an objective vector in user orientation.
pub trait Fitness: Send + Sync {
    fn name(&self) -> &str;
    fn objective_names(&self) -> Vec<String>;
    fn directions(&self) -> Vec<Direction>;
    fn eval(&self, output: &SimulationOutput) -> Result<Vec<f64>, FitnessError>;
}

/// Decides whether an evaluated test case reveals a failure.
pub trait Critical: Send + Sync {
    fn name(&self) -> &str;
    fn eval(&self, objectives: &[f64], output: &SimulationOutput) -> bool;
}

fn collision_radius(output: &SimulationOutput, fallback: f64) -> f64 {
    output
        .metadata
        .get(COLLISION_RADIUS_KEY)
        .and_then(|v| v.parse().ok())
        .unwrap_or(fallback)
}

fn actors(output: &SimulationOutput) -> Result<(&[crate::sim::ActorState], &[crate::sim::ActorState]), FitnessError> {
    let ego = output.actor(EGO)?;
    let ped = output.actor(PEDESTRIAN)?;
    if ego.is_empty() {
        return Err(FitnessError::EmptyTrajectory(EGO.into()));
    }
    Ok((ego, ped))
}

/// F1: clearance between ego and pedestrian (distance minus contact radius,
/// clamped at 0, exactly 0 on a recorded collision). F2: ego speed at the
/// first step attaining the minimum distance. One pass over the trajectories.
pub fn eval_min_distance_velocity(output: &SimulationOutput, radius: f64) -> Result<(f64, f64), FitnessError> {
    let (ego, ped) = actors(output)?;
    let mut best = (f64::INFINITY, ego[0].speed);
    for (e, p) in ego.iter().zip(ped) {
        let d = e.distance_to(p);
        if d < best.0 {
            best = (d, e.speed);
        }
    }
    let f1 = if output.collision { 0.0 } else { (best.0 - radius).max(0.0) };
    Ok((f1, best.1))
}

/// Minimum time to collision over all steps at which the actors are closing.
/// Returns [`TTC_SENTINEL`] when they never close.
pub fn eval_min_ttc(output: &SimulationOutput, radius: f64) -> Result<f64, FitnessError> {
    let (ego, ped) = actors(output)?;
    let mut best = TTC_SENTINEL;
    for (e, p) in ego.iter().zip(ped) {
        let (rx, ry) = (p.x - e.x, p.y - e.y);
        let d = rx.hypot(ry);
        let (pvx, pvy) = p.velocity();
        let (evx, evy) = e.velocity();
        let closing = if d > 0.0 { -(rx * (pvx - evx) + ry * (pvy - evy)) / d } else { 0.0 };
        if closing > 0.0 {
            best = best.min((d - radius).max(0.0) / closing);
        } else if d < radius {
            best = 0.0;
        }
    }
    Ok(best)
}

/// The default ADAS predicate: contact (F1 = 0) while the ego still moves (F2 > 0).
pub fn is_critical(objectives: &[f64]) -> bool {
    matches!(objectives, [f1, f2, ..] if *f1 == 0.0 && *f2 > 0.0)
}

/// Negates maximize-objectives so that every objective is minimized.
pub fn to_minimization(objectives: &[f64], directions: &[Direction]) -> Result<Vec<f64>, FitnessError> {
    if objectives.len() != directions.len() {
        return Err(FitnessError::LengthMismatch {
            expected: directions.len(),
            found: objectives.len(),
        });
    }
    Ok(objectives
        .iter()
        .zip(directions)
        .map(|(v, d)| match d {
            Direction::Minimize => *v,
            Direction::Maximize => -*v,
        })
        .collect())
}

/// F1 min distance (minimize), F2 ego velocity at min distance (maximize).
#[derive(Debug, Clone)]
pub struct MinDistanceVelocity {
    pub collision_radius: f64,
}

impl Default for MinDistanceVelocity {
    fn default() -> Self {
        Self { collision_radius: DEFAULT_COLLISION_RADIUS }
    }
}

impl Fitness for MinDistanceVelocity {
    fn name(&self) -> &str {
        "min_distance_velocity"
    }

    fn objective_names(&self) -> Vec<String> {
        vec!["min_distance".into(), "velocity_at_min_distance".into()]
    }

    fn directions(&self) -> Vec<Direction> {
        vec![Direction::Minimize, Direction::Maximize]
    }

    fn eval(&self, output: &SimulationOutput) -> Result<Vec<f64>, FitnessError> {
        let (f1, f2) = eval_min_distance_velocity(output, collision_radius(output, self.collision_radius))?;
        Ok(vec![f1, f2])
    }
}

#[derive(Debug, Clone)]
pub struct MinTimeToCollision {
    pub collision_radius: f64,
}

impl Default for MinTimeToCollision {
    fn default() -> Self {
        Self { collision_radius: DEFAULT_COLLISION_RADIUS }
    }
}

impl Fitness for MinTimeToCollision {
    fn name(&self) -> &str {
        "min_ttc"
    }

    fn objective_names(&self) -> Vec<String> {
        vec!["min_ttc".into()]
    }

    fn directions(&self) -> Vec<Direction> {
        vec![Direction::Minimize]
    }

    fn eval(&self, output: &SimulationOutput) -> Result<Vec<f64>, FitnessError> {
        Ok(vec![eval_min_ttc(output, collision_radius(output, self.collision_radius))?])
    }
}

/// F1 = 0 and F2 > 0, computed from the output so it works with any fitness.
#[derive(Debug, Clone)]
pub struct AdasDistanceVelocity {
    pub collision_radius: f64,
}

impl Default for AdasDistanceVelocity {
    fn default() -> Self {
        Self { collision_radius: DEFAULT_COLLISION_RADIUS }
    }
}

impl Critical for AdasDistanceVelocity {
    fn name(&self) -> &str {
        "adas_distance_velocity"
    }

    fn eval(&self, _objectives: &[f64], output: &SimulationOutput) -> bool {
        eval_min_distance_velocity(output, collision_radius(output, self.collision_radius))
            .map(|(f1, f2)| is_critical(&[f1, f2]))
            .unwrap_or(false)
    }
}

/// Any recorded collision.
#[derive(Debug, Clone, Default)]
pub struct CollisionOccurred;

impl Critical for CollisionOccurred {
    fn name(&self) -> &str {
        "collision"
    }

    fn eval(&self, _objectives: &[f64], output: &SimulationOutput) -> bool {
        output.collision
    }
}

pub fn fitness_by_name(name: &str) -> Option<Arc<dyn Fitness>> {
    match name {
        "min_distance_velocity" => Some(Arc::new(MinDistanceVelocity::default())),
        "min_ttc" => Some(Arc::new(MinTimeToCollision::default())),
        _ => None,
    }
}

pub fn critical_by_name(name: &str) -> Option<Arc<dyn Critical>> {
    match name {
        "adas_distance_velocity" => Some(Arc::new(AdasDistanceVelocity::default())),
        "collision" => Some(Arc::new(CollisionOccurred)),
        _ => None,
    }
}

pub const FITNESS_NAMES: [&str; 2] = ["min_distance_velocity", "min_ttc"];
pub const CRITICAL_NAMES: [&str; 2] = ["adas_distance_velocity", "collision"];
