//! Multi-objective search for critical test inputs.
//!
//! Every optimizer evaluates inputs through an [`Evaluator`], which owns the
//! archive: each simulated input is recorded exactly once, in evaluation
//! order, and the archive index doubles as the simulation seed offset.

mod nsga2;
mod nsga2dt;
pub mod operators;
pub mod sorting;

use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::EvaluationRecord;
use crate::fitness::{to_minimization, Direction, FitnessError};
use crate::scenario::{AdasProblem, TestInput, ValidationError};
use crate::sim::{simulate_batch, SimulationFailure};

pub use nsga2::{environmental_selection, rank_and_crowd, Nsga2};
pub use nsga2dt::{active_regions, DtConfig, DtIteration, Nsga2Dt};
pub use sorting::{crowding_distance, dominates, fast_non_dominated_sort, non_dominated};

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub input: TestInput,
    /// Internal objective vector; every entry is minimized.
    pub objectives: Vec<f64>,
    pub critical: bool,
    pub archive_index: usize,
    pub rank: usize,
    pub crowding: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub population_size: usize,
    pub max_generations: usize,
    #[serde(with = "optional_seconds")]
    pub time_budget: Option<Duration>,
    pub crossover_probability: f64,
    pub crossover_eta: f64,
    /// Per-variable mutation probability; `None` means `1 / d`.
    pub mutation_probability: Option<f64>,
    pub mutation_eta: f64,
    pub seed: u64,
    pub workers: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            population_size: 50,
            max_generations: 20,
            time_budget: None,
            crossover_probability: 0.9,
            crossover_eta: 15.0,
            mutation_probability: None,
            mutation_eta: 20.0,
            seed: 0,
            workers: 1,
        }
    }
}

mod optional_seconds {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(v: &Option<Duration>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(d) => s.serialize_some(&d.as_secs_f64()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Duration>, D::Error> {
        let secs: Option<f64> = Option::deserialize(d)?;
        secs.map(|s| Duration::try_from_secs_f64(s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: String| Err(SearchError::InvalidConfig(m));
        if self.population_size < 4 || self.population_size % 2 != 0 {
            return bad(format!("population size must be even and at least 4, got {}", self.population_size));
        }
        if !(0.0..=1.0).contains(&self.crossover_probability) {
            return bad("crossover probability must lie in [0, 1]".into());
        }
        if let Some(p) = self.mutation_probability {
            if !(0.0..=1.0).contains(&p) {
                return bad("mutation probability must lie in [0, 1]".into());
            }
        }
        if !(self.crossover_eta > 0.0 && self.mutation_eta > 0.0) {
            return bad("distribution indices must be positive".into());
        }
        if self.workers == 0 {
            return bad("worker count must be at least 1".into());
        }
        Ok(())
    }

    pub fn mutation_probability_for(&self, dim: usize) -> f64 {
        self.mutation_probability.unwrap_or(1.0 / dim.max(1) as f64)
    }

    /// Evaluation budget implied by the generation limit.
    pub fn evaluation_budget(&self) -> usize {
        self.population_size * (self.max_generations + 1)
    }
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid problem: {}", join(.0))]
    InvalidProblem(Vec<ValidationError>),
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
    #[error("optimizer used before init")]
    NotInitialized,
    #[error("{failure}")]
    Simulation {
        failure: SimulationFailure,
        archive: Vec<EvaluationRecord>,
    },
    #[error("fitness evaluation of input #{index} {values:?} failed: {source}", values = input.values)]
    Fitness {
        index: usize,
        input: TestInput,
        source: FitnessError,
        archive: Vec<EvaluationRecord>,
    },
}

fn join(errors: &[ValidationError]) -> String {
    errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl SearchError {
    /// Records evaluated before an aborting failure, if any.
    pub fn partial_archive(&self) -> Option<&[EvaluationRecord]> {
        match self {
            SearchError::Simulation { archive, .. } | SearchError::Fitness { archive, .. } => Some(archive),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerResult {
    pub algorithm: String,
    pub archive: Vec<EvaluationRecord>,
    pub final_population: Vec<Individual>,
    /// Archive indices of the non-dominated records.
    pub pareto_set: Vec<usize>,
    /// Archive indices of the critical records.
    pub critical_set: Vec<usize>,
    pub iterations_run: usize,
    pub wall_time: Duration,
    pub directions: Vec<Direction>,
    /// Per-iteration trees and regions (NSGAII-DT only).
    pub dt_iterations: Vec<DtIteration>,
}

impl OptimizerResult {
    fn assemble(
        algorithm: &str,
        evaluator: Evaluator<'_>,
        final_population: Vec<Individual>,
        iterations_run: usize,
        dt_iterations: Vec<DtIteration>,
    ) -> Self {
        let directions = evaluator.problem.objective_directions.clone();
        let wall_time = evaluator.started.elapsed();
        let archive = evaluator.archive;
        let internal: Vec<Vec<f64>> = archive
            .iter()
            .map(|r| to_minimization(&r.objectives, &directions).expect("objective count checked at evaluation"))
            .collect();
        let pareto_set = non_dominated(&internal);
        let critical_set = archive.iter().filter(|r| r.critical).map(|r| r.index).collect();
        Self {
            algorithm: algorithm.to_owned(),
            archive,
            final_population,
            pareto_set,
            critical_set,
            iterations_run,
            wall_time,
            directions,
            dt_iterations,
        }
    }

    pub fn pareto_records(&self) -> impl Iterator<Item = &EvaluationRecord> {
        self.pareto_set.iter().map(|&i| &self.archive[i])
    }

    pub fn critical_records(&self) -> impl Iterator<Item = &EvaluationRecord> {
        self.critical_set.iter().map(|&i| &self.archive[i])
    }
}

/// Contract shared by all search algorithms.
pub trait Optimizer {
    fn name(&self) -> &'static str;
    fn init(&mut self, problem: Arc<AdasProblem>, config: SearchConfig) -> Result<(), SearchError>;
    fn run(&mut self) -> Result<OptimizerResult, SearchError>;
}

fn check_setup(problem: &AdasProblem, config: &SearchConfig) -> Result<(), SearchError> {
    let errors = problem.validate();
    if !errors.is_empty() {
        return Err(SearchError::InvalidProblem(errors));
    }
    config.validate()
}

/// Simulates and scores inputs, appending every result to the archive.
pub struct Evaluator<'a> {
    problem: &'a AdasProblem,
    seed: u64,
    workers: usize,
    archive: Vec<EvaluationRecord>,
    started: Instant,
    time_budget: Option<Duration>,
}

impl<'a> Evaluator<'a> {
    pub fn new(problem: &'a AdasProblem, config: &SearchConfig) -> Self {
        Self {
            problem,
            seed: config.seed,
            workers: config.workers,
            archive: Vec::new(),
            started: Instant::now(),
            time_budget: config.time_budget,
        }
    }

    pub fn archive(&self) -> &[EvaluationRecord] {
        &self.archive
    }

    pub fn evaluations(&self) -> usize {
        self.archive.len()
    }

    pub fn out_of_time(&self) -> bool {
        self.time_budget.is_some_and(|b| self.started.elapsed() >= b)
    }

    pub fn internal_objectives(&self, record: &EvaluationRecord) -> Vec<f64> {
        to_minimization(&record.objectives, &self.problem.objective_directions)
            .expect("objective count checked at evaluation")
    }

    /// Individual view of an archived record (no re-simulation).
    pub fn individual(&self, record: &EvaluationRecord) -> Individual {
        Individual {
            input: record.input.clone(),
            objectives: self.internal_objectives(record),
            critical: record.critical,
            archive_index: record.index,
            rank: 0,
            crowding: 0.0,
        }
    }

    pub fn evaluate(&mut self, inputs: &[TestInput]) -> Result<Vec<Individual>, SearchError> {
        let base = self.archive.len();
        let problem = self.problem;
        let outputs = simulate_batch(
            problem.simulator.as_ref(),
            &problem.spec,
            inputs,
            self.seed.wrapping_add(base as u64),
            self.workers,
        );
        let expected = problem.objective_directions.len();
        let mut individuals = Vec::with_capacity(inputs.len());
        for (offset, (input, output)) in inputs.iter().zip(outputs).enumerate() {
            let index = base + offset;
            let output = match output {
                Ok(o) => o,
                Err(mut failure) => {
                    failure.index = index;
                    return Err(SearchError::Simulation { failure, archive: std::mem::take(&mut self.archive) });
                }
            };
            let objectives = problem
                .fitness
                .eval(&output)
                .and_then(|v| {
                    if v.len() == expected {
                        Ok(v)
                    } else {
                        Err(FitnessError::LengthMismatch { expected, found: v.len() })
                    }
                })
                .map_err(|source| SearchError::Fitness {
                    index,
                    input: input.clone(),
                    source,
                    archive: std::mem::take(&mut self.archive),
                })?;
            let critical = problem.criticality.eval(&objectives, &output);
            let record = EvaluationRecord {
                index,
                input: input.clone(),
                objectives,
                critical,
                metadata: output.metadata,
            };
            individuals.push(self.individual(&record));
            self.archive.push(record);
        }
        Ok(individuals)
    }
}
