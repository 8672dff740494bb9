//! Search-based testing of automated driving functions.
//!
//! A parameterized scenario ([`scenario::ScenarioSpec`]) is explored by a
//! multi-objective search ([`search`]) that simulates candidate test inputs
//! ([`sim`]), scores them ([`fitness`]) and keeps every evaluation in an
//! archive. The archive is then characterized ([`analysis`]): decision-tree
//! rules describe where the system under test fails, and CSV, JSON and SVG
//! artifacts are written to a results directory ([`runner`]).

pub mod analysis;
pub mod fitness;
pub mod pool;
pub mod runner;
pub mod scenario;
pub mod search;
pub mod sim;

pub use analysis::EvaluationRecord;
pub use scenario::{AdasProblem, ScenarioParameter, ScenarioSpec, TestInput};
pub use search::{Nsga2, Nsga2Dt, Optimizer, OptimizerResult, SearchConfig};
pub use sim::{SimulationOutput, Simulator};
