//! Parameterized scenarios, search-space bounds and the problem definition.
//!
//! A [`ScenarioSpec`] fixes the ordered list of search variables. That order is
//! the single index order used by every [`TestInput`], CSV column and tree
//! feature in the crate.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fitness::{Critical, Direction, Fitness};
use crate::sim::Simulator;

/// Prefix marking a scenario reference that names a built-in scenario rather than a file.
pub const BUILTIN_SCENARIO_PREFIX: &str = "builtin:";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParameter {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    #[serde(default)]
    pub unit: String,
}

impl ScenarioParameter {
    pub fn new(name: impl Into<String>, lower: f64, upper: f64, unit: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            lower,
            upper,
            unit: unit.into(),
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario_path: String,
    pub parameters: Vec<ScenarioParameter>,
    #[serde(default)]
    pub fixed_settings: BTreeMap<String, f64>,
}

/// One concrete assignment of the search variables (a scenario instance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TestInput {
    pub values: Vec<f64>,
}

impl TestInput {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl From<Vec<f64>> for TestInput {
    fn from(values: Vec<f64>) -> Self {
        Self { values }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ValidationError {
    EmptyName { index: usize },
    DuplicateName(String),
    NonFiniteBound { index: usize },
    DegenerateBound { index: usize },
    FixedSettingShadowsParameter(String),
    NoParameters,
    ScenarioFileMissing(String),
    DirectionCount { expected: usize, found: usize },
    LengthMismatch { expected: usize, found: usize },
    BelowLowerBound { index: usize },
    AboveUpperBound { index: usize },
    NonFiniteValue { index: usize },
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptyName { index } => write!(f, "empty parameter name (index {index})"),
            Self::DuplicateName(n) => write!(f, "duplicate parameter name {n:?}"),
            Self::NonFiniteBound { index } => write!(f, "non-finite bound (index {index})"),
            Self::DegenerateBound { index } => write!(f, "degenerate bound (index {index})"),
            Self::FixedSettingShadowsParameter(n) => {
                write!(f, "fixed setting {n:?} has the same name as a search parameter")
            }
            Self::NoParameters => write!(f, "scenario declares no search parameters"),
            Self::ScenarioFileMissing(p) => write!(f, "scenario file not found: {p}"),
            Self::DirectionCount { expected, found } => write!(
                f,
                "objective direction count {found} does not match fitness objective count {expected}"
            ),
            Self::LengthMismatch { expected, found } => {
                write!(f, "input has {found} values, scenario has {expected} parameters")
            }
            Self::BelowLowerBound { index } => write!(f, "value below lower bound (index {index})"),
            Self::AboveUpperBound { index } => write!(f, "value above upper bound (index {index})"),
            Self::NonFiniteValue { index } => write!(f, "non-finite value (index {index})"),
        }
    }
}

impl std::error::Error for ValidationError {}

impl ScenarioSpec {
    pub fn new(scenario_path: impl Into<String>, parameters: Vec<ScenarioParameter>) -> Self {
        Self {
            scenario_path: scenario_path.into(),
            parameters,
            fixed_settings: BTreeMap::new(),
        }
    }

    pub fn with_fixed(mut self, name: impl Into<String>, value: f64) -> Self {
        self.fixed_settings.insert(name.into(), value);
        self
    }

    pub fn dim(&self) -> usize {
        self.parameters.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.parameters.iter().position(|p| p.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.parameters.iter().map(|p| p.name.as_str())
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.parameters.iter().map(|p| (p.lower, p.upper)).collect()
    }

    /// Value of `name` in `input`, falling back to the fixed settings.
    pub fn lookup(&self, input: &TestInput, name: &str) -> Option<f64> {
        match self.index_of(name) {
            Some(i) => input.values.get(i).copied(),
            None => self.fixed_settings.get(name).copied(),
        }
    }

    pub fn is_builtin(&self) -> bool {
        self.scenario_path.starts_with(BUILTIN_SCENARIO_PREFIX)
    }

    /// Checks the parameter invariants without touching the file system.
    pub fn validate_bounds(&self) -> Vec<ValidationError> {
        let mut errors = Vec::new();
        if self.parameters.is_empty() {
            errors.push(ValidationError::NoParameters);
        }
        for (index, p) in self.parameters.iter().enumerate() {
            if p.name.trim().is_empty() {
                errors.push(ValidationError::EmptyName { index });
            } else if self.parameters[..index].iter().any(|q| q.name == p.name) {
                errors.push(ValidationError::DuplicateName(p.name.clone()));
            }
            if !p.lower.is_finite() || !p.upper.is_finite() {
                errors.push(ValidationError::NonFiniteBound { index });
            } else if p.lower >= p.upper {
                errors.push(ValidationError::DegenerateBound { index });
            }
        }
        for name in self.fixed_settings.keys() {
            if self.index_of(name).is_some() {
                errors.push(ValidationError::FixedSettingShadowsParameter(name.clone()));
            }
        }
        errors
    }

    /// Checks bounds and, for file-backed scenarios, that the file exists.
    pub fn validate(&self) -> Vec<ValidationError> {
        let mut errors = self.validate_bounds();
        if !self.is_builtin() && !Path::new(&self.scenario_path).exists() {
            errors.push(ValidationError::ScenarioFileMissing(self.scenario_path.clone()));
        }
        errors
    }

    pub fn validate_input(&self, input: &TestInput) -> Vec<ValidationError> {
        if input.len() != self.dim() {
            return vec![ValidationError::LengthMismatch {
                expected: self.dim(),
                found: input.len(),
            }];
        }
        let mut errors = Vec::new();
        for (index, (v, p)) in input.values.iter().zip(&self.parameters).enumerate() {
            if !v.is_finite() {
                errors.push(ValidationError::NonFiniteValue { index });
            } else if *v < p.lower {
                errors.push(ValidationError::BelowLowerBound { index });
            } else if *v > p.upper {
                errors.push(ValidationError::AboveUpperBound { index });
            }
        }
        errors
    }

    pub fn contains(&self, input: &TestInput) -> bool {
        self.validate_input(input).is_empty()
    }

    pub fn scale_to_unit(&self, input: &TestInput) -> Vec<f64> {
        input
            .values
            .iter()
            .zip(&self.parameters)
            .map(|(v, p)| (v - p.lower) / p.width())
            .collect()
    }

    pub fn unscale_from_unit(&self, unit: &[f64]) -> TestInput {
        TestInput::new(
            unit.iter()
                .zip(&self.parameters)
                .map(|(u, p)| p.lower + u * p.width())
                .collect(),
        )
    }

    /// Draws `count` inputs uniformly from the box; deterministic in `seed`.
    pub fn sample_uniform(&self, count: usize, seed: u64) -> Result<Vec<TestInput>, ValidationError> {
        if let Some(e) = self.validate_bounds().into_iter().next() {
            return Err(e);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(sample_box(&self.bounds(), count, &mut rng))
    }
}

/// Uniform samples inside an arbitrary closed box.
pub fn sample_box<R: Rng + ?Sized>(bounds: &[(f64, f64)], count: usize, rng: &mut R) -> Vec<TestInput> {
    (0..count)
        .map(|_| {
            TestInput::new(
                bounds
                    .iter()
                    .map(|&(lo, hi)| if hi > lo { rng.gen_range(lo..=hi) } else { lo })
                    .collect(),
            )
        })
        .collect()
}

/// Everything needed to evaluate a test input: scenario, simulator, fitness and criticality.
#[derive(Clone)]
pub struct AdasProblem {
    pub problem_name: String,
    pub spec: ScenarioSpec,
    pub fitness: Arc<dyn Fitness>,
    pub criticality: Arc<dyn Critical>,
    pub simulator: Arc<dyn Simulator>,
    pub objective_directions: Vec<Direction>,
}

impl fmt::Debug for AdasProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AdasProblem")
            .field("problem_name", &self.problem_name)
            .field("spec", &self.spec)
            .field("fitness", &self.fitness.objective_names())
            .field("simulator", &self.simulator.name())
            .field("objective_directions", &self.objective_directions)
            .finish()
    }
}

impl AdasProblem {
    /// Builds a problem whose objective directions come from the fitness definition.
    pub fn new(
        problem_name: impl Into<String>,
        spec: ScenarioSpec,
        fitness: Arc<dyn Fitness>,
        criticality: Arc<dyn Critical>,
        simulator: Arc<dyn Simulator>,
    ) -> Self {
        let objective_directions = fitness.directions();
        Self {
            problem_name: problem_name.into(),
            spec,
            fitness,
            criticality,
            simulator,
            objective_directions,
        }
    }

    pub fn objective_names(&self) -> Vec<String> {
        self.fitness.objective_names()
    }

    pub fn validate(&self) -> Vec<ValidationError> {
        let mut errors = self.spec.validate();
        let expected = self.fitness.objective_names().len();
        if self.objective_directions.len() != expected {
            errors.push(ValidationError::DirectionCount {
                expected,
                found: self.objective_directions.len(),
            });
        }
        errors
    }
}

/// Returns every invariant violation of `problem`; empty means valid.
pub fn validate_problem(problem: &AdasProblem) -> Vec<ValidationError> {
    problem.validate()
}

/// The pedestrian-crossing search space with the bounds used throughout the examples.
pub fn pedestrian_crossing_spec() -> ScenarioSpec {
    ScenarioSpec::new(
        "builtin:pedestrian_crossing",
        vec![
            ScenarioParameter::new("PedSpeed", 0.5, 3.0, "m/s"),
            ScenarioParameter::new("EgoSpeed", 1.0, 22.0, "m/s"),
            ScenarioParameter::new("PedDist", 0.0, 60.0, "m"),
        ],
    )
}
