//! Experiment definition files.
//!
//! A registry file holds one or more `[[experiment]]` tables:
//!
//! ```toml
//! [[experiment]]
//! name = "1"
//! algorithm = "nsga2"                      # or "nsga2dt"
//!
//! [experiment.problem]
//! problem_name = "PedestrianCrossing"
//! scenario_path = "builtin:pedestrian_crossing"
//! simulator = "builtin"                    # or "subprocess:<command>"
//! fitness = "min_distance_velocity"
//! critical = "adas_distance_velocity"
//! simulation_variables = ["PedSpeed", "EgoSpeed", "PedDist"]
//! xl = [0.5, 1.0, 0.0]
//! xu = [3.0, 22.0, 60.0]
//! units = ["m/s", "m/s", "m"]
//!
//! [experiment.search]
//! population_size = 50
//! max_generations = 20
//! seed = 42
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;
use thiserror::Error;

use crate::analysis::CartParams;
use crate::fitness::{critical_by_name, fitness_by_name, CRITICAL_NAMES, FITNESS_NAMES};
use crate::scenario::{AdasProblem, ScenarioParameter, ScenarioSpec, BUILTIN_SCENARIO_PREFIX};
use crate::search::{DtConfig, SearchConfig};
use crate::sim::{BuiltinSimulator, Simulator, SubprocessSimulator};

/// Registry used when no experiment file is given.
pub const DEFAULT_REGISTRY: &str = include_str!("../../experiments/default.toml");

const SUBPROCESS_PREFIX: &str = "subprocess:";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid experiment file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("experiment {experiment:?}: {message}")]
    Invalid { experiment: String, message: String },
    #[error("duplicate experiment name {0:?}")]
    Duplicate(String),
    #[error("unknown experiment {requested:?}; available: {}", .available.join(", "))]
    UnknownExperiment { requested: String, available: Vec<String> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Nsga2,
    Nsga2dt,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Nsga2 => "NSGA2",
            Algorithm::Nsga2dt => "NSGA2DT",
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemSection {
    problem_name: String,
    scenario_path: String,
    #[serde(default = "default_simulator")]
    simulator: String,
    #[serde(default = "default_fitness")]
    fitness: String,
    #[serde(default = "default_critical")]
    critical: String,
    simulation_variables: Vec<String>,
    xl: Vec<f64>,
    xu: Vec<f64>,
    #[serde(default)]
    units: Vec<String>,
    #[serde(default)]
    fixed: BTreeMap<String, f64>,
    /// Subprocess response timeout in seconds.
    bridge_timeout: Option<f64>,
}

fn default_simulator() -> String {
    "builtin".into()
}
fn default_fitness() -> String {
    "min_distance_velocity".into()
}
fn default_critical() -> String {
    "adas_distance_velocity".into()
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub cart: CartParams,
    /// Upper bound on exported trajectory files.
    pub max_trajectories: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self { cart: CartParams::default(), max_trajectories: 10 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    name: String,
    algorithm: Algorithm,
    problem: ProblemSection,
    #[serde(default)]
    search: SearchConfig,
    dt: Option<DtConfig>,
    #[serde(default)]
    analysis: AnalysisConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegistryFile {
    #[serde(default)]
    experiment: Vec<ExperimentSection>,
}

/// Which backend an experiment simulates with.
#[derive(Debug, Clone, PartialEq)]
pub enum SimulatorChoice {
    Builtin,
    Subprocess { command: String, timeout: Duration },
}

/// A named, fully resolved experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub name: String,
    pub problem_name: String,
    pub spec: ScenarioSpec,
    pub simulator: SimulatorChoice,
    pub fitness: String,
    pub critical: String,
    pub algorithm: Algorithm,
    pub search_config: SearchConfig,
    /// Present iff the algorithm is NSGAII-DT.
    pub dt_config: Option<DtConfig>,
    pub analysis: AnalysisConfig,
}

impl Experiment {
    fn from_section(section: ExperimentSection, base_dir: Option<&Path>) -> Result<Self, ConfigError> {
        let name = section.name.clone();
        let invalid = |message: String| ConfigError::Invalid { experiment: name.clone(), message };
        let p = section.problem;
        let d = p.simulation_variables.len();
        if p.xl.len() != d || p.xu.len() != d {
            return Err(invalid(format!(
                "{d} simulation variables but {} lower and {} upper bounds",
                p.xl.len(),
                p.xu.len()
            )));
        }
        if !p.units.is_empty() && p.units.len() != d {
            return Err(invalid(format!("{d} simulation variables but {} units", p.units.len())));
        }
        let parameters = (0..d)
            .map(|i| {
                ScenarioParameter::new(
                    p.simulation_variables[i].clone(),
                    p.xl[i],
                    p.xu[i],
                    p.units.get(i).cloned().unwrap_or_default(),
                )
            })
            .collect();
        let scenario_path = match base_dir {
            Some(dir) if !p.scenario_path.starts_with(BUILTIN_SCENARIO_PREFIX) && Path::new(&p.scenario_path).is_relative() => {
                dir.join(&p.scenario_path).to_string_lossy().into_owned()
            }
            _ => p.scenario_path.clone(),
        };
        let spec = ScenarioSpec { scenario_path, parameters, fixed_settings: p.fixed };
        let errors = spec.validate();
        if !errors.is_empty() {
            let text: Vec<String> = errors.iter().map(ToString::to_string).collect();
            return Err(invalid(text.join("; ")));
        }

        let simulator = if p.simulator == "builtin" {
            SimulatorChoice::Builtin
        } else if let Some(command) = p.simulator.strip_prefix(SUBPROCESS_PREFIX) {
            let timeout = match p.bridge_timeout {
                Some(s) => Duration::try_from_secs_f64(s).map_err(|e| invalid(format!("bridge_timeout: {e}")))?,
                None => crate::sim::DEFAULT_BRIDGE_TIMEOUT,
            };
            SimulatorChoice::Subprocess { command: command.trim().to_owned(), timeout }
        } else {
            return Err(invalid(format!("unknown simulator {:?} (builtin | subprocess:<command>)", p.simulator)));
        };
        if fitness_by_name(&p.fitness).is_none() {
            return Err(invalid(format!("unknown fitness {:?}; known: {}", p.fitness, FITNESS_NAMES.join(", "))));
        }
        if critical_by_name(&p.critical).is_none() {
            return Err(invalid(format!("unknown criticality {:?}; known: {}", p.critical, CRITICAL_NAMES.join(", "))));
        }

        let dt_config = match (section.algorithm, section.dt) {
            (Algorithm::Nsga2dt, dt) => Some(dt.unwrap_or_default()),
            (Algorithm::Nsga2, None) => None,
            (Algorithm::Nsga2, Some(_)) => return Err(invalid("[dt] settings given for plain NSGA-II".into())),
        };
        if let Some(dt) = &dt_config {
            dt.validate().map_err(|e| invalid(e.to_string()))?;
        }
        section.search.validate().map_err(|e| invalid(e.to_string()))?;

        Ok(Self {
            name: section.name,
            problem_name: p.problem_name,
            spec,
            simulator,
            fitness: p.fitness,
            critical: p.critical,
            algorithm: section.algorithm,
            search_config: section.search,
            dt_config,
            analysis: section.analysis,
        })
    }

    /// Instantiates simulator, fitness and criticality.
    pub fn build_problem(&self) -> AdasProblem {
        let simulator: Arc<dyn Simulator> = match &self.simulator {
            SimulatorChoice::Builtin => Arc::new(BuiltinSimulator::default()),
            SimulatorChoice::Subprocess { command, timeout } => {
                Arc::new(SubprocessSimulator::new(command.clone()).with_timeout(*timeout))
            }
        };
        AdasProblem::new(
            self.problem_name.clone(),
            self.spec.clone(),
            fitness_by_name(&self.fitness).expect("checked at load"),
            critical_by_name(&self.critical).expect("checked at load"),
            simulator,
        )
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentRegistry {
    pub experiments: Vec<Experiment>,
}

impl ExperimentRegistry {
    pub fn parse(text: &str, base_dir: Option<&Path>) -> Result<Self, ConfigError> {
        let file: RegistryFile = toml::from_str(text)?;
        let mut experiments: Vec<Experiment> = Vec::new();
        for section in file.experiment {
            if experiments.iter().any(|e| e.name == section.name) {
                return Err(ConfigError::Duplicate(section.name));
            }
            experiments.push(Experiment::from_section(section, base_dir)?);
        }
        Ok(Self { experiments })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_owned(), source })?;
        Self::parse(&text, path.parent())
    }

    pub fn builtin() -> Self {
        Self::parse(DEFAULT_REGISTRY, None).expect("bundled registry is valid")
    }

    pub fn names(&self) -> Vec<String> {
        self.experiments.iter().map(|e| e.name.clone()).collect()
    }

    /// Looks an experiment up by name, then by 1-based position.
    pub fn get(&self, key: &str) -> Result<&Experiment, ConfigError> {
        if let Some(e) = self.experiments.iter().find(|e| e.name == key) {
            return Ok(e);
        }
        key.parse::<usize>()
            .ok()
            .filter(|&i| i >= 1)
            .and_then(|i| self.experiments.get(i - 1))
            .ok_or_else(|| ConfigError::UnknownExperiment { requested: key.to_owned(), available: self.names() })
    }
}

/// Parses `HH:MM:SS` (hours may exceed 23).
pub fn parse_time_budget(text: &str) -> Result<Duration, String> {
    let parts: Vec<&str> = text.trim().split(':').collect();
    let [h, m, s] = parts.as_slice() else {
        return Err(format!("expected HH:MM:SS, got {text:?}"));
    };
    let num = |v: &str| v.parse::<u64>().map_err(|_| format!("expected HH:MM:SS, got {text:?}"));
    let (h, m, s) = (num(h)?, num(m)?, num(s)?);
    if m >= 60 || s >= 60 {
        return Err(format!("minutes and seconds must be below 60 in {text:?}"));
    }
    Ok(Duration::from_secs(h * 3600 + m * 60 + s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_registry_loads() {
        let reg = ExperimentRegistry::builtin();
        let e = reg.get("1").unwrap();
        assert_eq!(e.algorithm, Algorithm::Nsga2);
        assert!(e.dt_config.is_none());
        assert_eq!(e.spec.bounds(), vec![(0.5, 3.0), (1.0, 22.0), (0.0, 60.0)]);
        let dt = reg.get("2").unwrap();
        assert_eq!(dt.algorithm, Algorithm::Nsga2dt);
        assert!(dt.dt_config.is_some());
    }

    #[test]
    fn lookup_by_position_and_unknown_name() {
        let reg = ExperimentRegistry::builtin();
        let first = reg.experiments[0].name.clone();
        assert_eq!(reg.get("1").unwrap().name, first);
        let err = reg.get("nonexistent").unwrap_err();
        assert!(err.to_string().contains(&first), "{err}");
    }

    #[test]
    fn time_budget_parsing() {
        assert_eq!(parse_time_budget("02:00:00").unwrap(), Duration::from_secs(7200));
        assert_eq!(parse_time_budget("00:01:30").unwrap(), Duration::from_secs(90));
        assert!(parse_time_budget("2h").is_err());
        assert!(parse_time_budget("00:61:00").is_err());
    }

    fn one(extra: &str, algorithm: &str) -> String {
        format!(
            r#"
[[experiment]]
name = "x"
algorithm = "{algorithm}"
[experiment.problem]
problem_name = "p"
scenario_path = "builtin:pedestrian_crossing"
simulation_variables = ["PedSpeed", "EgoSpeed", "PedDist"]
xl = [0.5, 1.0, 0.0]
xu = [3.0, 22.0, 60.0]
{extra}
"#
        )
    }

    #[test]
    fn dt_section_only_for_nsga2dt() {
        assert!(ExperimentRegistry::parse(&one("[experiment.dt]\ninner_generations = 3", "nsga2"), None).is_err());
        let reg = ExperimentRegistry::parse(&one("[experiment.dt]\ninner_generations = 3", "nsga2dt"), None).unwrap();
        assert_eq!(reg.experiments[0].dt_config.as_ref().unwrap().inner_generations, 3);
    }

    #[test]
    fn bound_count_mismatch_rejected() {
        let text = one("", "nsga2").replace("xu = [3.0, 22.0, 60.0]", "xu = [3.0, 22.0]");
        assert!(matches!(ExperimentRegistry::parse(&text, None), Err(ConfigError::Invalid { .. })));
    }

    #[test]
    fn degenerate_bounds_rejected() {
        let text = one("", "nsga2").replace("xl = [0.5, 1.0, 0.0]", "xl = [3.0, 1.0, 0.0]");
        let err = ExperimentRegistry::parse(&text, None).unwrap_err();
        assert!(err.to_string().contains("degenerate bound"), "{err}");
    }

    #[test]
    fn subprocess_simulator_choice() {
        let text = one("", "nsga2").replace(
            "xu = [3.0, 22.0, 60.0]",
            "xu = [3.0, 22.0, 60.0]\nsimulator = \"subprocess: ./sim --fast\"\nbridge_timeout = 5",
        );
        let reg = ExperimentRegistry::parse(&text, None).unwrap();
        assert_eq!(
            reg.experiments[0].simulator,
            SimulatorChoice::Subprocess { command: "./sim --fast".into(), timeout: Duration::from_secs(5) }
        );
    }

    #[test]
    fn duplicate_names_rejected() {
        let text = format!("{}{}", one("", "nsga2"), one("", "nsga2"));
        assert!(matches!(ExperimentRegistry::parse(&text, None), Err(ConfigError::Duplicate(_))));
    }
}
