//! Experiment execution and result persistence.

pub mod cli;
pub mod config;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde_json::json;
use thiserror::Error;

use crate::analysis::{
    export_design_space_plots, export_results_csv, export_trajectories, extract_critical_regions,
    fit_cart_on_records, format_condition, write_regions_txt, write_tree_json, DecisionTree, EvaluationRecord,
    Region,
};
use crate::scenario::AdasProblem;
use crate::search::{Nsga2, Nsga2Dt, Optimizer, OptimizerResult, SearchError};

pub use crate::pool::{evaluate_pool, EvaluationJob};
pub use config::{
    parse_time_budget, Algorithm, AnalysisConfig, ConfigError, Experiment, ExperimentRegistry, SimulatorChoice,
};

pub const SUMMARY_JSON: &str = "summary.json";
pub const DT_ITERATIONS_JSON: &str = "dt_iterations.json";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
}

impl RunError {
    fn io(context: impl Into<String>) -> impl FnOnce(io::Error) -> RunError {
        let context = context.into();
        move |source| RunError::Io { context, source }
    }

    /// Process exit status: 2 for configuration problems, 3 for backend and I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Search(SearchError::InvalidProblem(_) | SearchError::InvalidConfig(_)) => 2,
            RunError::Search(_) | RunError::Io { .. } => 3,
        }
    }
}

/// Command-line adjustments applied on top of an experiment definition.
#[derive(Debug, Clone, Default)]
pub struct RunOverrides {
    pub population_size: Option<usize>,
    pub max_generations: Option<usize>,
    pub time_budget: Option<Duration>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

impl RunOverrides {
    pub fn apply(&self, experiment: &mut Experiment) {
        let c = &mut experiment.search_config;
        if let Some(n) = self.population_size {
            c.population_size = n;
        }
        if let Some(g) = self.max_generations {
            c.max_generations = g;
        }
        if let Some(t) = self.time_budget {
            c.time_budget = Some(t);
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(w) = self.workers {
            c.workers = w;
        }
    }
}

pub struct RunOutcome {
    pub result_dir: PathBuf,
    pub result: OptimizerResult,
    pub tree: DecisionTree,
    pub regions: Vec<Region>,
}

/// Local-time run identifier, e.g. `20240131-142502`.
pub fn timestamp_run_id() -> String {
    chrono::Local::now().format("%Y%m%d-%H%M%S").to_string()
}

/// Creates `<root>/<experiment>/<run_id>`.
///
/// Without an explicit id a timestamp is used, suffixed `-2`, `-3`, ... when
/// that directory already exists. An explicit id must not name a non-empty
/// directory.
pub fn make_results_dir(root: &Path, experiment: &str, run_id: Option<&str>) -> io::Result<PathBuf> {
    let parent = root.join(experiment);
    fs::create_dir_all(&parent)?;
    if let Some(id) = run_id {
        let dir = parent.join(id);
        if dir.is_dir() && fs::read_dir(&dir)?.next().is_some() {
            return Err(io::Error::new(
                io::ErrorKind::AlreadyExists,
                format!("{} already exists and is not empty", dir.display()),
            ));
        }
        fs::create_dir_all(&dir)?;
        return Ok(dir);
    }
    let base = timestamp_run_id();
    for attempt in 1.. {
        let id = if attempt == 1 { base.clone() } else { format!("{base}-{attempt}") };
        let dir = parent.join(id);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e),
        }
    }
    unreachable!()
}

pub fn make_optimizer(experiment: &Experiment) -> Box<dyn Optimizer> {
    match experiment.algorithm {
        Algorithm::Nsga2 => Box::new(Nsga2::default()),
        Algorithm::Nsga2dt => Box::new(Nsga2Dt::new(experiment.dt_config.clone().unwrap_or_default())),
    }
}

/// Runs the search and writes all artifacts into a fresh results directory.
/// If the search aborts, the partial archive is still written as CSV.
pub fn run_experiment(experiment: &Experiment, results_root: &Path, run_id: Option<&str>) -> Result<RunOutcome, RunError> {
    let problem = Arc::new(experiment.build_problem());
    let mut optimizer = make_optimizer(experiment);
    optimizer.init(problem.clone(), experiment.search_config.clone())?;
    let dir = make_results_dir(results_root, &experiment.name, run_id)
        .map_err(RunError::io(format!("cannot create results directory under {}", results_root.display())))?;

    let result = match optimizer.run() {
        Ok(r) => r,
        Err(e) => {
            if let Some(archive) = e.partial_archive() {
                if let Err(io) = export_results_csv(archive, &problem.spec, &problem.objective_names(), &dir) {
                    log::error!("could not write partial archive: {io}");
                } else {
                    log::warn!("search aborted; {} evaluations written to {}", archive.len(), dir.display());
                }
            }
            return Err(e.into());
        }
    };
    let (tree, regions) = write_artifacts(experiment, &problem, &result, &dir)?;
    Ok(RunOutcome { result_dir: dir, result, tree, regions })
}

/// Writes every artifact of a finished run. Nothing time-dependent is
/// written, so equal seeds give byte-identical directories.
pub fn write_artifacts(
    experiment: &Experiment,
    problem: &AdasProblem,
    result: &OptimizerResult,
    dir: &Path,
) -> Result<(DecisionTree, Vec<Region>), RunError> {
    let spec = &problem.spec;
    let archive = &result.archive;
    let ctx = |what: &str| RunError::io(format!("cannot write {what} in {}", dir.display()));

    export_results_csv(archive, spec, &problem.objective_names(), dir).map_err(ctx("CSV results"))?;

    let tree = fit_cart_on_records(archive, spec, experiment.analysis.cart);
    let mut regions = extract_critical_regions(&tree, spec);
    for r in &mut regions {
        r.score(archive);
    }
    write_tree_json(&tree, dir).map_err(ctx("tree.json"))?;
    write_regions_txt(&regions, spec, dir).map_err(ctx("regions.txt"))?;
    export_design_space_plots(archive, &regions, spec, dir).map_err(ctx("design space plots"))?;

    let selected = trajectory_records(result, experiment.analysis.max_trajectories);
    let seed = experiment.search_config.seed;
    let outputs = evaluate_pool(&selected, experiment.search_config.workers, |r| {
        problem.simulator.simulate(spec, &r.input, seed.wrapping_add(r.index as u64))
    });
    let mut kept_records = Vec::new();
    let mut kept_outputs = Vec::new();
    for (record, output) in selected.iter().zip(outputs) {
        match output {
            Ok(o) => {
                kept_records.push(*record);
                kept_outputs.push(o);
            }
            Err(e) => log::warn!("trajectory of test {} not exported: {e}", record.index),
        }
    }
    export_trajectories(&kept_records, &kept_outputs, dir).map_err(ctx("trajectories"))?;

    if !result.dt_iterations.is_empty() {
        let mut text = serde_json::to_string_pretty(&result.dt_iterations).map_err(|e| RunError::Io {
            context: "cannot serialize tree iterations".into(),
            source: io::Error::other(e),
        })?;
        text.push('\n');
        fs::write(dir.join(DT_ITERATIONS_JSON), text).map_err(ctx(DT_ITERATIONS_JSON))?;
    }

    // worker count does not affect results and is left out so runs compare equal
    let mut search = serde_json::to_value(&experiment.search_config).expect("config serializes");
    if let Some(m) = search.as_object_mut() {
        m.remove("workers");
    }
    let summary = json!({
        "experiment": experiment.name,
        "problem": problem.problem_name,
        "algorithm": result.algorithm,
        "simulator": problem.simulator.name(),
        "search": search,
        "evaluations": archive.len(),
        "iterations": result.iterations_run,
        "critical": result.critical_set.len(),
        "pareto_set": result.pareto_set,
        "objectives": problem.objective_names(),
        "regions": regions.iter().map(|r| json!({
            "condition": format_condition(r, spec),
            "support": r.support,
            "purity": r.purity,
        })).collect::<Vec<_>>(),
    });
    let mut text = serde_json::to_string_pretty(&summary).expect("summary is plain JSON");
    text.push('\n');
    fs::write(dir.join(SUMMARY_JSON), text).map_err(ctx(SUMMARY_JSON))?;
    Ok((tree, regions))
}

/// Critical records (by archive order), or the Pareto set when nothing was critical.
fn trajectory_records(result: &OptimizerResult, limit: usize) -> Vec<&EvaluationRecord> {
    let picked: Vec<&EvaluationRecord> = if result.critical_set.is_empty() {
        result.pareto_records().collect()
    } else {
        result.critical_records().collect()
    };
    picked.into_iter().take(limit).collect()
}
