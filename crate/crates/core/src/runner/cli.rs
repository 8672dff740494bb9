//! `sbt` command line.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::Parser;

use super::{parse_time_budget, run_experiment, ExperimentRegistry, RunError, RunOverrides};

/// Environment variable naming the default results root.
pub const RESULTS_ROOT_ENV: &str = "SBT_RESULTS_ROOT";
const DEFAULT_RESULTS_ROOT: &str = "results";

#[derive(Debug, Parser)]
#[command(name = "sbt", version, about = "Search-based testing of automated driving functions")]
pub struct Args {
    /// Experiment name or 1-based position in the registry.
    #[arg(short = 'e', long = "experiment")]
    pub experiment: Option<String>,

    /// Population size.
    #[arg(short = 'n', long = "population")]
    pub population_size: Option<usize>,

    /// Wall-clock budget, HH:MM:SS.
    #[arg(short = 't', long = "time", value_parser = parse_time_budget)]
    pub time_budget: Option<std::time::Duration>,

    /// Number of generations.
    #[arg(short = 'i', long = "generations")]
    pub max_generations: Option<usize>,

    /// Random seed.
    #[arg(short = 's', long = "seed")]
    pub seed: Option<u64>,

    /// Results root [default: $SBT_RESULTS_ROOT or ./results].
    #[arg(short = 'o', long = "output")]
    pub results_root: Option<PathBuf>,

    /// Parallel simulations.
    #[arg(short = 'w', long = "workers")]
    pub workers: Option<usize>,

    /// Name of the run directory instead of a timestamp.
    #[arg(long = "run-id")]
    pub run_id: Option<String>,

    /// Experiment registry file (TOML); the bundled registry is used otherwise.
    #[arg(short = 'c', long = "config")]
    pub config: Option<PathBuf>,

    /// List available experiments and exit.
    #[arg(short = 'l', long = "list")]
    pub list: bool,
}

fn print_registry(registry: &ExperimentRegistry) {
    for (i, e) in registry.experiments.iter().enumerate() {
        eprintln!("  {:>2}. {:<20} {:<8} {}", i + 1, e.name, e.algorithm.to_string(), e.problem_name);
    }
}

/// Entry point of the `sbt` binary. `args` includes the program name.
/// Returns the process exit status.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    if args.len() <= 1 {
        let mut cmd = <Args as clap::CommandFactory>::command();
        eprintln!("{}", cmd.render_usage());
        eprintln!("Run `sbt --help` for all options.");
        return 2;
    }
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };

    let registry = match &args.config {
        Some(path) => match ExperimentRegistry::load(path) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("error: {e}");
                return 2;
            }
        },
        None => ExperimentRegistry::builtin(),
    };
    if args.list {
        print_registry(&registry);
        return 0;
    }
    let Some(key) = args.experiment.as_deref() else {
        eprintln!("error: no experiment given (-e); available:");
        print_registry(&registry);
        return 2;
    };
    let mut experiment = match registry.get(key) {
        Ok(e) => e.clone(),
        Err(e) => {
            eprintln!("error: {e}");
            print_registry(&registry);
            return 2;
        }
    };
    RunOverrides {
        population_size: args.population_size,
        max_generations: args.max_generations,
        time_budget: args.time_budget,
        seed: args.seed,
        workers: args.workers,
    }
    .apply(&mut experiment);

    let root = args
        .results_root
        .or_else(|| std::env::var_os(RESULTS_ROOT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_RESULTS_ROOT));

    match run_experiment(&experiment, &root, args.run_id.as_deref()) {
        Ok(out) => {
            let r = &out.result;
            println!("experiment: {} ({})", experiment.name, r.algorithm);
            println!("evaluations: {}", r.archive.len());
            println!("critical: {}", r.critical_set.len());
            println!("pareto: {}", r.pareto_set.len());
            println!("regions: {}", out.regions.len());
            println!("wall time: {:.2}s", r.wall_time.as_secs_f64());
            println!("results: {}", out.result_dir.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let RunError::Search(se) = &e {
                if let Some(a) = se.partial_archive() {
                    eprintln!("partial archive: {} evaluations", a.len());
                }
            }
            e.exit_code()
        }
    }
}
