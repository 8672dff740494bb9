use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sbt_core::runner::ExperimentRegistry;

fn sbt(args: &[&str], env_root: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sbt"));
    cmd.args(args).env_remove("SBT_RESULTS_ROOT");
    if let Some(root) = env_root {
        cmd.env("SBT_RESULTS_ROOT", root);
    }
    cmd.output().expect("sbt runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn no_arguments_prints_usage() {
    let o = sbt(&[], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
}

#[test]
fn unknown_experiment_lists_registry() {
    let o = sbt(&["-e", "nope"], None);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("unknown experiment"), "{err}");
    assert!(err.contains("NSGA2DT"), "{err}");
}

#[test]
fn small_run_writes_results_directory() {
    let root = tempfile::tempdir().unwrap();
    let o = sbt(&["-e", "1", "-n", "10", "-i", "2", "-s", "4", "--run-id", "r1", "-o", root.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let dir = root.path().join("1").join("r1");
    assert_eq!(rows(&dir.join("all_evaluations.csv")), 30);
    for f in ["critical.csv", "tree.json", "regions.txt", "summary.json", "design_space_EgoSpeed_PedDist.svg"] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("evaluations: 30"), "{stdout}");
}

#[test]
fn results_root_from_environment_and_distinct_run_ids() {
    let root = tempfile::tempdir().unwrap();
    for _ in 0..2 {
        let o = sbt(&["-e", "1", "-n", "4", "-i", "0"], Some(root.path()));
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let runs = fs::read_dir(root.path().join("1")).unwrap().count();
    assert_eq!(runs, 2);
}

#[test]
fn zero_time_budget_stops_after_initial_population() {
    let root = tempfile::tempdir().unwrap();
    let o = sbt(
        &["-e", "1", "-n", "8", "-i", "50", "-t", "00:00:00", "--run-id", "t", "-o", root.path().to_str().unwrap()],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(rows(&root.path().join("1/t/all_evaluations.csv")), 8);
}

#[test]
fn nsga2dt_run_records_iterations() {
    let root = tempfile::tempdir().unwrap();
    let o = sbt(&["-e", "2", "-n", "10", "-i", "5", "--run-id", "dt", "-o", root.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let dir = root.path().join("2/dt");
    assert_eq!(rows(&dir.join("all_evaluations.csv")), 60);
    let iterations: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("dt_iterations.json")).unwrap()).unwrap();
    assert!(!iterations.as_array().unwrap().is_empty());
}

#[test]
fn unwritable_results_root_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "").unwrap();
    let root = blocker.join("results");
    let o = sbt(&["-e", "1", "-n", "4", "-i", "0", "-o", root.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

fn write_config(dir: &Path, simulator: &str) -> std::path::PathBuf {
    let text = format!(
        r#"
[[experiment]]
name = "bridge"
algorithm = "nsga2"
[experiment.problem]
problem_name = "BridgeCrossing"
scenario_path = "builtin:pedestrian_crossing"
simulator = "{simulator}"
simulation_variables = ["PedSpeed", "EgoSpeed", "PedDist"]
xl = [0.5, 1.0, 0.0]
xu = [3.0, 22.0, 60.0]
[experiment.search]
population_size = 10
max_generations = 3
seed = 2
"#
    );
    let path = dir.join("experiments.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn subprocess_experiment_runs_through_bridge() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), &format!("subprocess:{}", env!("CARGO_BIN_EXE_sbt-bridge-sim")));
    let root = tmp.path().join("out");
    let args = ["-c", config.to_str().unwrap(), "-e", "bridge", "--run-id", "a", "--workers", "3", "-o", root.to_str().unwrap()];
    let o = sbt(&args, None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(rows(&root.join("bridge/a/all_evaluations.csv")), 40);
}

#[test]
fn dying_backend_exits_3_and_keeps_partial_archive() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = format!("subprocess:{} --exit-after 15", env!("CARGO_BIN_EXE_sbt-bridge-sim"));
    let config = write_config(tmp.path(), &sim);
    let root = tmp.path().join("out");
    let o = sbt(&["-c", config.to_str().unwrap(), "-e", "1", "--run-id", "a", "-o", root.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("backend terminated"), "{}", stderr(&o));
    assert_eq!(rows(&root.join("bridge/a/all_evaluations.csv")), 15);
}

#[test]
fn invalid_config_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "carla");
    let o = sbt(&["-c", config.to_str().unwrap(), "-e", "bridge"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown simulator"), "{}", stderr(&o));
}

#[test]
fn relative_scenario_paths_resolve_against_config_dir() {
    let tmp = tempfile::tempdir().unwrap();
    fs::create_dir(tmp.path().join("scenarios")).unwrap();
    fs::write(tmp.path().join("scenarios/crossing.xosc"), "").unwrap();
    let path = write_config(tmp.path(), "builtin");
    let text = fs::read_to_string(&path).unwrap().replace("builtin:pedestrian_crossing", "scenarios/crossing.xosc");
    fs::write(&path, text).unwrap();
    let reg = ExperimentRegistry::load(&path).unwrap();
    assert_eq!(Path::new(&reg.experiments[0].spec.scenario_path), tmp.path().join("scenarios/crossing.xosc"));
    fs::remove_file(tmp.path().join("scenarios/crossing.xosc")).unwrap();
    assert!(ExperimentRegistry::load(&path).is_err());
}
