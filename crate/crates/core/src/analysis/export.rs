//! CSV, JSON and text artifacts.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use super::cart::DecisionTree;
use super::regions::{format_condition, Region};
use super::{plot, EvaluationRecord};
use crate::scenario::ScenarioSpec;
use crate::sim::protocol::BridgeResponse;
use crate::sim::SimulationOutput;

pub const ALL_EVALUATIONS_CSV: &str = "all_evaluations.csv";
pub const CRITICAL_CSV: &str = "critical.csv";
pub const TREE_JSON: &str = "tree.json";
pub const REGIONS_TXT: &str = "regions.txt";
pub const TRAJECTORIES_DIR: &str = "trajectories";

pub(crate) fn fmt_real(v: f64) -> String {
    format!("{v:.6}")
}

fn csv_writer(path: &Path) -> io::Result<csv::Writer<fs::File>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(fs::File::create(path)?))
}

fn write_records<'a>(
    path: &Path,
    spec: &ScenarioSpec,
    objective_names: &[String],
    records: impl Iterator<Item = &'a EvaluationRecord>,
) -> io::Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["index".to_owned()];
    header.extend(spec.names().map(str::to_owned));
    header.extend(objective_names.iter().cloned());
    header.push("critical".to_owned());
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.index.to_string()];
        row.extend(r.input.values.iter().map(|v| fmt_real(*v)));
        row.extend(r.objectives.iter().map(|v| fmt_real(*v)));
        row.push(r.critical.to_string());
        w.write_record(&row)?;
    }
    w.flush()
}

/// Writes `all_evaluations.csv` and `critical.csv` into `outdir`.
pub fn export_results_csv(
    records: &[EvaluationRecord],
    spec: &ScenarioSpec,
    objective_names: &[String],
    outdir: &Path,
) -> io::Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(outdir)?;
    let all = outdir.join(ALL_EVALUATIONS_CSV);
    let critical = outdir.join(CRITICAL_CSV);
    write_records(&all, spec, objective_names, records.iter())?;
    write_records(&critical, spec, objective_names, records.iter().filter(|r| r.critical))?;
    Ok((all, critical))
}

pub fn write_tree_json(tree: &DecisionTree, outdir: &Path) -> io::Result<PathBuf> {
    let path = outdir.join(TREE_JSON);
    let mut text = serde_json::to_string_pretty(&tree.to_json()).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

/// One line per region: condition, support and purity.
pub fn write_regions_txt(regions: &[Region], spec: &ScenarioSpec, outdir: &Path) -> io::Result<PathBuf> {
    let path = outdir.join(REGIONS_TXT);
    let text: String = regions
        .iter()
        .map(|r| format!("{}\tsupport={}\tpurity={:.4}\n", format_condition(r, spec), r.support, r.purity))
        .collect();
    fs::write(&path, text)?;
    Ok(path)
}

/// Writes `test_<index>.json` (bridge response schema) and `test_<index>.svg`
/// (static path overview) for each record/output pair under
/// `outdir/trajectories/`.
pub fn export_trajectories(
    records: &[&EvaluationRecord],
    outputs: &[SimulationOutput],
    outdir: &Path,
) -> io::Result<Vec<PathBuf>> {
    let dir = outdir.join(TRAJECTORIES_DIR);
    fs::create_dir_all(&dir)?;
    let mut written = Vec::new();
    for (record, output) in records.iter().zip(outputs) {
        let json_path = dir.join(format!("test_{}.json", record.index));
        let mut line = BridgeResponse::from_output(record.index as u64, output).to_line();
        line.push('\n');
        fs::write(&json_path, line)?;
        let svg_path = dir.join(format!("test_{}.svg", record.index));
        fs::write(&svg_path, plot::trajectory_svg(output, record))?;
        written.push(json_path);
        written.push(svg_path);
    }
    Ok(written)
}
