//! Post-search characterization of the evaluated test cases.

pub mod cart;
pub mod export;
pub mod plot;
pub mod regions;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::scenario::TestInput;

pub use cart::{fit_cart, fit_cart_on_records, CartParams, DecisionTree, Node};
pub use export::{export_results_csv, export_trajectories, write_regions_txt, write_tree_json};
pub use plot::export_design_space_plots;
pub use regions::{extract_critical_regions, format_condition, leaf_regions, Interval, Region};

/// One simulated test case as stored in the search archive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub index: usize,
    pub input: TestInput,
    /// Objective values in user orientation (before any sign flip).
    pub objectives: Vec<f64>,
    pub critical: bool,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}
