//! NSGA-II alternated with decision-tree learning.
//!
//! Each iteration runs a short NSGA-II inside every active region, fits a
//! tree on the whole archive, and makes the tree's critical leaves the next
//! active regions. With no critical leaf the search falls back to the full
//! box. Budget is counted in simulator evaluations.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::nsga2::{evolve, rank_and_crowd};
use super::{check_setup, Evaluator, Individual, Optimizer, OptimizerResult, SearchConfig, SearchError};
use crate::analysis::{fit_cart_on_records, leaf_regions, CartParams, DecisionTree, Node, Region};
use crate::scenario::{sample_box, AdasProblem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DtConfig {
    /// Evaluations per iteration, in units of the population size.
    pub inner_generations: usize,
    pub max_iterations: Option<usize>,
    /// A leaf becomes an active region only with at least this many samples.
    pub min_leaf_samples: usize,
    /// ... and at least this critical fraction.
    pub critical_leaf_fraction: f64,
    pub cart: CartParams,
    /// Seed each region's population with archive members lying inside it.
    pub seed_from_archive: bool,
}

impl Default for DtConfig {
    fn default() -> Self {
        Self {
            inner_generations: 10,
            max_iterations: None,
            min_leaf_samples: 5,
            critical_leaf_fraction: 0.5,
            cart: CartParams::default(),
            seed_from_archive: true,
        }
    }
}

impl DtConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.inner_generations == 0 {
            return Err(SearchError::InvalidConfig("inner_generations must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.critical_leaf_fraction) {
            return Err(SearchError::InvalidConfig("critical_leaf_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Snapshot taken after each outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DtIteration {
    pub iteration: usize,
    /// Archive size when the tree was fitted.
    pub evaluations: usize,
    pub tree: DecisionTree,
    /// Regions searched in the next iteration.
    pub regions: Vec<Region>,
    /// True when no leaf qualified and the full box was used instead.
    pub fallback: bool,
}

/// Selects the next active regions from a fitted tree.
pub fn active_regions(
    tree: &DecisionTree,
    problem: &AdasProblem,
    dt: &DtConfig,
) -> (Vec<Region>, bool) {
    let mut regions: Vec<Region> = Vec::new();
    for region in leaf_regions(tree, &problem.spec) {
        let Node::Leaf { count_total, count_critical, .. } = tree.nodes[region.leaf] else {
            continue;
        };
        let fraction = if count_total == 0 { 0.0 } else { count_critical as f64 / count_total as f64 };
        let qualifies = count_total >= dt.min_leaf_samples && count_critical > 0 && fraction >= dt.critical_leaf_fraction;
        if qualifies && !regions.iter().any(|r| r.same_box(&region)) {
            regions.push(Region { critical: true, ..region });
        }
    }
    if regions.is_empty() {
        (vec![Region::full(&problem.spec)], true)
    } else {
        (regions, false)
    }
}

#[derive(Default)]
pub struct Nsga2Dt {
    dt: DtConfig,
    setup: Option<(Arc<AdasProblem>, SearchConfig)>,
}

impl Nsga2Dt {
    pub fn new(dt: DtConfig) -> Self {
        Self { dt, setup: None }
    }

    pub fn dt_config(&self) -> &DtConfig {
        &self.dt
    }
}

/// Archive members inside `region`, best non-dominated ranks first, at most `limit`.
fn archive_seeds(evaluator: &Evaluator<'_>, region: &Region, limit: usize) -> Vec<Individual> {
    let mut inside: Vec<Individual> = evaluator
        .archive()
        .iter()
        .filter(|r| region.contains(&r.input))
        .map(|r| evaluator.individual(r))
        .collect();
    if inside.len() <= limit {
        return inside;
    }
    rank_and_crowd(&mut inside);
    inside.sort_by(|a, b| {
        a.rank
            .cmp(&b.rank)
            .then(b.crowding.total_cmp(&a.crowding))
            .then(a.archive_index.cmp(&b.archive_index))
    });
    inside.truncate(limit);
    inside
}

impl Optimizer for Nsga2Dt {
    fn name(&self) -> &'static str {
        "NSGA2DT"
    }

    fn init(&mut self, problem: Arc<AdasProblem>, config: SearchConfig) -> Result<(), SearchError> {
        check_setup(&problem, &config)?;
        self.dt.validate()?;
        self.setup = Some((problem, config));
        Ok(())
    }

    fn run(&mut self) -> Result<OptimizerResult, SearchError> {
        let (problem, config) = self.setup.as_ref().ok_or(SearchError::NotInitialized)?;
        let dt = &self.dt;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut evaluator = Evaluator::new(problem, config);
        let n = config.population_size;
        let budget = config.evaluation_budget();

        let mut regions = vec![Region::full(&problem.spec)];
        let mut iterations: Vec<DtIteration> = Vec::new();
        let mut final_population: Vec<Individual> = Vec::new();

        while evaluator.evaluations() < budget
            && !evaluator.out_of_time()
            && dt.max_iterations.map_or(true, |m| iterations.len() < m)
        {
            let before = evaluator.evaluations();
            let allowance = (dt.inner_generations * n).min(budget - before);
            let per_region = allowance / regions.len();
            let mut populations = Vec::new();

            for region in &regions {
                let size = per_region.min(n) & !1;
                if size < 4 {
                    continue;
                }
                let bounds = region.bounds();
                let mut population = if dt.seed_from_archive {
                    archive_seeds(&evaluator, region, size)
                } else {
                    Vec::new()
                };
                let fill = size - population.len();
                let used_before = evaluator.evaluations();
                population.extend(evaluator.evaluate(&sample_box(&bounds, fill, &mut rng))?);
                let spent = evaluator.evaluations() - used_before;
                let generations = (per_region - spent) / size;
                let (population, _) = evolve(&mut evaluator, population, &bounds, generations, config, &mut rng)?;
                populations.extend(population);
            }
            if evaluator.evaluations() == before {
                break;
            }
            final_population = populations;

            let tree = fit_cart_on_records(evaluator.archive(), &problem.spec, dt.cart);
            let (mut next, fallback) = active_regions(&tree, problem, dt);
            for r in &mut next {
                r.score(evaluator.archive());
            }
            log::info!(
                "NSGAII-DT iteration {}: {} evaluations, {} active region(s){}",
                iterations.len() + 1,
                evaluator.evaluations(),
                next.len(),
                if fallback { " (full box)" } else { "" }
            );
            iterations.push(DtIteration {
                iteration: iterations.len() + 1,
                evaluations: evaluator.evaluations(),
                tree,
                regions: next.clone(),
                fallback,
            });
            regions = next;
        }

        rank_and_crowd(&mut final_population);
        let count = iterations.len();
        Ok(OptimizerResult::assemble(self.name(), evaluator, final_population, count, iterations))
    }
}
