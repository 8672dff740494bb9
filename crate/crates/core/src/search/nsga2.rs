use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::operators::{crowded_tournament_select, polynomial_mutation, sbx_crossover};
use super::sorting::{crowding_distance, fast_non_dominated_sort};
use super::{check_setup, Evaluator, Individual, Optimizer, OptimizerResult, SearchConfig, SearchError};
use crate::scenario::{sample_box, AdasProblem, TestInput};

/// Assigns front rank and crowding distance to every member.
pub fn rank_and_crowd(population: &mut [Individual]) {
    let objectives: Vec<Vec<f64>> = population.iter().map(|i| i.objectives.clone()).collect();
    let fronts = fast_non_dominated_sort(&objectives);
    for (rank, front) in fronts.iter().enumerate() {
        let points: Vec<&[f64]> = front.iter().map(|&i| objectives[i].as_slice()).collect();
        let crowding = crowding_distance(&points);
        for (&i, c) in front.iter().zip(crowding) {
            population[i].rank = rank;
            population[i].crowding = c;
        }
    }
}

/// Keeps `n` members of `merged`: whole fronts in rank order, then the most
/// crowded-distant members of the first front that does not fit.
pub fn environmental_selection(merged: Vec<Individual>, n: usize) -> Vec<Individual> {
    let objectives: Vec<&[f64]> = merged.iter().map(|i| i.objectives.as_slice()).collect();
    let fronts = fast_non_dominated_sort(&objectives);
    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    for front in fronts {
        if chosen.len() + front.len() <= n {
            chosen.extend(front);
            if chosen.len() == n {
                break;
            }
            continue;
        }
        let points: Vec<&[f64]> = front.iter().map(|&i| objectives[i]).collect();
        let crowding = crowding_distance(&points);
        let mut order: Vec<usize> = (0..front.len()).collect();
        order.sort_by(|&a, &b| crowding[b].total_cmp(&crowding[a]).then(a.cmp(&b)));
        chosen.extend(order.into_iter().take(n - chosen.len()).map(|k| front[k]));
        break;
    }
    chosen.sort_unstable();
    let mut slots: Vec<Option<Individual>> = merged.into_iter().map(Some).collect();
    let mut survivors: Vec<Individual> = chosen.into_iter().map(|i| slots[i].take().expect("unique index")).collect();
    rank_and_crowd(&mut survivors);
    survivors
}

pub(super) fn make_offspring<R: Rng + ?Sized>(
    population: &[Individual],
    count: usize,
    bounds: &[(f64, f64)],
    config: &SearchConfig,
    rng: &mut R,
) -> Vec<TestInput> {
    let mutation_probability = config.mutation_probability_for(bounds.len());
    let mut offspring = Vec::with_capacity(count);
    while offspring.len() < count {
        let a = crowded_tournament_select(population, rng);
        let b = crowded_tournament_select(population, rng);
        let (c1, c2) = sbx_crossover(
            &population[a].input.values,
            &population[b].input.values,
            config.crossover_eta,
            config.crossover_probability,
            bounds,
            rng,
        );
        for child in [c1, c2] {
            if offspring.len() < count {
                let mutated = polynomial_mutation(&child, config.mutation_eta, mutation_probability, bounds, rng);
                offspring.push(TestInput::new(mutated));
            }
        }
    }
    offspring
}

/// Runs up to `generations` NSGA-II generations from `population` inside
/// `bounds`. Returns the final population and the number of generations run.
pub(super) fn evolve<R: Rng + ?Sized>(
    evaluator: &mut Evaluator<'_>,
    mut population: Vec<Individual>,
    bounds: &[(f64, f64)],
    generations: usize,
    config: &SearchConfig,
    rng: &mut R,
) -> Result<(Vec<Individual>, usize), SearchError> {
    let n = population.len();
    rank_and_crowd(&mut population);
    let mut run = 0;
    while run < generations {
        if evaluator.out_of_time() {
            log::info!("time budget exhausted after {run} generations");
            break;
        }
        let offspring = make_offspring(&population, n, bounds, config, rng);
        let evaluated = evaluator.evaluate(&offspring)?;
        population.extend(evaluated);
        population = environmental_selection(population, n);
        run += 1;
        log::debug!(
            "generation {run}: {} evaluations, {} critical in archive",
            evaluator.evaluations(),
            evaluator.archive().iter().filter(|r| r.critical).count()
        );
    }
    Ok((population, run))
}

/// Plain NSGA-II over the full search box.
#[derive(Default)]
pub struct Nsga2 {
    setup: Option<(Arc<AdasProblem>, SearchConfig)>,
}

impl Nsga2 {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Optimizer for Nsga2 {
    fn name(&self) -> &'static str {
        "NSGA2"
    }

    fn init(&mut self, problem: Arc<AdasProblem>, config: SearchConfig) -> Result<(), SearchError> {
        check_setup(&problem, &config)?;
        self.setup = Some((problem, config));
        Ok(())
    }

    fn run(&mut self) -> Result<OptimizerResult, SearchError> {
        let (problem, config) = self.setup.as_ref().ok_or(SearchError::NotInitialized)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut evaluator = Evaluator::new(problem, config);
        let bounds = problem.spec.bounds();

        let initial = sample_box(&bounds, config.population_size, &mut rng);
        let population = evaluator.evaluate(&initial)?;
        let (population, generations) =
            evolve(&mut evaluator, population, &bounds, config.max_generations, config, &mut rng)?;
        Ok(OptimizerResult::assemble(self.name(), evaluator, population, generations, Vec::new()))
    }
}
