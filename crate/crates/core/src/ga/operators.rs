use rand::seq::index::sample;
use rand::Rng;

use crate::seed::Rng as SeededRng;
use crate::transforms::{Pipeline, Practice};

use super::{rank_order, GAConfig, Individual};

/// `cfg.population` random pipelines, each of uniform length in
/// `[1, min(l_max, catalog size)]` with kinds drawn without replacement.
pub fn initialize_population(cfg: &GAConfig, rng: &mut SeededRng) -> Vec<Individual> {
    let catalog = &cfg.practice_catalog;
    let longest = cfg.l_max.min(catalog.len());
    (0..cfg.population)
        .map(|_| {
            let len = rng.random_range(1..=longest);
            let steps = sample(rng, catalog.len(), len).into_iter().map(|i| catalog[i].clone()).collect();
            Individual::new(Pipeline::new(steps).expect("catalog kinds are distinct"))
        })
        .collect()
}

/// The best `ceil(N / 2)` individuals, best first.
pub fn select_mating_pool(population: &[Individual]) -> Vec<Individual> {
    let mut ranked = population.to_vec();
    ranked.sort_by(rank_order);
    ranked.truncate(population.len().div_ceil(2));
    ranked
}

/// Single-point crossover. With probability `rate` a cut is drawn in each
/// parent and the tails are swapped; otherwise the children copy the parents.
pub fn crossover(p1: &Pipeline, p2: &Pipeline, rate: f64, l_max: usize, rng: &mut SeededRng) -> (Pipeline, Pipeline) {
    if !rng.random_bool(rate) {
        return (p1.clone(), p2.clone());
    }
    let c1 = cut_point(p1.len(), rng);
    let c2 = cut_point(p2.len(), rng);
    crossover_at(p1, p2, c1, c2, l_max)
}

/// Interior cut in `[1, len - 1]`; a single-step parent is cut at either end.
fn cut_point(len: usize, rng: &mut SeededRng) -> usize {
    if len == 1 { rng.random_range(0..=1) } else { rng.random_range(1..len) }
}

/// Children `p1[..c1] ++ p2[c2..]` and `p2[..c2] ++ p1[c1..]`, with repeated
/// kinds dropped after their first occurrence and lengths cut to `l_max`.
/// A child left empty is replaced by a copy of its first parent.
pub fn crossover_at(p1: &Pipeline, p2: &Pipeline, c1: usize, c2: usize, l_max: usize) -> (Pipeline, Pipeline) {
    let splice = |head: &[Practice], tail: &[Practice], fallback: &Pipeline| {
        let mut steps: Vec<Practice> = Vec::with_capacity(head.len() + tail.len());
        for step in head.iter().chain(tail) {
            if !steps.iter().any(|s| s.kind == step.kind) {
                steps.push(step.clone());
            }
        }
        steps.truncate(l_max.max(1));
        Pipeline::new(steps).unwrap_or_else(|_| fallback.clone())
    };
    let (a, b) = (p1.steps(), p2.steps());
    (splice(&a[..c1], &b[c2..], p1), splice(&b[..c2], &a[c1..], p2))
}

/// With probability `rate`, replaces one uniformly chosen step by a catalog
/// practice whose kind is not yet in the pipeline.
pub fn mutate(pipeline: &Pipeline, rate: f64, catalog: &[Practice], rng: &mut SeededRng) -> Pipeline {
    if !rng.random_bool(rate) {
        return pipeline.clone();
    }
    let candidates: Vec<&Practice> = catalog.iter().filter(|p| !pipeline.contains(p.kind)).collect();
    if candidates.is_empty() {
        return pipeline.clone();
    }
    let position = rng.random_range(0..pipeline.len());
    let replacement = candidates[rng.random_range(0..candidates.len())].clone();
    let mut steps = pipeline.steps().to_vec();
    steps[position] = replacement;
    Pipeline::new(steps).expect("replacement kind is new")
}
