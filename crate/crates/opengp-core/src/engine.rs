//! Generational GP loop: ramped initialization, tournament selection,
//! subtree crossover and mutation, and per-generation statistics.
//!
//! Determinism contract: all RNG-consuming work (selection, operator
//! choice, subtree generation) happens sequentially in one stream; child
//! fitness evaluation is pure and may be farmed to any number of parallel
//! workers without changing a single output bit. Results are gathered by
//! child index.

use rand::Rng;
use rand::SeedableRng;
use rayon::prelude::*;
use thiserror::Error;

use crate::analysis::{incremental_child_fitness_recompute, MUTATION_SUBTREE_HEIGHT};
use crate::eval::{eval_tree, fitness_of_values};
use crate::random::{random_tree_with, GenMethod, GpRng, TerminalSet};
use crate::stats::{summarize_heights, BinTally, DepthBin, HeightSummary};
use crate::suite::TestSuite;
use crate::tree::{ExprTree, NodeId};

/// Operator retry budget when a height limit rejects the child.
pub const OPERATOR_ATTEMPTS: u32 = 10;

/// Fraction of crossover sites drawn from internal nodes when any exist.
pub const CROSSOVER_INTERNAL_BIAS: f64 = 0.9;

#[derive(Debug, Error, PartialEq)]
#[error("invalid parameter `{field}`: {message}")]
pub struct ParamError {
    pub field: &'static str,
    pub message: String,
}

fn param_err(field: &'static str, message: impl Into<String>) -> ParamError {
    ParamError { field, message: message.into() }
}

/// Knobs of one GP run.
#[derive(Clone, Debug, PartialEq)]
pub struct GpParams {
    pub population_size: usize,
    pub generations: u32,
    pub tournament_size: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub init_height_min: u32,
    pub init_height_max: u32,
    /// `None` lets trees grow without bound.
    pub height_limit: Option<u32>,
    pub seed: u64,
    pub shortcut_enabled: bool,
    /// Per-case absolute error below which a case counts as a hit.
    pub hit_threshold: f64,
}

impl Default for GpParams {
    fn default() -> Self {
        GpParams {
            population_size: 500,
            generations: 200,
            tournament_size: 7,
            crossover_rate: 0.9,
            mutation_rate: 0.05,
            init_height_min: 2,
            init_height_max: 6,
            height_limit: None,
            seed: 0,
            shortcut_enabled: true,
            hit_threshold: 0.01,
        }
    }
}

impl GpParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if self.population_size < 2 {
            return Err(param_err("population_size", "must be at least 2"));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(param_err("crossover_rate", "must be in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(param_err("mutation_rate", "must be in [0, 1]"));
        }
        if self.crossover_rate + self.mutation_rate > 1.0 {
            return Err(param_err(
                "crossover_rate",
                "crossover_rate + mutation_rate must not exceed 1",
            ));
        }
        if self.tournament_size == 0 || self.tournament_size > self.population_size {
            return Err(param_err(
                "tournament_size",
                "must be in [1, population_size]",
            ));
        }
        if self.init_height_min < 1 {
            return Err(param_err("init_height_min", "must be at least 1"));
        }
        if self.init_height_max < self.init_height_min {
            return Err(param_err(
                "init_height_max",
                "must be >= init_height_min",
            ));
        }
        if self.init_height_max > 1000 {
            return Err(param_err("init_height_max", "must be <= 1000"));
        }
        if let Some(limit) = self.height_limit {
            if limit < self.init_height_max {
                return Err(param_err(
                    "height_limit",
                    "must be >= init_height_max when set",
                ));
            }
        }
        if self.hit_threshold.is_nan() || self.hit_threshold <= 0.0 {
            return Err(param_err("hit_threshold", "must be positive"));
        }
        Ok(())
    }
}

/// A scored tree. `fitness` always equals a from-scratch evaluation of
/// `tree` bitwise, whether or not it was obtained through the shortcut.
#[derive(Clone, Debug)]
pub struct Individual {
    pub tree: ExprTree,
    pub fitness: f64,
    /// True when the fitness was inherited from the parent after the
    /// incremental evaluation proved the child identical at some ancestor.
    pub fitness_copied: bool,
}

#[derive(Clone, Debug)]
pub struct Population {
    pub members: Vec<Individual>,
    pub generation: u32,
}

impl Population {
    pub fn best_index(&self) -> usize {
        let mut best = 0;
        for i in 1..self.members.len() {
            if better(&self.members[i], &self.members[best]) {
                best = i;
            }
        }
        best
    }

    pub fn best(&self) -> &Individual {
        &self.members[self.best_index()]
    }
}

/// Selection order: lower fitness, then smaller tree, then lower index
/// (the index tiebreak falls out of scan order).
#[inline]
fn better(a: &Individual, b: &Individual) -> bool {
    if a.fitness != b.fitness {
        return a.fitness < b.fitness;
    }
    a.tree.len() < b.tree.len()
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

/// Ramped half-and-half over the configured height range: heights cycle
/// through the range, alternating grow and full, and every individual is
/// evaluated before the population is returned.
pub fn init_population(params: &GpParams, suite: &TestSuite, rng: &mut impl Rng) -> Population {
    init_population_with(params, suite, TerminalSet::PLAIN, rng)
}

pub(crate) fn init_trees(
    params: &GpParams,
    terminals: TerminalSet,
    count: usize,
    height_cap: u32,
    rng: &mut impl Rng,
) -> Vec<ExprTree> {
    let lo = params.init_height_min.min(height_cap).max(1);
    let hi = params.init_height_max.min(height_cap).max(lo);
    let levels = (hi - lo + 1) as usize;
    (0..count)
        .map(|i| {
            let method = if i % 2 == 0 { GenMethod::Grow } else { GenMethod::Full };
            let height = lo + ((i / 2) % levels) as u32;
            random_tree_with(method, height, terminals, rng)
        })
        .collect()
}

fn init_population_with(
    params: &GpParams,
    suite: &TestSuite,
    terminals: TerminalSet,
    rng: &mut impl Rng,
) -> Population {
    let cap = params.height_limit.unwrap_or(u32::MAX);
    let trees = init_trees(params, terminals, params.population_size, cap, rng);
    let members: Vec<Individual> = trees
        .into_par_iter()
        .map(|tree| {
            let fitness = crate::eval::fitness(&tree, suite);
            Individual { tree, fitness, fitness_copied: false }
        })
        .collect();
    Population { members, generation: 0 }
}

// ---------------------------------------------------------------------------
// Selection and variation
// ---------------------------------------------------------------------------

/// Tournament selection: draw `k` members uniformly with replacement and
/// return the index of the winner (minimal fitness, ties broken by smaller
/// tree, then lower index).
pub fn tournament_select(pop: &Population, k: usize, rng: &mut impl Rng) -> usize {
    assert!(k >= 1 && k <= pop.members.len());
    let mut winner = rng.gen_range(0..pop.members.len());
    for _ in 1..k {
        let challenger = rng.gen_range(0..pop.members.len());
        // Strictly-better keeps the lower index on full ties.
        let (a, b) = (&pop.members[challenger], &pop.members[winner]);
        if better(a, b) || (!better(b, a) && challenger < winner) {
            winner = challenger;
        }
    }
    winner
}

/// Crossover site choice: 90% internal nodes, 10% leaves, when internal
/// nodes exist.
pub(crate) fn pick_site_biased(tree: &ExprTree, rng: &mut impl Rng) -> NodeId {
    let internal = tree.internal_ids();
    if !internal.is_empty() && rng.gen_bool(CROSSOVER_INTERNAL_BIAS) {
        internal[rng.gen_range(0..internal.len())]
    } else {
        let leaves = tree.leaf_ids();
        leaves[rng.gen_range(0..leaves.len())]
    }
}

/// Sites of a crossover: `site` in the first parent receives the subtree
/// rooted at `donor_site` in the second.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossoverInfo {
    pub site: NodeId,
    pub donor_site: NodeId,
}

/// Subtree crossover. When a height limit rejects the child the sites are
/// redrawn up to [`OPERATOR_ATTEMPTS`] times; if every attempt fails the
/// first parent is returned unchanged with no site info.
pub fn subtree_crossover(
    parent1: &ExprTree,
    parent2: &ExprTree,
    height_limit: Option<u32>,
    rng: &mut impl Rng,
) -> (ExprTree, Option<CrossoverInfo>) {
    for _ in 0..OPERATOR_ATTEMPTS {
        let site = pick_site_biased(parent1, rng);
        let donor_site = pick_site_biased(parent2, rng);
        let sub = parent2.subtree_at(donor_site).expect("donor site is valid");
        let child = parent1.replace_subtree(site, &sub).expect("site is valid");
        if height_limit.is_none_or(|limit| child.height() <= limit) {
            return (child, Some(CrossoverInfo { site, donor_site }));
        }
    }
    (parent1.clone(), None)
}

/// Site of a point mutation and the subtree grown to replace it.
#[derive(Clone, Debug)]
pub struct MutationInfo {
    pub site: NodeId,
    pub new_subtree: ExprTree,
}

/// Subtree mutation: a uniformly chosen node's subtree is replaced by a
/// fresh grow tree of height at most [`MUTATION_SUBTREE_HEIGHT`]. Retries
/// and the fallback copy follow the crossover rule.
pub fn subtree_mutation(
    parent: &ExprTree,
    height_limit: Option<u32>,
    rng: &mut impl Rng,
) -> (ExprTree, Option<MutationInfo>) {
    subtree_mutation_with(parent, height_limit, TerminalSet::PLAIN, rng)
}

pub(crate) fn subtree_mutation_with(
    parent: &ExprTree,
    height_limit: Option<u32>,
    terminals: TerminalSet,
    rng: &mut impl Rng,
) -> (ExprTree, Option<MutationInfo>) {
    for _ in 0..OPERATOR_ATTEMPTS {
        let site = NodeId(rng.gen_range(0..parent.len()) as u32);
        let new_subtree = random_tree_with(GenMethod::Grow, MUTATION_SUBTREE_HEIGHT, terminals, rng);
        let child = parent.replace_subtree(site, &new_subtree).expect("site is valid");
        if height_limit.is_none_or(|limit| child.height() <= limit) {
            return (child, Some(MutationInfo { site, new_subtree }));
        }
    }
    (parent.clone(), None)
}

// ---------------------------------------------------------------------------
// Generational step
// ---------------------------------------------------------------------------

/// One generation's report row.
#[derive(Clone, Debug, PartialEq)]
pub struct GenStats {
    pub generation: u32,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub mean_size: f64,
    pub heights: HeightSummary,
    /// Children whose fitness was inherited through the shortcut.
    pub shortcut_hits: u64,
    /// Scalar node evaluations spent scoring this generation's children.
    pub nodes_evaluated: u64,
    /// Genetic operations binned by site depth in the parent, with silence
    /// counts (child fitness bitwise equal to the parent's).
    pub silent_bins: Vec<BinTally>,
}

/// Per-generation rows of one run, plus the binning they were tallied
/// under.
#[derive(Clone, Debug)]
pub struct RunStats {
    pub bins: Vec<DepthBin>,
    pub rows: Vec<GenStats>,
}

enum ChildPlan {
    Reproduce { parent: usize },
    Vary {
        parent: usize,
        child: ExprTree,
        /// Site in the parent, absent when the operator fell back to a
        /// plain copy after exhausting its retries.
        site: Option<NodeId>,
    },
}

struct ChildOutcome {
    fitness: f64,
    copied: bool,
    scalar_evals: u64,
    /// Depth of the site in the parent and whether the child's fitness was
    /// bitwise unchanged; absent for reproduction and fallback copies.
    silent_at_depth: Option<(u32, bool)>,
}

fn evaluate_child(plan: &ChildPlan, pop: &Population, params: &GpParams, suite: &TestSuite) -> ChildOutcome {
    match plan {
        ChildPlan::Reproduce { parent } | ChildPlan::Vary { parent, site: None, .. } => {
            // The child is a verbatim copy; determinism makes the parent's
            // fitness exact for it.
            ChildOutcome {
                fitness: pop.members[*parent].fitness,
                copied: false,
                scalar_evals: 0,
                silent_at_depth: None,
            }
        }
        ChildPlan::Vary { parent, child, site: Some(site) } => {
            let parent_ind = &pop.members[*parent];
            let depth = parent_ind.tree.depths()[site.index()];
            let (fitness, copied, scalar_evals) = if params.shortcut_enabled {
                // The replacement subtree sits at the same offset in the
                // child's arena as the site does in the parent's.
                let sub = child.subtree_at(*site).expect("site is valid in the child");
                let r = incremental_child_fitness_recompute(
                    &parent_ind.tree,
                    parent_ind.fitness,
                    *site,
                    &sub,
                    suite,
                );
                (r.fitness, r.copied, r.scalar_evals)
            } else {
                let f = crate::eval::fitness(child, suite);
                (f, false, child.len() as u64 * suite.len() as u64)
            };
            let silent = fitness.to_bits() == parent_ind.fitness.to_bits();
            ChildOutcome { fitness, copied, scalar_evals, silent_at_depth: Some((depth, silent)) }
        }
    }
}

/// Produce the next generation and its statistics row. The population size
/// is preserved; children are built by crossover, mutation or reproduction
/// according to the configured rates.
pub fn evolve_generation(
    pop: &Population,
    params: &GpParams,
    suite: &TestSuite,
    bins: &[DepthBin],
    rng: &mut impl Rng,
) -> (Population, GenStats) {
    let k = params.tournament_size;
    let limit = params.height_limit;

    // Sequential phase: every random draw happens here, in child order.
    let plans: Vec<ChildPlan> = (0..params.population_size)
        .map(|_| {
            let roll: f64 = rng.gen();
            if roll < params.crossover_rate {
                let p1 = tournament_select(pop, k, rng);
                let p2 = tournament_select(pop, k, rng);
                let (child, info) =
                    subtree_crossover(&pop.members[p1].tree, &pop.members[p2].tree, limit, rng);
                ChildPlan::Vary { parent: p1, child, site: info.map(|i| i.site) }
            } else if roll < params.crossover_rate + params.mutation_rate {
                let p = tournament_select(pop, k, rng);
                let (child, info) = subtree_mutation(&pop.members[p].tree, limit, rng);
                ChildPlan::Vary { parent: p, child, site: info.map(|i| i.site) }
            } else {
                ChildPlan::Reproduce { parent: tournament_select(pop, k, rng) }
            }
        })
        .collect();

    // Parallel phase: pure evaluation, gathered by index.
    let outcomes: Vec<ChildOutcome> = plans
        .par_iter()
        .with_min_len(8)
        .map(|plan| evaluate_child(plan, pop, params, suite))
        .collect();

    let mut members = Vec::with_capacity(params.population_size);
    let mut shortcut_hits = 0u64;
    let mut nodes_evaluated = 0u64;
    let mut tallies = vec![BinTally::default(); bins.len()];
    for (plan, outcome) in plans.into_iter().zip(outcomes) {
        shortcut_hits += outcome.copied as u64;
        nodes_evaluated += outcome.scalar_evals;
        if let Some((depth, silent)) = outcome.silent_at_depth {
            if let Some(idx) = bins.iter().position(|b| b.contains(depth)) {
                tallies[idx].ops += 1;
                tallies[idx].silent += silent as u64;
            }
        }
        let tree = match plan {
            ChildPlan::Reproduce { parent } => pop.members[parent].tree.clone(),
            ChildPlan::Vary { child, .. } => child,
        };
        members.push(Individual { tree, fitness: outcome.fitness, fitness_copied: outcome.copied });
    }

    let next = Population { members, generation: pop.generation + 1 };
    let stats = population_stats(&next, shortcut_hits, nodes_evaluated, tallies);
    (next, stats)
}

fn population_stats(
    pop: &Population,
    shortcut_hits: u64,
    nodes_evaluated: u64,
    silent_bins: Vec<BinTally>,
) -> GenStats {
    let n = pop.members.len() as f64;
    let best = pop.best().fitness;
    let mean_fitness = pop.members.iter().map(|m| m.fitness).sum::<f64>() / n;
    let mean_size = pop.members.iter().map(|m| m.tree.len() as f64).sum::<f64>() / n;
    let heights: Vec<u32> = pop.members.iter().map(|m| m.tree.height()).collect();
    GenStats {
        generation: pop.generation,
        best_fitness: best,
        mean_fitness,
        mean_size,
        heights: summarize_heights(&heights),
        shortcut_hits,
        nodes_evaluated,
        silent_bins,
    }
}

/// Run a full monolithic experiment: seeded initialization, then
/// `generations` sequential steps. Row 0 describes the initial population;
/// each later row one evolved generation. Fully reproducible from
/// `params.seed`, whatever the evaluation worker count.
pub fn run(params: &GpParams, suite: &TestSuite, bins: &[DepthBin]) -> (RunStats, Population) {
    params.validate().expect("validated parameters");
    let mut rng = GpRng::seed_from_u64(params.seed);
    let mut pop = init_population(params, suite, &mut rng);

    let init_evals: u64 = pop
        .members
        .iter()
        .map(|m| m.tree.len() as u64 * suite.len() as u64)
        .sum();
    let mut rows = vec![population_stats(&pop, 0, init_evals, vec![BinTally::default(); bins.len()])];

    for _ in 0..params.generations {
        let (next, stats) = evolve_generation(&pop, params, suite, bins, &mut rng);
        pop = next;
        rows.push(stats);
    }
    (RunStats { bins: bins.to_vec(), rows }, pop)
}

/// Re-derive an individual's fitness from scratch; used by integrity
/// checks.
pub fn reevaluate(ind: &Individual, suite: &TestSuite) -> f64 {
    fitness_of_values(&eval_tree(&ind.tree, suite), suite)
}
