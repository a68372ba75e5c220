//! Information-theoretic instrumentation for evolved trees.
//!
//! Three views of the same phenomenon live here:
//!
//! * per-node entropy accounting: each operator maps its observed operand
//!   pairs onto outputs and can only discard information doing so;
//! * disruption tracing: replace one node's output vector and watch how
//!   far the change survives on the way to the root;
//! * the fitness-copy shortcut: evaluate a child only until its root-path
//!   values provably match its parent's, then inherit the parent's fitness
//!   exactly.
//!
//! Entropy is computed over exact (bitwise) distinct double values, which
//! makes the data-processing inequality an exact statement rather than an
//! estimate. Silence likewise means bitwise-identical fitness; a
//! tolerance-based count is reported alongside as a secondary column.

use rand::Rng;
use rayon::prelude::*;

use crate::engine::Individual;
use crate::eval::{
    count_bitwise_diffs, eval_all_nodes, eval_subtree, eval_tree, fitness_of_values,
    values_bitwise_eq,
};
use crate::random::{random_tree, GenMethod};
use crate::stats::DepthBin;
use crate::suite::{TestSuite, ValueVector};
use crate::tree::{ExprTree, Node, NodeId, OpKind};

/// Fresh subtrees grown by point mutation are capped at this height.
pub const MUTATION_SUBTREE_HEIGHT: u32 = 4;

/// Secondary, tolerance-based silence criterion: |child - parent| fitness
/// difference at or below this counts as silent-within-tolerance.
pub const SILENT_ABS_TOL: f64 = 1e-9;

/// Default magnitude for the additive-perturbation helper.
pub const DEFAULT_EPSILON: f64 = 1e-3;

// ---------------------------------------------------------------------------
// Entropy
// ---------------------------------------------------------------------------

/// Empirical Shannon entropy in bits over exact distinct values:
/// -sum p_i log2 p_i, where p_i is the frequency of each distinct bit
/// pattern among the cases.
pub fn value_entropy(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "entropy of an empty vector");
    let mut bits: Vec<u64> = values.iter().map(|v| v.to_bits()).collect();
    bits.sort_unstable();
    entropy_of_sorted_runs(&bits, values.len())
}

fn entropy_of_run_counts(counts: &[usize], n: usize) -> f64 {
    if counts.len() <= 1 {
        return 0.0;
    }
    let n = n as f64;
    let mut h = 0.0;
    for &c in counts {
        let p = c as f64 / n;
        h -= p * p.log2();
    }
    h + 0.0 // normalizes -0.0
}

fn entropy_of_sorted_runs<T: PartialEq>(sorted: &[T], n: usize) -> f64 {
    let mut counts = Vec::new();
    let mut run = 1usize;
    for i in 1..sorted.len() {
        if sorted[i] == sorted[i - 1] {
            run += 1;
        } else {
            counts.push(run);
            run = 1;
        }
    }
    counts.push(run);
    entropy_of_run_counts(&counts, n)
}

/// Entropy bookkeeping for one internal node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeEntropy {
    /// Entropy of the node's own output vector.
    pub entropy_bits: f64,
    /// Entropy of the observed (left, right) operand pairs.
    pub operand_joint_entropy_bits: f64,
    /// joint - output; nonnegative for deterministic operators.
    pub loss_bits: f64,
}

/// Per-node entropy across a whole tree; terminals hold `None`.
#[derive(Clone, Debug)]
pub struct EntropyReport {
    pub per_node: Vec<Option<NodeEntropy>>,
}

impl EntropyReport {
    pub fn get(&self, id: NodeId) -> Option<&NodeEntropy> {
        self.per_node[id.index()].as_ref()
    }

    pub fn internal(&self) -> impl Iterator<Item = (NodeId, &NodeEntropy)> {
        self.per_node
            .iter()
            .enumerate()
            .filter_map(|(i, e)| e.as_ref().map(|e| (NodeId(i as u32), e)))
    }
}

/// Compute output entropy, operand joint entropy and the loss between them
/// for every internal node.
pub fn entropy_report(tree: &ExprTree, suite: &TestSuite) -> EntropyReport {
    let table = eval_all_nodes(tree, suite);
    let per_node = tree
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, n)| match n {
            Node::Op { left, right, .. } => {
                let out_h = value_entropy(&table[i]);
                let mut pairs: Vec<(u64, u64)> = table[left.index()]
                    .iter()
                    .zip(&table[right.index()])
                    .map(|(a, b)| (a.to_bits(), b.to_bits()))
                    .collect();
                pairs.sort_unstable();
                let joint_h = entropy_of_sorted_runs(&pairs, pairs.len());
                Some(NodeEntropy {
                    entropy_bits: out_h,
                    operand_joint_entropy_bits: joint_h,
                    loss_bits: joint_h - out_h,
                })
            }
            _ => None,
        })
        .collect();
    EntropyReport { per_node }
}

// ---------------------------------------------------------------------------
// Disruption injection
// ---------------------------------------------------------------------------

/// A value-vector replacement at one node. This subsumes subtree
/// replacement, constant perturbation and additive noise: all of them
/// reduce to "the node now emits these values".
#[derive(Clone, Debug, PartialEq)]
pub struct Perturbation {
    pub values: ValueVector,
}

impl Perturbation {
    pub fn replace_values(values: ValueVector) -> Perturbation {
        Perturbation { values }
    }

    /// Original values shifted by a constant epsilon.
    pub fn additive_epsilon(original: &[f64], epsilon: f64) -> Perturbation {
        Perturbation { values: original.iter().map(|v| v + epsilon).collect() }
    }

    /// The vector a replacement subtree would emit at the site.
    pub fn from_subtree(sub: &ExprTree, suite: &TestSuite) -> Perturbation {
        Perturbation { values: eval_tree(sub, suite) }
    }
}

/// One rung of a disruption's climb to the root.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceStep {
    pub node: NodeId,
    pub depth: u32,
    /// Cases whose value differs bitwise from the undisrupted evaluation.
    pub visible_cases: usize,
}

/// Record of how an injected disruption attenuates along the root path.
#[derive(Clone, Debug)]
pub struct PropagationTrace {
    pub origin: NodeId,
    pub perturbation: Perturbation,
    /// Ordered origin -> root.
    pub per_ancestor: Vec<TraceStep>,
    /// First node on the path with zero visible cases, if any.
    pub absorbed_at: Option<NodeId>,
    pub fitness_changed: bool,
}

impl PropagationTrace {
    /// The disrupted root output (the last recomputed vector).
    pub fn reached_root_visibly(&self) -> bool {
        self.per_ancestor.last().is_some_and(|s| s.visible_cases > 0)
    }
}

/// Re-evaluate only the root path of `tree`, treating `origin`'s output as
/// `perturbed` while every sibling keeps its original values, and record
/// how many cases still differ at each ancestor.
///
/// The climb is recomputed honestly all the way to the root — absorption
/// showing up as an unbroken run of zero-visibility steps is a property of
/// the arithmetic, not of this function.
pub fn inject_disruption(
    tree: &ExprTree,
    suite: &TestSuite,
    origin: NodeId,
    perturbed: &[f64],
) -> PropagationTrace {
    assert!(tree.contains(origin), "origin node out of range");
    assert_eq!(perturbed.len(), suite.len(), "perturbation length mismatch");

    let table = eval_all_nodes(tree, suite);
    let parents = tree.parents();
    let depths = tree.depths();

    let mut per_ancestor = Vec::new();
    let mut absorbed_at = None;
    let mut record = |node: NodeId, current: &[f64]| {
        let visible = count_bitwise_diffs(current, &table[node.index()]);
        if visible == 0 && absorbed_at.is_none() {
            absorbed_at = Some(node);
        }
        per_ancestor.push(TraceStep { node, depth: depths[node.index()], visible_cases: visible });
    };

    let mut current: ValueVector = perturbed.to_vec();
    record(origin, &current);

    let mut node = origin;
    while let Some(parent) = parents[node.index()] {
        let Node::Op { kind, left, right } = tree.node(parent) else {
            unreachable!("parents are operator nodes");
        };
        let sibling = if left == node { right } else { left };
        let sib_values = &table[sibling.index()];
        current = if left == node {
            apply_elementwise(kind, &current, sib_values)
        } else {
            apply_elementwise(kind, sib_values, &current)
        };
        record(parent, &current);
        node = parent;
    }

    let original_fitness = fitness_of_values(&table[0], suite);
    let disrupted_fitness = fitness_of_values(&current, suite);
    PropagationTrace {
        origin,
        perturbation: Perturbation { values: perturbed.to_vec() },
        per_ancestor,
        absorbed_at,
        fitness_changed: disrupted_fitness.to_bits() != original_fitness.to_bits(),
    }
}

#[inline]
fn apply_elementwise(kind: OpKind, left: &[f64], right: &[f64]) -> ValueVector {
    left.iter().zip(right).map(|(a, b)| kind.apply(*a, *b)).collect()
}

// ---------------------------------------------------------------------------
// Incremental (fitness-copy) evaluation
// ---------------------------------------------------------------------------

/// Outcome of an incremental child evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShortcutEval {
    /// Bitwise equal to a from-scratch evaluation of the child tree.
    pub fitness: f64,
    /// True when evaluation stopped early and the parent's fitness was
    /// inherited.
    pub copied: bool,
    /// Ancestors recomputed above the site before stopping.
    pub ancestors_evaluated: u32,
    /// Scalar node evaluations spent, for throughput accounting.
    pub scalar_evals: u64,
}

/// Incremental child fitness against a cached per-node value table of the
/// parent (as produced by [`eval_all_nodes`]).
///
/// Evaluates the replacement subtree, then walks the root path upward
/// recomputing each ancestor from one changed and one cached operand
/// vector. The walk stops the moment a recomputed vector matches the
/// parent's cached vector bitwise: from there on the child and parent
/// evaluations coincide, so the parent's fitness is the child's.
pub fn incremental_child_fitness(
    parent: &Individual,
    parent_values: &[ValueVector],
    site: NodeId,
    new_subtree: &ExprTree,
    suite: &TestSuite,
) -> ShortcutEval {
    let tree = &parent.tree;
    assert!(tree.contains(site), "site out of range");
    let cases = suite.len() as u64;

    let mut current = eval_tree(new_subtree, suite);
    let mut scalar_evals = new_subtree.len() as u64 * cases;
    if values_bitwise_eq(&current, &parent_values[site.index()]) {
        return ShortcutEval {
            fitness: parent.fitness,
            copied: true,
            ancestors_evaluated: 0,
            scalar_evals,
        };
    }

    let parents = tree.parents();
    let mut ancestors_evaluated = 0u32;
    let mut node = site;
    while let Some(parent_id) = parents[node.index()] {
        let Node::Op { kind, left, right } = tree.node(parent_id) else {
            unreachable!("parents are operator nodes");
        };
        current = if left == node {
            apply_elementwise(kind, &current, &parent_values[right.index()])
        } else {
            apply_elementwise(kind, &parent_values[left.index()], &current)
        };
        ancestors_evaluated += 1;
        scalar_evals += cases;
        if values_bitwise_eq(&current, &parent_values[parent_id.index()]) {
            return ShortcutEval {
                fitness: parent.fitness,
                copied: true,
                ancestors_evaluated,
                scalar_evals,
            };
        }
        node = parent_id;
    }

    ShortcutEval {
        fitness: fitness_of_values(&current, suite),
        copied: false,
        ancestors_evaluated,
        scalar_evals,
    }
}

/// Incremental child fitness with no cached table: the parent's root-path
/// values are recomputed on the fly from the site upward, evaluating each
/// sibling subtree once. Memory stays O(height x cases) however large the
/// parent grows, which is what makes the shortcut viable in
/// unlimited-growth runs.
///
/// Bitwise-equivalent to [`incremental_child_fitness`] and to full
/// evaluation of the child tree.
pub fn incremental_child_fitness_recompute(
    parent_tree: &ExprTree,
    parent_fitness: f64,
    site: NodeId,
    new_subtree: &ExprTree,
    suite: &TestSuite,
) -> ShortcutEval {
    assert!(parent_tree.contains(site), "site out of range");
    let cases = suite.len() as u64;

    let mut old = eval_subtree(parent_tree, site, suite);
    let mut new = eval_tree(new_subtree, suite);
    let mut scalar_evals =
        (parent_tree.subtree_size(site) as u64 + new_subtree.len() as u64) * cases;
    let mut ancestors_evaluated = 0u32;

    if values_bitwise_eq(&new, &old) {
        return ShortcutEval {
            fitness: parent_fitness,
            copied: true,
            ancestors_evaluated,
            scalar_evals,
        };
    }

    let parents = parent_tree.parents();
    let mut node = site;
    while let Some(parent_id) = parents[node.index()] {
        let Node::Op { kind, left, right } = parent_tree.node(parent_id) else {
            unreachable!("parents are operator nodes");
        };
        let sibling = if left == node { right } else { left };
        let sib = eval_subtree(parent_tree, sibling, suite);
        scalar_evals += parent_tree.subtree_size(sibling) as u64 * cases;
        if left == node {
            old = apply_elementwise(kind, &old, &sib);
            new = apply_elementwise(kind, &new, &sib);
        } else {
            old = apply_elementwise(kind, &sib, &old);
            new = apply_elementwise(kind, &sib, &new);
        }
        ancestors_evaluated += 1;
        scalar_evals += 2 * cases;
        if values_bitwise_eq(&new, &old) {
            return ShortcutEval {
                fitness: parent_fitness,
                copied: true,
                ancestors_evaluated,
                scalar_evals,
            };
        }
        node = parent_id;
    }

    ShortcutEval {
        fitness: fitness_of_values(&new, suite),
        copied: false,
        ancestors_evaluated,
        scalar_evals,
    }
}

// ---------------------------------------------------------------------------
// Failed-disruption-propagation statistics
// ---------------------------------------------------------------------------

/// Silence counts for one depth bin.
#[derive(Clone, Debug, PartialEq)]
pub struct FdpBinStats {
    pub bin: DepthBin,
    pub trials: u64,
    /// Mutations whose child fitness was bitwise equal to the parent's.
    pub silent: u64,
    /// Mutations silent under the secondary tolerance criterion.
    pub silent_tol: u64,
}

impl FdpBinStats {
    pub fn silent_fraction(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.silent as f64 / self.trials as f64
        }
    }

    pub fn silent_tol_fraction(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.silent_tol as f64 / self.trials as f64
        }
    }
}

#[derive(Clone, Debug)]
pub struct FdpStats {
    pub bins: Vec<FdpBinStats>,
}

impl FdpStats {
    pub fn bin_for(&self, lo: u32) -> Option<&FdpBinStats> {
        self.bins.iter().find(|b| b.bin.lo == lo)
    }
}

/// Sample mutation sites uniformly within each depth bin across the
/// population, mutate there, and count how often the child's fitness is
/// unchanged.
///
/// All random draws happen sequentially up front; the trials themselves
/// are evaluated in parallel, so results do not depend on worker count.
/// Bins with no available sites report `trials = 0`.
pub fn fdp_statistics(
    pop: &[Individual],
    suite: &TestSuite,
    trials_per_bin: u64,
    bins: &[DepthBin],
    rng: &mut impl Rng,
) -> FdpStats {
    // Sites grouped by bin, over the whole population.
    let mut sites_by_bin: Vec<Vec<(usize, NodeId)>> = vec![Vec::new(); bins.len()];
    for (ind_idx, ind) in pop.iter().enumerate() {
        for (node_idx, depth) in ind.tree.depths().iter().enumerate() {
            if let Some(bin_idx) = bins.iter().position(|b| b.contains(*depth)) {
                sites_by_bin[bin_idx].push((ind_idx, NodeId(node_idx as u32)));
            }
        }
    }

    struct Trial {
        bin_idx: usize,
        ind_idx: usize,
        site: NodeId,
        replacement: ExprTree,
    }

    let mut trials = Vec::new();
    for (bin_idx, sites) in sites_by_bin.iter().enumerate() {
        if sites.is_empty() {
            continue;
        }
        for _ in 0..trials_per_bin {
            let (ind_idx, site) = sites[rng.gen_range(0..sites.len())];
            let replacement = random_tree(GenMethod::Grow, MUTATION_SUBTREE_HEIGHT, rng);
            trials.push(Trial { bin_idx, ind_idx, site, replacement });
        }
    }

    let outcomes: Vec<(usize, bool, bool)> = trials
        .par_iter()
        .map(|t| {
            let parent = &pop[t.ind_idx];
            let eval = incremental_child_fitness_recompute(
                &parent.tree,
                parent.fitness,
                t.site,
                &t.replacement,
                suite,
            );
            let silent = eval.fitness.to_bits() == parent.fitness.to_bits();
            let silent_tol = silent || (eval.fitness - parent.fitness).abs() <= SILENT_ABS_TOL;
            (t.bin_idx, silent, silent_tol)
        })
        .collect();

    let mut stats: Vec<FdpBinStats> = bins
        .iter()
        .map(|&bin| FdpBinStats { bin, trials: 0, silent: 0, silent_tol: 0 })
        .collect();
    for (bin_idx, silent, silent_tol) in outcomes {
        let s = &mut stats[bin_idx];
        s.trials += 1;
        s.silent += silent as u64;
        s.silent_tol += silent_tol as u64;
    }
    FdpStats { bins: stats }
}
