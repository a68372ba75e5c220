//! Organisms: many depth-capped member programs wired through a shared
//! register file.
//!
//! Members execute in list order. Member `j` evaluates its tree per test
//! case against the input `x` and the current register values, then
//! overwrites its write register with its output vector. Register
//! transfer is verbatim — the channel itself never changes a bit — so a
//! member's output is exactly what every downstream reader sees, and the
//! organism's output is whatever ends up in the output register.
//!
//! Genetic operators act on single members, which keeps every mutation
//! site within `depth_cap` levels of the register fabric.

use rand::Rng;
use rand::SeedableRng;
use rayon::prelude::*;
use thiserror::Error;

use crate::analysis::{FdpBinStats, FdpStats, MUTATION_SUBTREE_HEIGHT, SILENT_ABS_TOL};
use crate::engine::{
    init_trees, pick_site_biased, subtree_mutation_with, GpParams, ParamError, OPERATOR_ATTEMPTS,
};
use crate::eval::{
    eval_span_case, eval_subtree_with_regs, fitness_of_values, values_bitwise_eq, RegisterBank,
};
use crate::random::{random_tree_with, GenMethod, GpRng, TerminalSet};
use crate::sexpr::{from_sexpr, to_sexpr, ParseError};
use crate::stats::{summarize_heights, BinTally, DepthBin, HeightSummary};
use crate::suite::{TestSuite, ValueVector};
use crate::tree::{ExprTree, Node, NodeId, TreeError};

/// Shape of an organism: member count, per-member depth cap, register
/// file size and which register is the output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OrganismParams {
    pub member_count: usize,
    /// Maximum member height in levels. The intended operating range is
    /// 10..=100; values outside it validate with a warning.
    pub depth_cap: u32,
    pub register_count: u16,
    pub output_register: u16,
}

impl OrganismParams {
    /// Hard errors for impossible shapes; warnings for unusual but legal
    /// ones.
    pub fn validate(&self) -> Result<Vec<String>, ParamError> {
        if self.member_count < 1 {
            return Err(ParamError { field: "member_count", message: "must be at least 1".into() });
        }
        if self.depth_cap < 1 {
            return Err(ParamError { field: "depth_cap", message: "must be at least 1".into() });
        }
        if self.register_count < 1 {
            return Err(ParamError { field: "register_count", message: "must be at least 1".into() });
        }
        if self.output_register >= self.register_count {
            return Err(ParamError {
                field: "output_register",
                message: format!("must be < register_count ({})", self.register_count),
            });
        }
        let mut warnings = Vec::new();
        if !(10..=100).contains(&self.depth_cap) {
            warnings.push(format!(
                "depth_cap {} is outside the intended 10..=100 range",
                self.depth_cap
            ));
        }
        Ok(warnings)
    }
}

/// One member program and the register it writes.
#[derive(Clone, Debug, PartialEq)]
pub struct Member {
    pub tree: ExprTree,
    pub write_register: u16,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Organism {
    pub members: Vec<Member>,
    pub params: OrganismParams,
}

#[derive(Debug, Error, PartialEq)]
pub enum OrgError {
    #[error("organisms have mismatched parameters")]
    ParamsMismatch,
    #[error("member index {index} out of range ({count} members)")]
    InvalidMember { index: usize, count: usize },
    #[error("organism violates its invariants: {0}")]
    Invalid(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

impl Organism {
    /// A single-member organism computing exactly `tree`; the reduction
    /// case used to compare against monolithic evaluation.
    pub fn wrap_tree(tree: ExprTree) -> Organism {
        let params = OrganismParams {
            member_count: 1,
            depth_cap: tree.height().max(1),
            register_count: 1,
            output_register: 0,
        };
        Organism { members: vec![Member { tree, write_register: 0 }], params }
    }

    pub fn total_nodes(&self) -> usize {
        self.members.iter().map(|m| m.tree.len()).sum()
    }

    pub fn member_heights(&self) -> Vec<u32> {
        self.members.iter().map(|m| m.tree.height()).collect()
    }

    /// Check the structural invariants: member count, height caps, and
    /// register indices.
    pub fn check(&self) -> Result<(), OrgError> {
        if self.members.len() != self.params.member_count {
            return Err(OrgError::Invalid(format!(
                "{} members but member_count is {}",
                self.members.len(),
                self.params.member_count
            )));
        }
        for (j, m) in self.members.iter().enumerate() {
            if m.tree.height() > self.params.depth_cap {
                return Err(OrgError::Invalid(format!(
                    "member {j} has height {} above the cap {}",
                    m.tree.height(),
                    self.params.depth_cap
                )));
            }
            if m.write_register >= self.params.register_count {
                return Err(OrgError::Invalid(format!(
                    "member {j} writes register {} of {}",
                    m.write_register, self.params.register_count
                )));
            }
            if let Some(r) = m.tree.max_register() {
                if r >= self.params.register_count {
                    return Err(OrgError::Invalid(format!(
                        "member {j} reads register {r} of {}",
                        self.params.register_count
                    )));
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

fn fresh_bank(params: &OrganismParams, cases: usize) -> RegisterBank {
    vec![vec![0.0; cases]; params.register_count as usize]
}

fn eval_member_into(
    tree: &ExprTree,
    suite: &TestSuite,
    bank: &RegisterBank,
    scratch: &mut Vec<f64>,
) -> ValueVector {
    scratch.resize(tree.len(), 0.0);
    suite
        .cases()
        .iter()
        .enumerate()
        .map(|(case, c)| eval_span_case(tree.nodes(), 0, tree.len(), c.x, Some((bank, case)), scratch))
        .collect()
}

/// Execute the members in order over a zero-initialized register file and
/// return the output register's final vector.
pub fn eval_organism(org: &Organism, suite: &TestSuite) -> ValueVector {
    let mut bank = fresh_bank(&org.params, suite.len());
    let mut scratch = Vec::new();
    for member in &org.members {
        let out = eval_member_into(&member.tree, suite, &bank, &mut scratch);
        bank[member.write_register as usize] = out;
    }
    bank.swap_remove(org.params.output_register as usize)
}

/// Each member's output vector in execution order — the exact values its
/// register write makes visible downstream.
pub fn eval_member_outputs(org: &Organism, suite: &TestSuite) -> Vec<ValueVector> {
    let mut bank = fresh_bank(&org.params, suite.len());
    let mut scratch = Vec::new();
    org.members
        .iter()
        .map(|member| {
            let out = eval_member_into(&member.tree, suite, &bank, &mut scratch);
            bank[member.write_register as usize] = out.clone();
            out
        })
        .collect()
}

/// Evaluate with member `member_idx`'s output forced to `override_out`
/// before its register write; instrumentation for disruption experiments
/// on the fabric.
pub fn eval_organism_with_override(
    org: &Organism,
    suite: &TestSuite,
    member_idx: usize,
    override_out: &[f64],
) -> ValueVector {
    assert!(member_idx < org.members.len());
    assert_eq!(override_out.len(), suite.len());
    let mut bank = fresh_bank(&org.params, suite.len());
    let mut scratch = Vec::new();
    for (j, member) in org.members.iter().enumerate() {
        let out = if j == member_idx {
            override_out.to_vec()
        } else {
            eval_member_into(&member.tree, suite, &bank, &mut scratch)
        };
        bank[member.write_register as usize] = out;
    }
    bank.swap_remove(org.params.output_register as usize)
}

/// Sum of absolute errors of the organism's output; non-finite outputs
/// score +inf, as for trees.
pub fn organism_fitness(org: &Organism, suite: &TestSuite) -> f64 {
    fitness_of_values(&eval_organism(org, suite), suite)
}

/// Depth of a node within its member tree: the number of function
/// applications between the site and the register fabric. The member root
/// is 1 level from the environment.
pub fn site_distance_to_environment(
    org: &Organism,
    member_index: usize,
    node: NodeId,
) -> Result<u32, OrgError> {
    let member = org
        .members
        .get(member_index)
        .ok_or(OrgError::InvalidMember { index: member_index, count: org.members.len() })?;
    if !member.tree.contains(node) {
        return Err(OrgError::Tree(TreeError::InvalidNode {
            id: node.0,
            size: member.tree.len(),
        }));
    }
    Ok(member.tree.depths()[node.index()])
}

// ---------------------------------------------------------------------------
// Member-level genetic operators
// ---------------------------------------------------------------------------

/// What a member-level operator did, for statistics and incremental
/// evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MemberOpDetail {
    /// A subtree of member `member` was replaced; `site` is in the old
    /// member tree's coordinates.
    Subtree { member: usize, site: NodeId },
    /// Member `member` was replaced wholesale by the donor's.
    Swap { member: usize },
}

impl MemberOpDetail {
    pub fn member(&self) -> usize {
        match self {
            MemberOpDetail::Subtree { member, .. } | MemberOpDetail::Swap { member } => *member,
        }
    }
}

/// Mutate one uniformly chosen member by subtree mutation, redrawing up to
/// the usual retry budget until the member stays within the depth cap;
/// if every attempt fails the organism is returned unchanged.
pub fn member_mutation(org: &Organism, rng: &mut impl Rng) -> (Organism, Option<MemberOpDetail>) {
    let j = rng.gen_range(0..org.members.len());
    let terminals = TerminalSet::with_registers(org.params.register_count);
    let (tree, info) = subtree_mutation_with(
        &org.members[j].tree,
        Some(org.params.depth_cap),
        terminals,
        rng,
    );
    match info {
        Some(info) => {
            let mut child = org.clone();
            child.members[j].tree = tree;
            (child, Some(MemberOpDetail::Subtree { member: j, site: info.site }))
        }
        None => (org.clone(), None),
    }
}

/// Cross two organisms at one uniformly chosen member slot: half the time
/// the whole member is taken from the donor, half the time the member
/// trees are crossed by subtree exchange under the depth cap. Register
/// wiring travels with the member.
pub fn member_crossover(
    org1: &Organism,
    org2: &Organism,
    rng: &mut impl Rng,
) -> Result<(Organism, Option<MemberOpDetail>), OrgError> {
    if org1.params != org2.params {
        return Err(OrgError::ParamsMismatch);
    }
    let j = rng.gen_range(0..org1.members.len());
    if rng.gen_bool(0.5) {
        let mut child = org1.clone();
        child.members[j] = org2.members[j].clone();
        return Ok((child, Some(MemberOpDetail::Swap { member: j })));
    }
    let a = &org1.members[j].tree;
    let b = &org2.members[j].tree;
    for _ in 0..OPERATOR_ATTEMPTS {
        let site = pick_site_biased(a, rng);
        let donor_site = pick_site_biased(b, rng);
        let sub = b.subtree_at(donor_site).expect("donor site is valid");
        let tree = a.replace_subtree(site, &sub).expect("site is valid");
        if tree.height() <= org1.params.depth_cap {
            let mut child = org1.clone();
            child.members[j].tree = tree;
            return Ok((child, Some(MemberOpDetail::Subtree { member: j, site })));
        }
    }
    Ok((org1.clone(), None))
}

// ---------------------------------------------------------------------------
// Incremental evaluation within a member
// ---------------------------------------------------------------------------

struct MemberWalk {
    /// True when the change died out before the member root: the member's
    /// output is bitwise what it was.
    absorbed: bool,
    /// The member's new output vector; present only when not absorbed.
    output: Option<ValueVector>,
    scalar_evals: u64,
}

/// Walk a subtree replacement up to the member root under the given
/// register state, comparing old and new vectors at every rung.
fn member_replacement_walk(
    old_member: &ExprTree,
    new_member: &ExprTree,
    site: NodeId,
    bank: &RegisterBank,
    suite: &TestSuite,
) -> MemberWalk {
    let cases = suite.len() as u64;
    let mut old = eval_subtree_with_regs(old_member, site, suite, Some(bank));
    let mut new = eval_subtree_with_regs(new_member, site, suite, Some(bank));
    let mut scalar_evals =
        (old_member.subtree_size(site) as u64 + new_member.subtree_size(site) as u64) * cases;
    if values_bitwise_eq(&new, &old) {
        return MemberWalk { absorbed: true, output: None, scalar_evals };
    }
    let parents = old_member.parents();
    let mut node = site;
    while let Some(parent_id) = parents[node.index()] {
        let Node::Op { kind, left, right } = old_member.node(parent_id) else {
            unreachable!("parents are operator nodes");
        };
        let sibling = if left == node { right } else { left };
        let sib = eval_subtree_with_regs(old_member, sibling, suite, Some(bank));
        scalar_evals += old_member.subtree_size(sibling) as u64 * cases + 2 * cases;
        if left == node {
            old = old.iter().zip(&sib).map(|(a, b)| kind.apply(*a, *b)).collect();
            new = new.iter().zip(&sib).map(|(a, b)| kind.apply(*a, *b)).collect();
        } else {
            old = sib.iter().zip(&old).map(|(a, b)| kind.apply(*a, *b)).collect();
            new = sib.iter().zip(&new).map(|(a, b)| kind.apply(*a, *b)).collect();
        }
        if values_bitwise_eq(&new, &old) {
            return MemberWalk { absorbed: true, output: None, scalar_evals };
        }
        node = parent_id;
    }
    MemberWalk { absorbed: false, output: Some(new), scalar_evals }
}

// ---------------------------------------------------------------------------
// The open generational loop
// ---------------------------------------------------------------------------

/// A scored organism; the fitness invariant matches [`crate::engine::Individual`].
#[derive(Clone, Debug)]
pub struct OrgIndividual {
    pub organism: Organism,
    pub fitness: f64,
    pub fitness_copied: bool,
}

/// One generation's report row for an open run.
#[derive(Clone, Debug, PartialEq)]
pub struct OpenGenStats {
    pub generation: u32,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    /// Mean total node count per organism.
    pub mean_size: f64,
    /// Members across the whole population.
    pub member_count_total: u64,
    /// Distribution of member tree heights across the population.
    pub member_heights: HeightSummary,
    pub shortcut_hits: u64,
    pub nodes_evaluated: u64,
    /// Subtree-level operations binned by site depth within the member;
    /// silent means the member's output vector was bitwise unchanged.
    pub silent_bins: Vec<BinTally>,
}

#[derive(Clone, Debug)]
pub struct OpenRunStats {
    pub bins: Vec<DepthBin>,
    pub rows: Vec<OpenGenStats>,
}

fn better_org(a: &OrgIndividual, b: &OrgIndividual) -> bool {
    if a.fitness != b.fitness {
        return a.fitness < b.fitness;
    }
    a.organism.total_nodes() < b.organism.total_nodes()
}

fn tournament_select_org(pop: &[OrgIndividual], k: usize, rng: &mut impl Rng) -> usize {
    let mut winner = rng.gen_range(0..pop.len());
    for _ in 1..k {
        let challenger = rng.gen_range(0..pop.len());
        let (a, b) = (&pop[challenger], &pop[winner]);
        if better_org(a, b) || (!better_org(b, a) && challenger < winner) {
            winner = challenger;
        }
    }
    winner
}

enum OrgPlan {
    Reproduce { parent: usize },
    Vary { parent: usize, child: Organism, detail: Option<MemberOpDetail> },
}

struct OrgOutcome {
    fitness: f64,
    copied: bool,
    scalar_evals: u64,
    silent_at_depth: Option<(u32, bool)>,
}

fn evaluate_org_child(plan: &OrgPlan, pop: &[OrgIndividual], suite: &TestSuite) -> OrgOutcome {
    let (parent_idx, child, detail) = match plan {
        OrgPlan::Reproduce { parent } | OrgPlan::Vary { parent, detail: None, .. } => {
            return OrgOutcome {
                fitness: pop[*parent].fitness,
                copied: false,
                scalar_evals: 0,
                silent_at_depth: None,
            };
        }
        OrgPlan::Vary { parent, child, detail: Some(detail) } => (*parent, child, *detail),
    };
    let parent = &pop[parent_idx];
    let cases = suite.len() as u64;
    let j = detail.member();

    // Members before j are untouched, so the register state at j is the
    // parent's.
    let mut bank = fresh_bank(&child.params, suite.len());
    let mut scratch = Vec::new();
    let mut scalar_evals = 0u64;
    for member in &child.members[..j] {
        let out = eval_member_into(&member.tree, suite, &bank, &mut scratch);
        scalar_evals += member.tree.len() as u64 * cases;
        bank[member.write_register as usize] = out;
    }

    let old_tree = &parent.organism.members[j].tree;
    let new_tree = &child.members[j].tree;
    let (absorbed, new_output, site_depth) = match detail {
        MemberOpDetail::Subtree { site, .. } => {
            let walk = member_replacement_walk(old_tree, new_tree, site, &bank, suite);
            scalar_evals += walk.scalar_evals;
            (walk.absorbed, walk.output, Some(old_tree.depths()[site.index()]))
        }
        MemberOpDetail::Swap { .. } => {
            let old_out = eval_member_into(old_tree, suite, &bank, &mut scratch);
            let new_out = eval_member_into(new_tree, suite, &bank, &mut scratch);
            scalar_evals += (old_tree.len() as u64 + new_tree.len() as u64) * cases;
            let absorbed = values_bitwise_eq(&new_out, &old_out);
            (absorbed, (!absorbed).then_some(new_out), None)
        }
    };
    let silent_at_depth = site_depth.map(|d| (d, absorbed));

    if absorbed {
        // Identical member output, identical registers, identical
        // downstream execution: the parent's fitness is the child's.
        return OrgOutcome { fitness: parent.fitness, copied: true, scalar_evals, silent_at_depth };
    }

    bank[child.members[j].write_register as usize] =
        new_output.expect("non-absorbed walk yields the member output");
    for member in &child.members[j + 1..] {
        let out = eval_member_into(&member.tree, suite, &bank, &mut scratch);
        scalar_evals += member.tree.len() as u64 * cases;
        bank[member.write_register as usize] = out;
    }
    let output = &bank[child.params.output_register as usize];
    OrgOutcome {
        fitness: fitness_of_values(output, suite),
        copied: false,
        scalar_evals,
        silent_at_depth,
    }
}

fn org_population_stats(
    pop: &[OrgIndividual],
    generation: u32,
    shortcut_hits: u64,
    nodes_evaluated: u64,
    silent_bins: Vec<BinTally>,
) -> OpenGenStats {
    let n = pop.len() as f64;
    let mut best = 0;
    for i in 1..pop.len() {
        if better_org(&pop[i], &pop[best]) {
            best = i;
        }
    }
    let mean_fitness = pop.iter().map(|o| o.fitness).sum::<f64>() / n;
    let mean_size = pop.iter().map(|o| o.organism.total_nodes() as f64).sum::<f64>() / n;
    let heights: Vec<u32> = pop.iter().flat_map(|o| o.organism.member_heights()).collect();
    OpenGenStats {
        generation,
        best_fitness: pop[best].fitness,
        mean_fitness,
        mean_size,
        member_count_total: heights.len() as u64,
        member_heights: summarize_heights(&heights),
        shortcut_hits,
        nodes_evaluated,
        silent_bins,
    }
}

/// Initial population: every member slot gets a ramped half-and-half tree
/// over the register-extended terminal set, capped by the depth limit,
/// with write registers assigned round-robin.
pub fn init_organisms(
    gp: &GpParams,
    params: &OrganismParams,
    suite: &TestSuite,
    rng: &mut impl Rng,
) -> Vec<OrgIndividual> {
    let terminals = TerminalSet::with_registers(params.register_count);
    let trees = init_trees(
        gp,
        terminals,
        gp.population_size * params.member_count,
        params.depth_cap,
        rng,
    );
    let organisms: Vec<Organism> = trees
        .chunks(params.member_count)
        .map(|chunk| Organism {
            members: chunk
                .iter()
                .enumerate()
                .map(|(j, tree)| Member {
                    tree: tree.clone(),
                    write_register: (j % params.register_count as usize) as u16,
                })
                .collect(),
            params: *params,
        })
        .collect();
    organisms
        .into_par_iter()
        .map(|organism| {
            let fitness = organism_fitness(&organism, suite);
            OrgIndividual { organism, fitness, fitness_copied: false }
        })
        .collect()
}

/// The generational loop over organisms; mirrors [`crate::engine::run`]
/// with member-level operators and per-member disruption accounting.
pub fn run_open(
    gp: &GpParams,
    params: &OrganismParams,
    suite: &TestSuite,
    bins: &[DepthBin],
) -> (OpenRunStats, Vec<OrgIndividual>) {
    gp.validate().expect("validated parameters");
    params.validate().expect("validated organism parameters");
    let mut rng = GpRng::seed_from_u64(gp.seed);
    let mut pop = init_organisms(gp, params, suite, &mut rng);

    let init_evals: u64 = pop
        .iter()
        .map(|o| o.organism.total_nodes() as u64 * suite.len() as u64)
        .sum();
    let mut rows = vec![org_population_stats(
        &pop,
        0,
        0,
        init_evals,
        vec![BinTally::default(); bins.len()],
    )];

    for generation in 1..=gp.generations {
        let plans: Vec<OrgPlan> = (0..gp.population_size)
            .map(|_| {
                let roll: f64 = rng.gen();
                if roll < gp.crossover_rate {
                    let p1 = tournament_select_org(&pop, gp.tournament_size, &mut rng);
                    let p2 = tournament_select_org(&pop, gp.tournament_size, &mut rng);
                    let (child, detail) =
                        member_crossover(&pop[p1].organism, &pop[p2].organism, &mut rng)
                            .expect("population shares one parameter set");
                    OrgPlan::Vary { parent: p1, child, detail }
                } else if roll < gp.crossover_rate + gp.mutation_rate {
                    let p = tournament_select_org(&pop, gp.tournament_size, &mut rng);
                    let (child, detail) = member_mutation(&pop[p].organism, &mut rng);
                    OrgPlan::Vary { parent: p, child, detail }
                } else {
                    OrgPlan::Reproduce {
                        parent: tournament_select_org(&pop, gp.tournament_size, &mut rng),
                    }
                }
            })
            .collect();

        let outcomes: Vec<OrgOutcome> = plans
            .par_iter()
            .with_min_len(4)
            .map(|plan| {
                let mut outcome = evaluate_org_child(plan, &pop, suite);
                if !gp.shortcut_enabled && outcome.copied {
                    // Keep the silence statistics but disable inheritance:
                    // score the child from scratch. Determinism makes the
                    // two fitness paths bitwise identical.
                    outcome.copied = false;
                    if let OrgPlan::Vary { child, .. } = plan {
                        outcome.fitness = organism_fitness(child, suite);
                        outcome.scalar_evals +=
                            child.total_nodes() as u64 * suite.len() as u64;
                    }
                }
                outcome
            })
            .collect();

        let mut members = Vec::with_capacity(gp.population_size);
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
            let organism = match plan {
                OrgPlan::Reproduce { parent } => pop[parent].organism.clone(),
                OrgPlan::Vary { child, .. } => child,
            };
            members.push(OrgIndividual {
                organism,
                fitness: outcome.fitness,
                fitness_copied: outcome.copied,
            });
        }
        pop = members;
        rows.push(org_population_stats(
            &pop,
            generation,
            shortcut_hits,
            nodes_evaluated,
            tallies,
        ));
    }
    (OpenRunStats { bins: bins.to_vec(), rows }, pop)
}

// ---------------------------------------------------------------------------
// Per-member disruption statistics
// ---------------------------------------------------------------------------

/// As [`crate::analysis::fdp_statistics`], but sites live inside organism
/// members and a trial is silent when the member's own output vector is
/// bitwise unchanged — disruption is traced only to the member's output,
/// since the register fabric passes it on verbatim.
pub fn fdp_open_statistics(
    orgs: &[Organism],
    suite: &TestSuite,
    trials_per_bin: u64,
    bins: &[DepthBin],
    rng: &mut impl Rng,
) -> FdpStats {
    let mut sites_by_bin: Vec<Vec<(usize, usize, NodeId)>> = vec![Vec::new(); bins.len()];
    for (org_idx, org) in orgs.iter().enumerate() {
        for (member_idx, member) in org.members.iter().enumerate() {
            for (node_idx, depth) in member.tree.depths().iter().enumerate() {
                if let Some(bin_idx) = bins.iter().position(|b| b.contains(*depth)) {
                    sites_by_bin[bin_idx].push((org_idx, member_idx, NodeId(node_idx as u32)));
                }
            }
        }
    }

    struct Trial {
        bin_idx: usize,
        org_idx: usize,
        member_idx: usize,
        site: NodeId,
        replacement: ExprTree,
    }

    let mut trials = Vec::new();
    for (bin_idx, sites) in sites_by_bin.iter().enumerate() {
        if sites.is_empty() {
            continue;
        }
        for _ in 0..trials_per_bin {
            let (org_idx, member_idx, site) = sites[rng.gen_range(0..sites.len())];
            let terminals = TerminalSet::with_registers(orgs[org_idx].params.register_count);
            let replacement =
                random_tree_with(GenMethod::Grow, MUTATION_SUBTREE_HEIGHT, terminals, rng);
            trials.push(Trial { bin_idx, org_idx, member_idx, site, replacement });
        }
    }

    let outcomes: Vec<(usize, bool, bool)> = trials
        .par_iter()
        .map(|t| {
            let org = &orgs[t.org_idx];
            let old_tree = &org.members[t.member_idx].tree;
            let new_tree = old_tree
                .replace_subtree(t.site, &t.replacement)
                .expect("sampled site is valid");

            let mut bank = fresh_bank(&org.params, suite.len());
            let mut scratch = Vec::new();
            for member in &org.members[..t.member_idx] {
                let out = eval_member_into(&member.tree, suite, &bank, &mut scratch);
                bank[member.write_register as usize] = out;
            }
            let walk = member_replacement_walk(old_tree, &new_tree, t.site, &bank, suite);
            let silent = walk.absorbed;
            let silent_tol = silent || {
                let old_out = eval_member_into(old_tree, suite, &bank, &mut scratch);
                let new_out = walk.output.expect("non-absorbed walk yields output");
                old_out
                    .iter()
                    .zip(&new_out)
                    .all(|(a, b)| (a - b).abs() <= SILENT_ABS_TOL)
            };
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

// ---------------------------------------------------------------------------
// Text format
// ---------------------------------------------------------------------------

#[derive(Debug, Error, PartialEq)]
#[error("organism parse error on line {line}: {message}")]
pub struct OrgParseError {
    pub line: usize,
    pub message: String,
}

fn org_err<T>(line: usize, message: impl Into<String>) -> Result<T, OrgParseError> {
    Err(OrgParseError { line, message: message.into() })
}

/// Render an organism: a parameter header followed by one member line per
/// member, in execution order.
pub fn organism_to_text(org: &Organism) -> String {
    let mut out = format!(
        "organism K={} D={} M={} OUT={}\n",
        org.params.member_count,
        org.params.depth_cap,
        org.params.register_count,
        org.params.output_register
    );
    for member in &org.members {
        out.push_str(&format!("member W={} {}\n", member.write_register, to_sexpr(&member.tree)));
    }
    out
}

/// Parse the textual organism format; the result satisfies
/// [`Organism::check`].
pub fn organism_from_text(text: &str) -> Result<Organism, OrgParseError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (header_line, header) = match lines.next() {
        Some(x) => x,
        None => return org_err(1, "empty input"),
    };
    let header_no = header_line + 1;

    let mut tokens = header.split_whitespace();
    if tokens.next() != Some("organism") {
        return org_err(header_no, "expected `organism K=.. D=.. M=.. OUT=..`");
    }
    let mut k = None;
    let mut d = None;
    let mut m = None;
    let mut out_reg = None;
    for token in tokens {
        let (key, value) = token
            .split_once('=')
            .ok_or(OrgParseError { line: header_no, message: format!("bad token `{token}`") })?;
        let parsed: u64 = value
            .parse()
            .map_err(|_| OrgParseError { line: header_no, message: format!("bad value `{value}` for {key}") })?;
        match key {
            "K" => k = Some(parsed as usize),
            "D" => d = Some(parsed as u32),
            "M" => m = Some(parsed as u16),
            "OUT" => out_reg = Some(parsed as u16),
            _ => return org_err(header_no, format!("unknown header field `{key}`")),
        }
    }
    let params = OrganismParams {
        member_count: k.ok_or(OrgParseError { line: header_no, message: "missing K".into() })?,
        depth_cap: d.ok_or(OrgParseError { line: header_no, message: "missing D".into() })?,
        register_count: m.ok_or(OrgParseError { line: header_no, message: "missing M".into() })?,
        output_register: out_reg
            .ok_or(OrgParseError { line: header_no, message: "missing OUT".into() })?,
    };

    let mut members = Vec::new();
    for (line_idx, line) in lines {
        let line_no = line_idx + 1;
        let rest = line
            .trim()
            .strip_prefix("member")
            .ok_or(OrgParseError { line: line_no, message: "expected `member W=<reg> <expr>`".into() })?
            .trim_start();
        let (w_field, expr) = rest
            .split_once(char::is_whitespace)
            .ok_or(OrgParseError { line: line_no, message: "member line needs a tree".into() })?;
        let w: u16 = w_field
            .strip_prefix("W=")
            .and_then(|v| v.parse().ok())
            .ok_or(OrgParseError { line: line_no, message: format!("bad write register `{w_field}`") })?;
        let tree = from_sexpr(expr).map_err(|ParseError { pos, message }| OrgParseError {
            line: line_no,
            message: format!("at byte {pos} of the tree: {message}"),
        })?;
        members.push(Member { tree, write_register: w });
    }

    let org = Organism { members, params };
    org.check()
        .map_err(|e| OrgParseError { line: header_no, message: e.to_string() })?;
    Ok(org)
}
