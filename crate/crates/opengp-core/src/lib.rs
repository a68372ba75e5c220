//! A genetic-programming engine built around one observation: in deep
//! evolved arithmetic trees, most changes die out on the way to the root.
//!
//! The crate provides
//!
//! * [`tree`], [`sexpr`], [`suite`], [`eval`]: arena expression trees over
//!   `{+, -, *, pdiv}`, their text format, and fast deterministic
//!   evaluation against a fitness suite;
//! * [`engine`]: a seeded generational GP loop with tournament selection
//!   and subtree operators, whose child evaluation can take the
//!   fitness-copy shortcut;
//! * [`analysis`]: per-node entropy accounting, disruption injection and
//!   propagation traces, silence statistics by mutation depth, and the
//!   incremental evaluator itself;
//! * [`organism`]: an alternative layout where many depth-capped member
//!   programs communicate through a shared register file, keeping every
//!   mutation site close to the output.
//!
//! Everything observable is a pure function of explicit seeds; runs
//! reproduce bit for bit whatever the evaluation worker count.

pub mod analysis;
pub mod engine;
pub mod eval;
pub mod organism;
pub mod random;
pub mod sexpr;
pub mod stats;
pub mod suite;
pub mod tree;

pub use analysis::{
    entropy_report, fdp_statistics, incremental_child_fitness,
    incremental_child_fitness_recompute, inject_disruption, value_entropy, EntropyReport,
    FdpBinStats, FdpStats, Perturbation, PropagationTrace, ShortcutEval,
};
pub use engine::{
    evolve_generation, init_population, run, subtree_crossover, subtree_mutation,
    tournament_select, CrossoverInfo, GenStats, GpParams, Individual, MutationInfo, ParamError,
    Population, RunStats,
};
pub use eval::{eval_all_nodes, eval_subtree, eval_tree, fitness, fitness_of_values, is_fit};
pub use organism::{
    eval_organism, fdp_open_statistics, member_crossover, member_mutation, organism_fitness,
    organism_from_text, organism_to_text, run_open, site_distance_to_environment, Member,
    MemberOpDetail, OpenGenStats, OpenRunStats, OrgIndividual, Organism, OrganismParams,
};
pub use random::{random_tree, random_tree_with, GenMethod, GpRng, TerminalSet};
pub use sexpr::{from_sexpr, to_sexpr, ParseError};
pub use stats::{summarize_heights, BinTally, DepthBin, HeightSummary};
pub use suite::{sextic_target, SuiteError, TestCase, TestSuite, ValueVector};
pub use tree::{ExprTree, Node, NodeId, OpKind, TreeError, PDIV_THRESHOLD};
