//! Tree evaluation over a test suite.
//!
//! Evaluation is pure, deterministic and double precision; non-finite
//! intermediates propagate unclamped. All walks are iterative over the
//! preorder arena, so arbitrarily deep evolved trees evaluate without
//! recursion. Because children follow their parents in the arena, a single
//! reverse pass computes every node from its already-computed operands.

use crate::suite::{TestSuite, ValueVector};
use crate::tree::{ExprTree, Node, NodeId};

/// Per-case register bank: `bank[r][case]` is register `r`'s value.
pub type RegisterBank = Vec<ValueVector>;

/// Evaluate the span of `nodes` starting at `base` for a single case,
/// leaving every node's value in `scratch` (indexed relative to `base`).
/// Returns the span root's value. Registers read from `regs` when given,
/// else 0.0 (the register file's initial state).
#[inline]
pub(crate) fn eval_span_case(
    nodes: &[Node],
    base: usize,
    span: usize,
    x: f64,
    regs: Option<(&RegisterBank, usize)>,
    scratch: &mut [f64],
) -> f64 {
    for i in (0..span).rev() {
        scratch[i] = match nodes[base + i] {
            Node::Var => x,
            Node::Const(c) => c,
            Node::Reg(r) => match regs {
                Some((bank, case)) => bank[r as usize][case],
                None => 0.0,
            },
            Node::Op { kind, left, right } => {
                let a = scratch[left.index() - base];
                let b = scratch[right.index() - base];
                kind.apply(a, b)
            }
        };
    }
    scratch[0]
}

/// Root output per test case.
pub fn eval_tree(tree: &ExprTree, suite: &TestSuite) -> ValueVector {
    let mut scratch = vec![0.0; tree.len()];
    suite
        .cases()
        .iter()
        .map(|c| eval_span_case(tree.nodes(), 0, tree.len(), c.x, None, &mut scratch))
        .collect()
}

/// Output of the subtree rooted at `site`, evaluated standalone (registers
/// read as 0.0).
pub fn eval_subtree(tree: &ExprTree, site: NodeId, suite: &TestSuite) -> ValueVector {
    eval_subtree_with_regs(tree, site, suite, None)
}

pub(crate) fn eval_subtree_with_regs(
    tree: &ExprTree,
    site: NodeId,
    suite: &TestSuite,
    regs: Option<&RegisterBank>,
) -> ValueVector {
    let span = tree.subtree_size(site);
    let mut scratch = vec![0.0; span];
    suite
        .cases()
        .iter()
        .enumerate()
        .map(|(case, c)| {
            eval_span_case(
                tree.nodes(),
                site.index(),
                span,
                c.x,
                regs.map(|bank| (bank, case)),
                &mut scratch,
            )
        })
        .collect()
}

/// One value vector per node, indexed by `NodeId`. The root's entry is
/// bitwise identical to [`eval_tree`]'s result.
pub fn eval_all_nodes(tree: &ExprTree, suite: &TestSuite) -> Vec<ValueVector> {
    let n = tree.len();
    let mut table = vec![Vec::with_capacity(suite.len()); n];
    let mut scratch = vec![0.0; n];
    for c in suite.cases() {
        eval_span_case(tree.nodes(), 0, n, c.x, None, &mut scratch);
        for (entry, v) in table.iter_mut().zip(&scratch) {
            entry.push(*v);
        }
    }
    table
}

/// Sum of absolute errors against the suite targets; lower is better. Any
/// non-finite output makes the program maximally unfit.
pub fn fitness_of_values(values: &[f64], suite: &TestSuite) -> f64 {
    debug_assert_eq!(values.len(), suite.len());
    let mut sum = 0.0;
    for (v, c) in values.iter().zip(suite.cases()) {
        if !v.is_finite() {
            return f64::INFINITY;
        }
        sum += (v - c.target).abs();
    }
    sum
}

/// Evaluate and score a tree in one step.
pub fn fitness(tree: &ExprTree, suite: &TestSuite) -> f64 {
    let mut scratch = vec![0.0; tree.len()];
    let mut sum = 0.0;
    for c in suite.cases() {
        let v = eval_span_case(tree.nodes(), 0, tree.len(), c.x, None, &mut scratch);
        if !v.is_finite() {
            return f64::INFINITY;
        }
        sum += (v - c.target).abs();
    }
    sum
}

/// True when every case's absolute error is below `hit_threshold`.
pub fn is_fit(values: &[f64], suite: &TestSuite, hit_threshold: f64) -> bool {
    values
        .iter()
        .zip(suite.cases())
        .all(|(v, c)| (v - c.target).abs() < hit_threshold)
}

/// Bitwise equality of two value vectors.
#[inline]
pub fn values_bitwise_eq(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Number of positions whose values differ bitwise.
#[inline]
pub fn count_bitwise_diffs(a: &[f64], b: &[f64]) -> usize {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .filter(|(x, y)| x.to_bits() != y.to_bits())
        .count()
}
