//! Random tree generation.

use rand::Rng;

use crate::tree::{ExprTree, Node, NodeId, OpKind};

/// The engine's RNG. ChaCha gives the same stream on every platform, which
/// keeps seeded runs byte-reproducible.
pub type GpRng = rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GenMethod {
    /// Terminals may appear at any level; height varies in [1, max_height].
    Grow,
    /// Every leaf sits at exactly max_height.
    Full,
}

/// Terminal set configuration. `register_count` 0 is the plain regression
/// set `{x, constant}`; organisms extend it with register reads.
#[derive(Clone, Copy, Debug)]
pub struct TerminalSet {
    pub register_count: u16,
}

impl TerminalSet {
    pub const PLAIN: TerminalSet = TerminalSet { register_count: 0 };

    pub fn with_registers(register_count: u16) -> TerminalSet {
        TerminalSet { register_count }
    }

    fn sample(&self, rng: &mut impl Rng) -> Node {
        if self.register_count == 0 {
            if rng.gen_bool(0.5) {
                Node::Var
            } else {
                Node::Const(rng.gen_range(-1.0..=1.0))
            }
        } else {
            match rng.gen_range(0u8..3) {
                0 => Node::Var,
                1 => Node::Const(rng.gen_range(-1.0..=1.0)),
                _ => Node::Reg(rng.gen_range(0..self.register_count)),
            }
        }
    }
}

fn random_op(rng: &mut impl Rng) -> OpKind {
    OpKind::ALL[rng.gen_range(0..OpKind::ALL.len())]
}

// With four operators and two plain terminals, growing picks a terminal
// with probability |T| / (|T| + |F|) = 1/3 before the height cap.
const GROW_TERMINAL_PROB: f64 = 1.0 / 3.0;

/// Generate a random tree with the plain terminal set. `height(result) <=
/// max_height`; `Full` puts every leaf at exactly `max_height`. Constants
/// are drawn uniformly from [-1, 1] and frozen.
///
/// Panics if `max_height < 1`.
pub fn random_tree(method: GenMethod, max_height: u32, rng: &mut impl Rng) -> ExprTree {
    random_tree_with(method, max_height, TerminalSet::PLAIN, rng)
}

/// As [`random_tree`] with an explicit terminal set.
pub fn random_tree_with(
    method: GenMethod,
    max_height: u32,
    terminals: TerminalSet,
    rng: &mut impl Rng,
) -> ExprTree {
    assert!(max_height >= 1, "max_height must be >= 1");
    let mut nodes = Vec::new();
    build(method, max_height, terminals, rng, &mut nodes);
    debug_assert!(ExprTree::from_nodes(nodes.clone()).is_ok());
    ExprTree::from_nodes(nodes).expect("generator emits valid preorder arenas")
}

// Emits the subtree in preorder and returns nothing; levels_left counts the
// node levels still available including the one being emitted.
fn build(
    method: GenMethod,
    levels_left: u32,
    terminals: TerminalSet,
    rng: &mut impl Rng,
    out: &mut Vec<Node>,
) {
    let make_leaf = if levels_left == 1 {
        true
    } else {
        match method {
            GenMethod::Full => false,
            GenMethod::Grow => rng.gen_bool(GROW_TERMINAL_PROB),
        }
    };
    if make_leaf {
        out.push(terminals.sample(rng));
        return;
    }
    let slot = out.len();
    out.push(Node::Var); // placeholder, fixed up below
    let kind = random_op(rng);
    let left = NodeId(out.len() as u32);
    build(method, levels_left - 1, terminals, rng, out);
    let right = NodeId(out.len() as u32);
    build(method, levels_left - 1, terminals, rng, out);
    out[slot] = Node::Op { kind, left, right };
}
