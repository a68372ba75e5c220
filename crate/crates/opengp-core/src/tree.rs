//! Arena-backed expression trees over the floating-point regression
//! function set `{+, -, *, pdiv}`.
//!
//! Trees are immutable values: every structural operation returns a new
//! tree. The arena is laid out in preorder — node 0 is the root, every
//! subtree occupies a contiguous index range, and children always follow
//! their parent. Evaluation and structural edits rely on this layout.

use thiserror::Error;

/// Denominators at or below this magnitude trigger the protected-division
/// rule: `pdiv(a, b) = 1.0`.
pub const PDIV_THRESHOLD: f64 = 1e-9;

/// The binary operators. All have arity 2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpKind {
    Add,
    Sub,
    Mul,
    /// Protected division: returns 1.0 when `|denominator| <= PDIV_THRESHOLD`.
    PDiv,
}

impl OpKind {
    pub const ALL: [OpKind; 4] = [OpKind::Add, OpKind::Sub, OpKind::Mul, OpKind::PDiv];

    /// Apply the operator to a pair of operands in double precision.
    /// Non-finite results propagate; nothing is clamped.
    #[inline(always)]
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            OpKind::Add => a + b,
            OpKind::Sub => a - b,
            OpKind::Mul => a * b,
            OpKind::PDiv => {
                if b.abs() <= PDIV_THRESHOLD {
                    1.0
                } else {
                    a / b
                }
            }
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            OpKind::Add => "+",
            OpKind::Sub => "-",
            OpKind::Mul => "*",
            OpKind::PDiv => "pdiv",
        }
    }
}

/// Dense index of a node within one tree's arena. Node 0 is always the root.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

impl NodeId {
    pub const ROOT: NodeId = NodeId(0);

    #[inline(always)]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// One arena slot: an internal operator node or a terminal.
///
/// `Reg` terminals read a shared register and only occur inside organism
/// member trees; a plain tree evaluated outside an organism reads every
/// register as 0.0 (the register file's initial state).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Node {
    Op { kind: OpKind, left: NodeId, right: NodeId },
    Var,
    Const(f64),
    Reg(u16),
}

impl Node {
    #[inline]
    pub fn is_leaf(&self) -> bool {
        !matches!(self, Node::Op { .. })
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("node id {id} out of range for tree of {size} nodes")]
    InvalidNode { id: u32, size: usize },
    #[error("malformed arena: {0}")]
    Malformed(String),
}

/// An immutable expression tree. See the module docs for the arena layout
/// invariants.
#[derive(Clone, Debug, PartialEq)]
pub struct ExprTree {
    nodes: Vec<Node>,
}

impl ExprTree {
    /// Wrap a raw arena, validating the preorder layout.
    pub fn from_nodes(nodes: Vec<Node>) -> Result<ExprTree, TreeError> {
        let tree = ExprTree { nodes };
        tree.validate()?;
        Ok(tree)
    }

    pub fn leaf_var() -> ExprTree {
        ExprTree { nodes: vec![Node::Var] }
    }

    pub fn leaf_const(value: f64) -> ExprTree {
        ExprTree { nodes: vec![Node::Const(value)] }
    }

    pub fn leaf_reg(register: u16) -> ExprTree {
        ExprTree { nodes: vec![Node::Reg(register)] }
    }

    /// Build `(op left right)` by concatenating the operand arenas.
    pub fn join(kind: OpKind, left: ExprTree, right: ExprTree) -> ExprTree {
        let left_len = left.len();
        let mut nodes = Vec::with_capacity(1 + left_len + right.len());
        nodes.push(Node::Op {
            kind,
            left: NodeId(1),
            right: NodeId(1 + left_len as u32),
        });
        nodes.extend(left.nodes.into_iter().map(|n| shift_node(n, 1)));
        nodes.extend(
            right
                .nodes
                .into_iter()
                .map(|n| shift_node(n, 1 + left_len as u32)),
        );
        ExprTree { nodes }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false // a valid tree always has at least its root
    }

    #[inline]
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    #[inline]
    pub fn node(&self, id: NodeId) -> Node {
        self.nodes[id.index()]
    }

    #[inline]
    pub fn contains(&self, id: NodeId) -> bool {
        id.index() < self.nodes.len()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len() as u32).map(NodeId)
    }

    /// Ids of internal (operator) nodes, ascending.
    pub fn internal_ids(&self) -> Vec<NodeId> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| !n.is_leaf())
            .map(|(i, _)| NodeId(i as u32))
            .collect()
    }

    /// Ids of terminal nodes, ascending.
    pub fn leaf_ids(&self) -> Vec<NodeId> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.is_leaf())
            .map(|(i, _)| NodeId(i as u32))
            .collect()
    }

    /// Number of nodes in the subtree rooted at `id`.
    pub fn subtree_size(&self, id: NodeId) -> usize {
        debug_assert!(self.contains(id));
        // Preorder contiguity: scan forward counting outstanding children.
        let mut pending = 1usize;
        let mut i = id.index();
        while pending > 0 {
            if !self.nodes[i].is_leaf() {
                pending += 2;
            }
            pending -= 1;
            i += 1;
        }
        i - id.index()
    }

    /// Copy of the subtree rooted at `id`, rebased to its own arena.
    pub fn subtree_at(&self, id: NodeId) -> Result<ExprTree, TreeError> {
        if !self.contains(id) {
            return Err(TreeError::InvalidNode { id: id.0, size: self.len() });
        }
        let span = self.subtree_size(id);
        let base = id.index() as u32;
        let nodes = self.nodes[id.index()..id.index() + span]
            .iter()
            .map(|n| unshift_node(*n, base))
            .collect();
        Ok(ExprTree { nodes })
    }

    /// New tree with the subtree at `id` replaced by `sub`. The receiver is
    /// unchanged. `size(result) = size(self) - size(subtree_at(id)) + size(sub)`.
    pub fn replace_subtree(&self, id: NodeId, sub: &ExprTree) -> Result<ExprTree, TreeError> {
        if !self.contains(id) {
            return Err(TreeError::InvalidNode { id: id.0, size: self.len() });
        }
        let site = id.index();
        let old_len = self.subtree_size(id);
        let new_len = sub.len();
        let tail = site + old_len;
        let delta = new_len as i64 - old_len as i64;

        let mut nodes = Vec::with_capacity(self.len() - old_len + new_len);
        for n in &self.nodes[..site] {
            nodes.push(match *n {
                Node::Op { kind, left, right } => Node::Op {
                    kind,
                    left: remap_prefix_child(left, site, tail, delta),
                    right: remap_prefix_child(right, site, tail, delta),
                },
                leaf => leaf,
            });
        }
        nodes.extend(sub.nodes.iter().map(|n| shift_node(*n, site as u32)));
        for n in &self.nodes[tail..] {
            nodes.push(match *n {
                Node::Op { kind, left, right } => Node::Op {
                    kind,
                    left: NodeId((left.0 as i64 + delta) as u32),
                    right: NodeId((right.0 as i64 + delta) as u32),
                },
                leaf => leaf,
            });
        }
        Ok(ExprTree { nodes })
    }

    /// Depth of each node, root = 1, child = parent + 1.
    pub fn depths(&self) -> Vec<u32> {
        let mut depths = vec![0u32; self.len()];
        depths[0] = 1;
        for (i, n) in self.nodes.iter().enumerate() {
            if let Node::Op { left, right, .. } = n {
                let d = depths[i] + 1;
                depths[left.index()] = d;
                depths[right.index()] = d;
            }
        }
        depths
    }

    /// Height of each subtree, counted in nodes: a terminal has height 1.
    pub fn subtree_heights(&self) -> Vec<u32> {
        let mut heights = vec![1u32; self.len()];
        for i in (0..self.len()).rev() {
            if let Node::Op { left, right, .. } = self.nodes[i] {
                heights[i] = 1 + heights[left.index()].max(heights[right.index()]);
            }
        }
        heights
    }

    /// Node count on the longest root-to-leaf path; a lone terminal has
    /// height 1.
    pub fn height(&self) -> u32 {
        self.subtree_heights()[0]
    }

    /// Parent of each node; the root has none.
    pub fn parents(&self) -> Vec<Option<NodeId>> {
        let mut parents = vec![None; self.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            if let Node::Op { left, right, .. } = n {
                parents[left.index()] = Some(NodeId(i as u32));
                parents[right.index()] = Some(NodeId(i as u32));
            }
        }
        parents
    }

    /// Largest register index referenced anywhere in the tree.
    pub fn max_register(&self) -> Option<u16> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Reg(r) => Some(*r),
                _ => None,
            })
            .max()
    }

    /// Check the arena invariants: a single rooted binary tree in preorder
    /// layout with contiguous subtrees and no sharing.
    pub fn validate(&self) -> Result<(), TreeError> {
        if self.nodes.is_empty() {
            return Err(TreeError::Malformed("empty arena".into()));
        }
        // Walk the spans iteratively; expected is the index each pending
        // subtree root must sit at.
        let mut stack: Vec<u32> = Vec::new();
        let mut expected = 0u32;
        loop {
            let i = expected as usize;
            if i >= self.len() {
                return Err(TreeError::Malformed(format!(
                    "child index {expected} out of range"
                )));
            }
            match self.nodes[i] {
                Node::Op { left, right, .. } => {
                    if left.0 != expected + 1 {
                        return Err(TreeError::Malformed(format!(
                            "node {i}: left child {} is not adjacent",
                            left.0
                        )));
                    }
                    stack.push(right.0);
                    expected += 1;
                }
                _ => match stack.pop() {
                    Some(right) => {
                        if right != expected + 1 {
                            return Err(TreeError::Malformed(format!(
                                "right child {right} does not follow its left sibling span"
                            )));
                        }
                        expected += 1;
                    }
                    None => break,
                },
            }
        }
        if expected as usize + 1 != self.len() {
            return Err(TreeError::Malformed(format!(
                "arena has {} nodes but the root spans {}",
                self.len(),
                expected + 1
            )));
        }
        Ok(())
    }

    /// Size and per-node depths in one pass.
    pub fn metrics(&self) -> TreeMetrics {
        TreeMetrics {
            size: self.len(),
            height: self.height(),
            depths: self.depths(),
        }
    }
}

/// Structural metrics of one tree.
#[derive(Clone, Debug)]
pub struct TreeMetrics {
    pub size: usize,
    pub height: u32,
    depths: Vec<u32>,
}

impl TreeMetrics {
    /// Depth of a node; the root has depth 1.
    pub fn depth_of(&self, id: NodeId) -> u32 {
        self.depths[id.index()]
    }

    pub fn depths(&self) -> &[u32] {
        &self.depths
    }
}

#[inline]
fn shift_node(n: Node, delta: u32) -> Node {
    match n {
        Node::Op { kind, left, right } => Node::Op {
            kind,
            left: NodeId(left.0 + delta),
            right: NodeId(right.0 + delta),
        },
        leaf => leaf,
    }
}

#[inline]
fn unshift_node(n: Node, delta: u32) -> Node {
    match n {
        Node::Op { kind, left, right } => Node::Op {
            kind,
            left: NodeId(left.0 - delta),
            right: NodeId(right.0 - delta),
        },
        leaf => leaf,
    }
}

#[inline]
fn remap_prefix_child(child: NodeId, site: usize, tail: usize, delta: i64) -> NodeId {
    let c = child.index();
    if c < site {
        child
    } else if c == site {
        // The replaced subtree's root keeps its position.
        child
    } else {
        debug_assert!(c >= tail, "prefix node points inside a replaced span");
        NodeId((c as i64 + delta) as u32)
    }
}
