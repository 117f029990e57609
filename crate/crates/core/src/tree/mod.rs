//! Decision trees over state variables, tree templates and families of
//! parameterizations.

mod export;
mod template;

use std::collections::VecDeque;

use thiserror::Error;

use crate::mdp::{ActionId, Mdp, Policy, StateId};

pub use export::{NodeDocument, TreeDocument};
pub use template::{
    full_template, subtree_template, ParamKind, ParamSet, Parameterization, PredicateSet,
    TreeTemplate,
};
pub(crate) use template::splice_template;

pub type NodeId = usize;

#[derive(Debug, Error, PartialEq)]
pub enum TreeError {
    #[error("tree has no nodes")]
    Empty,
    #[error("node {0} referenced but not defined")]
    MissingNode(NodeId),
    #[error("node {0} is reachable along two paths or forms a cycle")]
    NotATree(NodeId),
    #[error("node {0} is not reachable from the root")]
    Orphan(NodeId),
    #[error("node {node} tests variable {var}, model has {count}")]
    BadVariable { node: NodeId, var: usize, count: usize },
    #[error("leaf {node} names action {action}, model has {count}")]
    BadAction { node: NodeId, action: ActionId, count: usize },
    #[error("model has no random action; augment it first")]
    NoRandomAction,
    #[error("parameterization has {found} values, template has {expected} parameters")]
    ParamArity { expected: usize, found: usize },
    #[error("parameter {name} = {value} outside the template")]
    OutsideTemplate { name: String, value: i64 },
    #[error("tree shape does not match the template topology")]
    ShapeMismatch,
    #[error("hint predicate at node {node} is not in the template")]
    HintOutsideTemplate { node: NodeId },
    #[error("hint is deeper than the template")]
    HintTooDeep,
    #[error("node {0} is not an inner node")]
    NotInner(NodeId),
    #[error("templates with inner nodes need at least one state variable")]
    NoVariables,
    #[error("template parameter {0} has an empty domain")]
    EmptyDomain(String),
    #[error("malformed tree document: {0}")]
    Syntax(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TopoNode {
    Inner { left: NodeId, right: NodeId },
    Leaf,
}

/// Shape of a binary tree. Node ids index into an arena.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Topology {
    nodes: Vec<TopoNode>,
    root: NodeId,
}

impl Topology {
    /// Complete tree of the given depth in heap order: node `i` has
    /// children `2i+1` and `2i+2`.
    pub fn complete(depth: usize) -> Topology {
        let inner = (1usize << depth) - 1;
        let total = (1usize << (depth + 1)) - 1;
        let nodes = (0..total)
            .map(|i| {
                if i < inner {
                    TopoNode::Inner {
                        left: 2 * i + 1,
                        right: 2 * i + 2,
                    }
                } else {
                    TopoNode::Leaf
                }
            })
            .collect();
        Topology { nodes, root: 0 }
    }

    pub fn new(nodes: Vec<TopoNode>, root: NodeId) -> Result<Topology, TreeError> {
        validate_shape(&nodes, root, |n| match n {
            TopoNode::Inner { left, right } => Some((*left, *right)),
            TopoNode::Leaf => None,
        })?;
        Ok(Topology { nodes, root })
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, n: NodeId) -> TopoNode {
        self.nodes[n]
    }

    pub fn children(&self, n: NodeId) -> Option<(NodeId, NodeId)> {
        match self.nodes[n] {
            TopoNode::Inner { left, right } => Some((left, right)),
            TopoNode::Leaf => None,
        }
    }

    pub fn is_leaf(&self, n: NodeId) -> bool {
        self.nodes[n] == TopoNode::Leaf
    }

    pub fn inner_nodes(&self) -> Vec<NodeId> {
        (0..self.len()).filter(|&n| !self.is_leaf(n)).collect()
    }

    pub fn leaves(&self) -> Vec<NodeId> {
        (0..self.len()).filter(|&n| self.is_leaf(n)).collect()
    }

    pub fn depth(&self) -> usize {
        self.depth_of(self.root)
    }

    /// Depth of the sub-tree rooted at `n`.
    pub fn depth_of(&self, n: NodeId) -> usize {
        match self.children(n) {
            Some((l, r)) => 1 + self.depth_of(l).max(self.depth_of(r)),
            None => 0,
        }
    }

    /// For every leaf, the inner nodes on its root path with the direction
    /// taken (`true` = left, the predicate holds).
    pub fn leaf_paths(&self) -> Vec<(NodeId, Vec<(NodeId, bool)>)> {
        let mut out = Vec::new();
        let mut stack = vec![(self.root, Vec::new())];
        while let Some((n, path)) = stack.pop() {
            match self.children(n) {
                Some((l, r)) => {
                    let mut rp = path.clone();
                    rp.push((n, false));
                    let mut lp = path;
                    lp.push((n, true));
                    stack.push((r, rp));
                    stack.push((l, lp));
                }
                None => out.push((n, path)),
            }
        }
        out.sort_by_key(|(n, _)| *n);
        out
    }

    /// Nodes of the sub-tree rooted at `n`, in breadth-first order.
    pub fn subtree(&self, n: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut queue = VecDeque::from([n]);
        while let Some(x) = queue.pop_front() {
            out.push(x);
            if let Some((l, r)) = self.children(x) {
                queue.push_back(l);
                queue.push_back(r);
            }
        }
        out
    }

    /// Nodes in pre-order (root, left sub-tree, right sub-tree).
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![self.root];
        while let Some(n) = stack.pop() {
            out.push(n);
            if let Some((l, r)) = self.children(n) {
                stack.push(r);
                stack.push(l);
            }
        }
        out
    }
}

fn validate_shape<T>(
    nodes: &[T],
    root: NodeId,
    children: impl Fn(&T) -> Option<(NodeId, NodeId)>,
) -> Result<(), TreeError> {
    if nodes.is_empty() {
        return Err(TreeError::Empty);
    }
    if root >= nodes.len() {
        return Err(TreeError::MissingNode(root));
    }
    let mut seen = vec![false; nodes.len()];
    let mut stack = vec![root];
    seen[root] = true;
    while let Some(n) = stack.pop() {
        if let Some((l, r)) = children(&nodes[n]) {
            for c in [l, r] {
                if c >= nodes.len() {
                    return Err(TreeError::MissingNode(c));
                }
                if seen[c] {
                    return Err(TreeError::NotATree(c));
                }
                seen[c] = true;
                stack.push(c);
            }
        }
    }
    match seen.iter().position(|&s| !s) {
        Some(n) => Err(TreeError::Orphan(n)),
        None => Ok(()),
    }
}

/// The predicate `v_var <= bound`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Predicate {
    pub var: usize,
    pub bound: i64,
}

impl Predicate {
    pub fn holds(&self, valuation: &[i64]) -> bool {
        valuation[self.var] <= self.bound
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Node {
    /// `left` is taken when the predicate holds, `right` otherwise.
    Inner {
        pred: Predicate,
        left: NodeId,
        right: NodeId,
    },
    Leaf {
        action: ActionId,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    root: NodeId,
}

impl DecisionTree {
    pub fn new(nodes: Vec<Node>, root: NodeId) -> Result<DecisionTree, TreeError> {
        validate_shape(&nodes, root, |n| match n {
            Node::Inner { left, right, .. } => Some((*left, *right)),
            Node::Leaf { .. } => None,
        })?;
        Ok(DecisionTree { nodes, root })
    }

    pub fn leaf(action: ActionId) -> DecisionTree {
        DecisionTree {
            nodes: vec![Node::Leaf { action }],
            root: 0,
        }
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, n: NodeId) -> Node {
        self.nodes[n]
    }

    pub fn topology(&self) -> Topology {
        Topology {
            nodes: self
                .nodes
                .iter()
                .map(|n| match *n {
                    Node::Inner { left, right, .. } => TopoNode::Inner { left, right },
                    Node::Leaf { .. } => TopoNode::Leaf,
                })
                .collect(),
            root: self.root,
        }
    }

    pub fn inner_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Inner { .. }))
            .count()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.len() - self.inner_count()
    }

    pub fn depth(&self) -> usize {
        self.topology().depth()
    }

    /// The unique leaf reached by `valuation`.
    pub fn leaf_of(&self, valuation: &[i64]) -> NodeId {
        let mut n = self.root;
        while let Node::Inner { pred, left, right } = self.nodes[n] {
            n = if pred.holds(valuation) { left } else { right };
        }
        n
    }

    pub fn action_at(&self, valuation: &[i64]) -> ActionId {
        match self.nodes[self.leaf_of(valuation)] {
            Node::Leaf { action } => action,
            Node::Inner { .. } => unreachable!("leaf_of returns leaves"),
        }
    }

    /// Checks that variables and actions exist in `m`.
    pub fn check_against(&self, m: &Mdp) -> Result<(), TreeError> {
        for (id, n) in self.nodes.iter().enumerate() {
            match *n {
                Node::Inner { pred, .. } if pred.var >= m.variables().len() => {
                    return Err(TreeError::BadVariable {
                        node: id,
                        var: pred.var,
                        count: m.variables().len(),
                    })
                }
                Node::Leaf { action } if action >= m.num_actions() => {
                    return Err(TreeError::BadAction {
                        node: id,
                        action,
                        count: m.num_actions(),
                    })
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Copy with nodes renumbered breadth-first from the root.
    pub fn compacted(&self) -> DecisionTree {
        let order = self.topology().subtree(self.root);
        let mut id = vec![usize::MAX; self.nodes.len()];
        for (i, &n) in order.iter().enumerate() {
            id[n] = i;
        }
        let nodes = order
            .iter()
            .map(|&n| match self.nodes[n] {
                Node::Inner { pred, left, right } => Node::Inner {
                    pred,
                    left: id[left],
                    right: id[right],
                },
                leaf => leaf,
            })
            .collect();
        DecisionTree { nodes, root: 0 }
    }
}

/// Action the tree plays at `s`: the leaf action when enabled, the random
/// action otherwise.
fn tree_action(t: &DecisionTree, m: &Mdp, star: ActionId, s: StateId) -> ActionId {
    let a = t.action_at(m.valuation(s));
    if m.is_enabled(s, a) {
        a
    } else {
        star
    }
}

/// Policy induced by `t` on `m`, undefined on goal states. `m` must contain
/// the random action.
pub fn induce_policy(t: &DecisionTree, m: &Mdp) -> Result<Policy, TreeError> {
    let mut p = induced_actions(t, m)?;
    for s in 0..m.num_states() {
        if m.is_goal(s) {
            p.set(s, None);
        }
    }
    Ok(p)
}

/// Like [`induce_policy`] but defined on every state, goal states included.
pub fn induced_actions(t: &DecisionTree, m: &Mdp) -> Result<Policy, TreeError> {
    t.check_against(m)?;
    let star = m.random_action().ok_or(TreeError::NoRandomAction)?;
    Ok(Policy::from_choices(
        (0..m.num_states())
            .map(|s| Some(tree_action(t, m, star, s)))
            .collect(),
    ))
}

/// Removes nodes whose set of corresponding states (over all states of `m`)
/// is empty, then merges sibling leaves with equal actions bottom-up.
pub fn postprocess(t: &DecisionTree, m: &Mdp) -> DecisionTree {
    fn go(t: &DecisionTree, m: &Mdp, n: NodeId, states: &[StateId], out: &mut Vec<Node>) -> NodeId {
        match t.nodes[n] {
            Node::Leaf { action } => {
                out.push(Node::Leaf { action });
                out.len() - 1
            }
            Node::Inner { pred, left, right } => {
                let (l, r): (Vec<StateId>, Vec<StateId>) = states
                    .iter()
                    .partition(|&&s| pred.holds(m.valuation(s)));
                if r.is_empty() {
                    return go(t, m, left, &l, out);
                }
                if l.is_empty() {
                    return go(t, m, right, &r, out);
                }
                let li = go(t, m, left, &l, out);
                let ri = go(t, m, right, &r, out);
                if let (Node::Leaf { action: a }, Node::Leaf { action: b }) = (out[li], out[ri]) {
                    if a == b {
                        out.truncate(li);
                        out.push(Node::Leaf { action: a });
                        return out.len() - 1;
                    }
                }
                out.push(Node::Inner {
                    pred,
                    left: li,
                    right: ri,
                });
                out.len() - 1
            }
        }
    }
    let all: Vec<StateId> = (0..m.num_states()).collect();
    let mut nodes = Vec::new();
    let root = go(t, m, t.root, &all, &mut nodes);
    DecisionTree { nodes, root }.compacted()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::bench::line3;

    pub(crate) fn split(var: usize, bound: i64, l: ActionId, r: ActionId) -> DecisionTree {
        DecisionTree::new(
            vec![
                Node::Inner {
                    pred: Predicate { var, bound },
                    left: 1,
                    right: 2,
                },
                Node::Leaf { action: l },
                Node::Leaf { action: r },
            ],
            0,
        )
        .unwrap()
    }

    /// The depth-2 gridworld tree from the introductory example, over
    /// variables (x, y) and actions (up, down, left, right).
    fn example_tree() -> DecisionTree {
        let p = |var, bound| Predicate { var, bound };
        DecisionTree::new(
            vec![
                Node::Inner { pred: p(0, 2), left: 1, right: 2 },
                Node::Inner { pred: p(1, 1), left: 3, right: 4 },
                Node::Inner { pred: p(1, 2), left: 5, right: 6 },
                Node::Leaf { action: 3 },
                Node::Leaf { action: 0 },
                Node::Leaf { action: 2 },
                Node::Leaf { action: 0 },
            ],
            0,
        )
        .unwrap()
    }

    #[test]
    fn leaf_of_follows_predicates() {
        assert_eq!(DecisionTree::leaf(0).leaf_of(&[7]), 0);
        let t = split(0, 1, 0, 1);
        assert_eq!(t.leaf_of(&[0]), 1);
        assert_eq!(t.leaf_of(&[2]), 2);
        let ex = example_tree();
        assert_eq!(ex.leaf_of(&[4, 3]), 6);
        assert_eq!(ex.action_at(&[4, 3]), 0);
    }

    #[test]
    fn complete_topology_counts() {
        let t = Topology::complete(2);
        assert_eq!(t.inner_nodes(), vec![0, 1, 2]);
        assert_eq!(t.leaves(), vec![3, 4, 5, 6]);
        assert_eq!(t.depth(), 2);
        let paths = t.leaf_paths();
        assert_eq!(paths[0], (3, vec![(0, true), (1, true)]));
        assert_eq!(paths[3], (6, vec![(0, false), (2, false)]));
        assert_eq!(t.preorder(), vec![0, 1, 3, 4, 2, 5, 6]);
    }

    #[test]
    fn rejects_malformed_shapes() {
        let leaf = Node::Leaf { action: 0 };
        let inner = |l, r| Node::Inner { pred: Predicate { var: 0, bound: 0 }, left: l, right: r };
        assert_eq!(DecisionTree::new(vec![], 0), Err(TreeError::Empty));
        assert_eq!(DecisionTree::new(vec![inner(1, 1), leaf], 0), Err(TreeError::NotATree(1)));
        assert_eq!(DecisionTree::new(vec![inner(1, 3), leaf, leaf], 0), Err(TreeError::MissingNode(3)));
        assert_eq!(DecisionTree::new(vec![leaf, leaf], 0), Err(TreeError::Orphan(1)));
    }

    #[test]
    fn induced_policy_falls_back_to_random() {
        let mut doc = crate::bench::line3_document();
        doc.enabled[1] = vec![1];
        doc.transitions.retain(|t| !(t.state == 1 && t.action == 0));
        let m = Mdp::from_document(&doc).unwrap().augment_random_action().unwrap();
        let p = induce_policy(&DecisionTree::leaf(0), &m).unwrap();
        assert_eq!(p.choices(), &[Some(0), Some(2), None]);
        let total = induced_actions(&DecisionTree::leaf(0), &m).unwrap();
        assert_eq!(total.get(2), Some(0));
        assert_eq!(
            induce_policy(&DecisionTree::leaf(0), &line3()),
            Err(TreeError::NoRandomAction)
        );
    }

    #[test]
    fn postprocess_merges_and_prunes() {
        let m = line3().augment_random_action().unwrap();
        assert_eq!(postprocess(&split(0, 1, 0, 0), &m), DecisionTree::leaf(0));
        // x <= 2 always holds, so the right child corresponds to no state.
        assert_eq!(postprocess(&split(0, 2, 1, 0), &m), DecisionTree::leaf(1));
        let kept = split(0, 1, 1, 0);
        assert_eq!(postprocess(&kept, &m), kept);
    }

    #[test]
    fn compaction_renumbers_breadth_first() {
        let t = DecisionTree::new(
            vec![
                Node::Leaf { action: 1 },
                Node::Inner { pred: Predicate { var: 0, bound: 0 }, left: 2, right: 0 },
                Node::Leaf { action: 0 },
            ],
            1,
        )
        .unwrap();
        assert_eq!(t.compacted(), split(0, 0, 0, 1));
    }
}
