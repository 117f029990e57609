use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use super::{DecisionTree, Node, NodeId, Predicate, TopoNode, Topology, TreeError};
use crate::mdp::{ActionId, Mdp};

/// Rectangular predicate set of an inner node: every `v <= b` with `v` in
/// `variables` and `b` in `bounds`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PredicateSet {
    pub variables: Vec<usize>,
    pub bounds: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Slot {
    Inner(PredicateSet),
    Leaf(Vec<ActionId>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamKind {
    /// Index of the variable tested at an inner node.
    Variable(NodeId),
    /// Bound of the predicate at an inner node.
    Bound(NodeId),
    /// Action of a leaf.
    Action(NodeId),
}

impl ParamKind {
    pub fn node(self) -> NodeId {
        match self {
            ParamKind::Variable(n) | ParamKind::Bound(n) | ParamKind::Action(n) => n,
        }
    }

    pub fn is_bound(self) -> bool {
        matches!(self, ParamKind::Bound(_))
    }
}

impl fmt::Display for ParamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamKind::Variable(n) => write!(f, "d{n}"),
            ParamKind::Bound(n) => write!(f, "b{n}"),
            ParamKind::Action(n) => write!(f, "a{n}"),
        }
    }
}

/// A topology with predicate sets on inner nodes and action sets on leaves.
///
/// Parameters are laid out as `d_n, b_n` for inner nodes in id order,
/// followed by `a_l` for leaves in id order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeTemplate {
    topology: Topology,
    slots: Vec<Slot>,
    kinds: Arc<[ParamKind]>,
    param_of: Vec<usize>,
}

/// One value per template parameter.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Parameterization {
    pub values: Vec<i64>,
}

/// A rectangular family of parameterizations: one finite domain per
/// template parameter, each sorted and duplicate-free.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ParamSet {
    kinds: Arc<[ParamKind]>,
    domains: Vec<Vec<i64>>,
}

impl TreeTemplate {
    fn build(topology: Topology, slots: Vec<Slot>) -> Result<TreeTemplate, TreeError> {
        let mut kinds = Vec::new();
        let mut param_of = vec![usize::MAX; topology.len()];
        for n in topology.inner_nodes() {
            param_of[n] = kinds.len();
            kinds.push(ParamKind::Variable(n));
            kinds.push(ParamKind::Bound(n));
        }
        for n in topology.leaves() {
            param_of[n] = kinds.len();
            kinds.push(ParamKind::Action(n));
        }
        let tpl = TreeTemplate {
            topology,
            slots,
            kinds: kinds.into(),
            param_of,
        };
        for (i, k) in tpl.kinds.iter().enumerate() {
            if tpl.template_domain(i).is_empty() {
                return Err(TreeError::EmptyDomain(k.to_string()));
            }
        }
        Ok(tpl)
    }

    pub fn new(
        topology: Topology,
        predicates: impl Fn(NodeId) -> PredicateSet,
        actions: impl Fn(NodeId) -> Vec<ActionId>,
    ) -> Result<TreeTemplate, TreeError> {
        let slots = (0..topology.len())
            .map(|n| {
                if topology.is_leaf(n) {
                    Slot::Leaf(sorted(actions(n)))
                } else {
                    let p = predicates(n);
                    Slot::Inner(PredicateSet {
                        variables: sorted(p.variables),
                        bounds: sorted(p.bounds),
                    })
                }
            })
            .collect();
        TreeTemplate::build(topology, slots)
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn num_params(&self) -> usize {
        self.kinds.len()
    }

    pub fn kinds(&self) -> &[ParamKind] {
        &self.kinds
    }

    pub fn param_name(&self, i: usize) -> String {
        self.kinds[i].to_string()
    }

    pub fn variable_param(&self, n: NodeId) -> usize {
        debug_assert!(!self.topology.is_leaf(n));
        self.param_of[n]
    }

    pub fn bound_param(&self, n: NodeId) -> usize {
        debug_assert!(!self.topology.is_leaf(n));
        self.param_of[n] + 1
    }

    pub fn action_param(&self, n: NodeId) -> usize {
        debug_assert!(self.topology.is_leaf(n));
        self.param_of[n]
    }

    pub fn predicates(&self, n: NodeId) -> Option<&PredicateSet> {
        match &self.slots[n] {
            Slot::Inner(p) => Some(p),
            Slot::Leaf(_) => None,
        }
    }

    pub fn actions(&self, n: NodeId) -> Option<&[ActionId]> {
        match &self.slots[n] {
            Slot::Leaf(a) => Some(a),
            Slot::Inner(_) => None,
        }
    }

    /// Domain of parameter `i` as given by the template sets.
    pub fn template_domain(&self, i: usize) -> Vec<i64> {
        match (self.kinds[i], &self.slots[self.kinds[i].node()]) {
            (ParamKind::Variable(_), Slot::Inner(p)) => {
                p.variables.iter().map(|&v| v as i64).collect()
            }
            (ParamKind::Bound(_), Slot::Inner(p)) => p.bounds.clone(),
            (ParamKind::Action(_), Slot::Leaf(a)) => a.iter().map(|&a| a as i64).collect(),
            _ => unreachable!("parameter kinds follow node kinds"),
        }
    }

    /// The family of all parameterizations of the template.
    pub fn superfamily(&self) -> ParamSet {
        ParamSet {
            kinds: self.kinds.clone(),
            domains: (0..self.num_params())
                .map(|i| self.template_domain(i))
                .collect(),
        }
    }

    fn check_params(&self, f: &Parameterization) -> Result<(), TreeError> {
        if f.values.len() != self.num_params() {
            return Err(TreeError::ParamArity {
                expected: self.num_params(),
                found: f.values.len(),
            });
        }
        for (i, &v) in f.values.iter().enumerate() {
            if self.template_domain(i).binary_search(&v).is_err() {
                return Err(TreeError::OutsideTemplate {
                    name: self.param_name(i),
                    value: v,
                });
            }
        }
        Ok(())
    }

    /// The tree selected by `f`, without checking membership.
    pub(crate) fn instantiate_unchecked(&self, f: &Parameterization) -> DecisionTree {
        let nodes = (0..self.topology.len())
            .map(|n| match self.topology.node(n) {
                TopoNode::Inner { left, right } => Node::Inner {
                    pred: Predicate {
                        var: f.values[self.variable_param(n)] as usize,
                        bound: f.values[self.bound_param(n)],
                    },
                    left,
                    right,
                },
                TopoNode::Leaf => Node::Leaf {
                    action: f.values[self.action_param(n)] as ActionId,
                },
            })
            .collect();
        DecisionTree {
            nodes,
            root: self.topology.root(),
        }
    }

    pub fn instantiate(&self, f: &Parameterization) -> Result<DecisionTree, TreeError> {
        self.check_params(f)?;
        Ok(self.instantiate_unchecked(f))
    }

    /// Inverse of [`TreeTemplate::instantiate`] for trees with this
    /// template's topology.
    pub fn parameters_of(&self, t: &DecisionTree) -> Result<Parameterization, TreeError> {
        if t.topology() != self.topology {
            return Err(TreeError::ShapeMismatch);
        }
        let mut values = vec![0; self.num_params()];
        for (n, node) in t.nodes().iter().enumerate() {
            match *node {
                Node::Inner { pred, .. } => {
                    values[self.variable_param(n)] = pred.var as i64;
                    values[self.bound_param(n)] = pred.bound;
                }
                Node::Leaf { action } => values[self.action_param(n)] = action as i64,
            }
        }
        let f = Parameterization { values };
        self.check_params(&f)?;
        Ok(f)
    }

    /// Sub-family of `family` whose trees follow `hint` on its inner nodes:
    /// the predicates of the hint's inner nodes are fixed, everything below
    /// the hint's leaves stays as in `family`.
    pub fn hint_family(&self, family: &ParamSet, hint: &DecisionTree) -> Result<ParamSet, TreeError> {
        let mut out = family.clone();
        let mut stack = vec![(self.topology.root(), hint.root())];
        while let Some((n, h)) = stack.pop() {
            let Node::Inner { pred, left, right } = hint.node(h) else {
                continue;
            };
            let Some((tl, tr)) = self.topology.children(n) else {
                return Err(TreeError::HintTooDeep);
            };
            let (dp, bp) = (self.variable_param(n), self.bound_param(n));
            let var = pred.var as i64;
            if family.domain(dp).binary_search(&var).is_err()
                || family.domain(bp).binary_search(&pred.bound).is_err()
            {
                return Err(TreeError::HintOutsideTemplate { node: n });
            }
            out.domains[dp] = vec![var];
            out.domains[bp] = vec![pred.bound];
            stack.push((tl, left));
            stack.push((tr, right));
        }
        Ok(out)
    }
}

fn sorted<T: Ord>(mut v: Vec<T>) -> Vec<T> {
    v.sort_unstable();
    v.dedup();
    v
}

/// Predicate set with every variable and the interval of observed values.
fn full_predicates(m: &Mdp) -> Result<PredicateSet, TreeError> {
    let nvars = m.variables().len();
    if nvars == 0 {
        return Err(TreeError::NoVariables);
    }
    let values = m.valuations().iter().flatten().copied();
    let lo = values.clone().min().expect("at least one state and variable");
    let hi = values.max().expect("at least one state and variable");
    Ok(PredicateSet {
        variables: (0..nvars).collect(),
        bounds: (lo..=hi).collect(),
    })
}

/// Template of the complete tree of depth `k` with every predicate over the
/// observed value range and every action on each leaf.
pub fn full_template(m: &Mdp, k: usize) -> Result<(TreeTemplate, ParamSet), TreeError> {
    let topology = Topology::complete(k);
    let preds = if k > 0 {
        Some(full_predicates(m)?)
    } else {
        None
    };
    let actions: Vec<ActionId> = (0..m.num_actions()).collect();
    let tpl = TreeTemplate::new(
        topology,
        |_| preds.clone().expect("inner nodes only exist for k > 0"),
        |_| actions.clone(),
    )?;
    let family = tpl.superfamily();
    Ok((tpl, family))
}

enum Source {
    /// Copy of a node of the original tree; `free` nodes get full sets.
    Tree(NodeId, bool),
    /// Fresh complete sub-tree with the given remaining depth.
    Complete(usize),
}

/// Template with the shape of `t` where the sub-tree at `n` is replaced by
/// a complete tree of depth `depth` (or kept as is when `None`). Nodes of
/// the replaced region get full predicate and action sets, every other
/// node is fixed to its choice in `t`.
pub(crate) fn splice_template(
    t: &DecisionTree,
    n: NodeId,
    depth: Option<usize>,
    m: &Mdp,
) -> Result<(TreeTemplate, ParamSet), TreeError> {
    if !matches!(t.node(n), Node::Inner { .. }) {
        return Err(TreeError::NotInner(n));
    }
    let full = full_predicates(m)?;
    let all_actions: Vec<ActionId> = (0..m.num_actions()).collect();
    let mut topo = Vec::new();
    let mut slots = Vec::new();
    let mut queue = VecDeque::from([Source::Tree(t.root(), t.root() == n)]);
    let start = |x: NodeId, free: bool| -> Source {
        match (x == n, depth) {
            (true, Some(d)) => Source::Complete(d),
            (true, None) => Source::Tree(x, true),
            (false, _) => Source::Tree(x, free),
        }
    };
    if let Some(d) = depth.filter(|_| t.root() == n) {
        queue = VecDeque::from([Source::Complete(d)]);
    }
    while let Some(src) = queue.pop_front() {
        let id = topo.len();
        let next = id + queue.len() + 1;
        match src {
            Source::Complete(0) => {
                topo.push(TopoNode::Leaf);
                slots.push(Slot::Leaf(all_actions.clone()));
            }
            Source::Complete(d) => {
                topo.push(TopoNode::Inner { left: next, right: next + 1 });
                slots.push(Slot::Inner(full.clone()));
                queue.push_back(Source::Complete(d - 1));
                queue.push_back(Source::Complete(d - 1));
            }
            Source::Tree(x, free) => match t.node(x) {
                Node::Leaf { action } => {
                    topo.push(TopoNode::Leaf);
                    slots.push(Slot::Leaf(if free { all_actions.clone() } else { vec![action] }));
                }
                Node::Inner { pred, left, right } => {
                    topo.push(TopoNode::Inner { left: next, right: next + 1 });
                    slots.push(Slot::Inner(if free {
                        full.clone()
                    } else {
                        PredicateSet {
                            variables: vec![pred.var],
                            bounds: vec![pred.bound],
                        }
                    }));
                    queue.push_back(start(left, free));
                    queue.push_back(start(right, free));
                }
            },
        }
    }
    let topology = Topology::new(topo, 0)?;
    let tpl = TreeTemplate::build(topology, slots)?;
    let family = tpl.superfamily();
    Ok((tpl, family))
}

/// Template with the shape of `t` in which only the sub-tree rooted at `n`
/// is free.
pub fn subtree_template(
    t: &DecisionTree,
    n: NodeId,
    m: &Mdp,
) -> Result<(TreeTemplate, ParamSet), TreeError> {
    splice_template(t, n, None, m)
}

impl ParamSet {
    pub fn len(&self) -> usize {
        self.domains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }

    pub fn kinds(&self) -> &[ParamKind] {
        &self.kinds
    }

    pub fn kind(&self, i: usize) -> ParamKind {
        self.kinds[i]
    }

    pub fn domain(&self, i: usize) -> &[i64] {
        &self.domains[i]
    }

    pub fn domains(&self) -> &[Vec<i64>] {
        &self.domains
    }

    /// Copy with the domain of parameter `i` replaced.
    pub fn with_domain(&self, i: usize, domain: Vec<i64>) -> ParamSet {
        let mut out = self.clone();
        out.domains[i] = sorted(domain);
        out
    }

    /// Number of parameterizations, saturating at `u128::MAX`.
    pub fn size(&self) -> u128 {
        self.domains
            .iter()
            .fold(1u128, |acc, d| acc.saturating_mul(d.len() as u128))
    }

    pub fn contains(&self, f: &Parameterization) -> bool {
        f.values.len() == self.len()
            && f.values
                .iter()
                .zip(&self.domains)
                .all(|(v, d)| d.binary_search(v).is_ok())
    }

    pub fn is_subset_of(&self, other: &ParamSet) -> bool {
        self.len() == other.len()
            && self
                .domains
                .iter()
                .zip(&other.domains)
                .all(|(a, b)| a.iter().all(|v| b.binary_search(v).is_ok()))
    }

    /// Smallest value of every domain.
    pub fn first(&self) -> Parameterization {
        Parameterization {
            values: self.domains.iter().map(|d| d[0]).collect(),
        }
    }

    /// All parameterizations; the last parameter varies fastest.
    pub fn iter(&self) -> impl Iterator<Item = Parameterization> + '_ {
        let mut idx = vec![0usize; self.len()];
        let mut done = self.domains.iter().any(Vec::is_empty);
        std::iter::from_fn(move || {
            if done {
                return None;
            }
            let f = Parameterization {
                values: idx.iter().zip(&self.domains).map(|(&i, d)| d[i]).collect(),
            };
            done = true;
            for p in (0..idx.len()).rev() {
                idx[p] += 1;
                if idx[p] < self.domains[p].len() {
                    done = false;
                    break;
                }
                idx[p] = 0;
            }
            Some(f)
        })
    }
}
