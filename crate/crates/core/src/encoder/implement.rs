//! Exact implementability check by search over the tree structure.
//!
//! Deciding whether some tree of a rectangular family implements a policy
//! splits along the tree: an inner node only influences which states go
//! left and right, so each child can be solved independently for the
//! states routed to it. Sub-problems are memoized on the domains of the
//! sub-tree and the set of states.

use std::collections::{HashMap, HashSet};

use super::{requirements, EncodeError, Requirement};
use crate::mdp::{ActionId, Mdp, Policy, StateId};
use crate::tree::{NodeId, ParamSet, Parameterization, TreeTemplate};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pick {
    Split { var: i64, bound: i64 },
    Leaf { action: i64 },
}

struct Search<'a> {
    tpl: &'a TreeTemplate,
    family: &'a ParamSet,
    m: &'a Mdp,
    req: HashMap<StateId, Requirement>,
    /// Nodes with equal sub-tree domains share a class.
    class: Vec<usize>,
    memo: HashMap<(usize, Vec<StateId>), Option<Pick>>,
}

impl<'a> Search<'a> {
    fn new(tpl: &'a TreeTemplate, family: &'a ParamSet, m: &'a Mdp, req: HashMap<StateId, Requirement>) -> Self {
        let topo = tpl.topology();
        let mut class = vec![usize::MAX; topo.len()];
        let mut interned: HashMap<(Vec<Vec<i64>>, usize, usize), usize> = HashMap::new();
        let mut order = topo.subtree(topo.root());
        order.reverse();
        for n in order {
            let key = match topo.children(n) {
                Some((l, r)) => (
                    vec![
                        family.domain(tpl.variable_param(n)).to_vec(),
                        family.domain(tpl.bound_param(n)).to_vec(),
                    ],
                    class[l],
                    class[r],
                ),
                None => (
                    vec![family.domain(tpl.action_param(n)).to_vec()],
                    usize::MAX,
                    usize::MAX,
                ),
            };
            let next = interned.len();
            class[n] = *interned.entry(key).or_insert(next);
        }
        Search {
            tpl,
            family,
            m,
            req,
            class,
            memo: HashMap::new(),
        }
    }

    fn leaf_action(&self, n: NodeId, states: &[StateId]) -> Option<i64> {
        self.family
            .domain(self.tpl.action_param(n))
            .iter()
            .copied()
            .find(|&a| {
                states
                    .iter()
                    .all(|&s| self.req[&s].accepts(self.m, s, a as ActionId))
            })
    }

    fn partition(&self, states: &[StateId], var: i64, bound: i64) -> (Vec<StateId>, Vec<StateId>) {
        states
            .iter()
            .partition(|&&s| self.m.valuation(s)[var as usize] <= bound)
    }

    fn solve(&mut self, n: NodeId, states: &[StateId]) -> Option<Pick> {
        let key = (self.class[n], states.to_vec());
        if let Some(&hit) = self.memo.get(&key) {
            return hit;
        }
        let pick = match self.tpl.topology().children(n) {
            None => self.leaf_action(n, states).map(|action| Pick::Leaf { action }),
            Some((l, r)) => self.solve_inner(n, l, r, states),
        };
        self.memo.insert(key, pick);
        pick
    }

    fn solve_inner(&mut self, n: NodeId, l: NodeId, r: NodeId, states: &[StateId]) -> Option<Pick> {
        let vars = self.family.domain(self.tpl.variable_param(n)).to_vec();
        let bounds = self.family.domain(self.tpl.bound_param(n)).to_vec();
        if states.is_empty() {
            self.solve(l, states)?;
            self.solve(r, states)?;
            return Some(Pick::Split { var: vars[0], bound: bounds[0] });
        }
        let mut seen: HashSet<Vec<StateId>> = HashSet::new();
        for &var in &vars {
            for &bound in &bounds {
                let (left, right) = self.partition(states, var, bound);
                if !seen.insert(left.clone()) {
                    continue;
                }
                if self.solve(l, &left).is_some() && self.solve(r, &right).is_some() {
                    return Some(Pick::Split { var, bound });
                }
            }
        }
        None
    }

    fn assemble(&mut self, n: NodeId, states: &[StateId], values: &mut [i64]) {
        match self.solve(n, states).expect("assembled nodes are solvable") {
            Pick::Leaf { action } => values[self.tpl.action_param(n)] = action,
            Pick::Split { var, bound } => {
                values[self.tpl.variable_param(n)] = var;
                values[self.tpl.bound_param(n)] = bound;
                let (l, r) = self.tpl.topology().children(n).expect("inner node");
                let (left, right) = self.partition(states, var, bound);
                self.assemble(l, &left, values);
                self.assemble(r, &right, values);
            }
        }
    }
}

/// A parameterization in `family` whose tree implements `policy` on every
/// state where `policy` is defined, or `None` if there is none.
///
/// Answers exactly the satisfiability of [`super::encode_policy`].
pub fn find_implementation(
    tpl: &TreeTemplate,
    family: &ParamSet,
    policy: &Policy,
    m: &Mdp,
) -> Result<Option<Parameterization>, EncodeError> {
    let reqs = requirements(m, policy)?;
    let states: Vec<StateId> = reqs.iter().map(|&(s, _)| s).collect();
    let mut search = Search::new(tpl, family, m, reqs.into_iter().collect());
    let root = tpl.topology().root();
    if search.solve(root, &states).is_none() {
        return Ok(None);
    }
    let mut values = family.first().values;
    search.assemble(root, &states, &mut values);
    Ok(Some(Parameterization { values }))
}

/// Whether the tree of `f` plays an action fitting `policy` at `s`.
pub fn implements_at(
    tpl: &TreeTemplate,
    f: &Parameterization,
    policy: &Policy,
    m: &Mdp,
    s: StateId,
) -> Result<bool, EncodeError> {
    let Some(a) = policy.get(s) else {
        return Ok(true);
    };
    let req = Requirement::of(m, s, a)?;
    let tree = tpl.instantiate_unchecked(f);
    Ok(req.accepts(m, s, tree.action_at(m.valuation(s))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::line3;
    use crate::tree::{full_template, induce_policy};

    #[test]
    fn finds_trees_on_line3() {
        let m = line3().augment_random_action().unwrap();
        let (tpl0, fam0) = full_template(&m, 0).unwrap();
        let right = Policy::from_choices(vec![Some(0), Some(0), None]);
        assert_eq!(
            find_implementation(&tpl0, &fam0, &right, &m).unwrap(),
            Some(Parameterization { values: vec![0] })
        );
        let mixed = Policy::from_choices(vec![Some(1), Some(0), None]);
        assert_eq!(find_implementation(&tpl0, &fam0, &mixed, &m).unwrap(), None);

        let (tpl1, fam1) = full_template(&m, 1).unwrap();
        let f = find_implementation(&tpl1, &fam1, &mixed, &m).unwrap().unwrap();
        let induced = induce_policy(&tpl1.instantiate(&f).unwrap(), &m).unwrap();
        assert_eq!(induced.get(0), Some(1));
        assert_eq!(induced.get(1), Some(0));
        assert!(fam1.contains(&f));
    }

    #[test]
    fn empty_policy_is_trivially_implemented() {
        let m = line3().augment_random_action().unwrap();
        let (tpl, fam) = full_template(&m, 2).unwrap();
        let f = find_implementation(&tpl, &fam, &Policy::undefined(3), &m).unwrap();
        assert_eq!(f, Some(fam.first()));
    }
}
