//! Constraint encodings of "policy σ is implemented by some tree of the
//! family F", critical states, harmonization, and family-MDPs.

mod critical;
mod harmonize;
mod implement;

use thiserror::Error;

use crate::mdp::{ActionId, Mdp, ModelError, Policy, StateId};
use crate::solver::{Atom, Clause, ConstraintSystem, GroupId, SolverError, VarId};
use crate::tree::{NodeId, ParamSet, TreeError, TreeTemplate};

pub use critical::{critical_states, state_order, StateOrder, UnsatCore};
pub use harmonize::{encode_harmonization, extract_harmonizing, harmonize, HarmonizationSystem, Harmonizing};
pub use implement::{find_implementation, implements_at};

#[derive(Debug, Error, PartialEq)]
pub enum EncodeError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("policy chooses action {action} in state {state}, which is not enabled")]
    BadPolicy { state: StateId, action: ActionId },
    #[error("model has no random action; augment it first")]
    NoRandomAction,
    #[error("the policy is implementable in the family; there is no unsat core")]
    Satisfiable,
    #[error("no critical states given")]
    EmptyCritical,
    #[error("model lacks variable `{0}`")]
    MissingVariable(String),
}

/// What a leaf reached by a state must select.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) enum Requirement {
    /// Exactly this (enabled, non-random) action.
    Exactly(ActionId),
    /// The random action, or any action disabled in the state.
    Fallback,
}

impl Requirement {
    pub(crate) fn of(m: &Mdp, s: StateId, a: ActionId) -> Result<Requirement, EncodeError> {
        if !m.is_enabled(s, a) {
            return Err(EncodeError::BadPolicy { state: s, action: a });
        }
        Ok(if Some(a) == m.random_action() {
            Requirement::Fallback
        } else {
            Requirement::Exactly(a)
        })
    }

    pub(crate) fn accepts(self, m: &Mdp, s: StateId, leaf_action: ActionId) -> bool {
        match self {
            Requirement::Exactly(a) => leaf_action == a,
            Requirement::Fallback => {
                Some(leaf_action) == m.random_action() || !m.is_enabled(s, leaf_action)
            }
        }
    }
}

/// Requirements of every defined state of `policy`.
pub(crate) fn requirements(m: &Mdp, policy: &Policy) -> Result<Vec<(StateId, Requirement)>, EncodeError> {
    policy
        .iter()
        .filter_map(|(s, a)| a.map(|a| Requirement::of(m, s, a).map(|r| (s, r))))
        .collect()
}

/// The constraint system Φ(F, σ) with the bookkeeping needed to read
/// parameterizations and cores back.
#[derive(Debug, Clone)]
pub struct PolicyEncoding {
    pub system: ConstraintSystem,
    /// Solver variable of each template parameter.
    pub param_vars: Vec<VarId>,
    /// `dom:<param>` group of each template parameter.
    pub dom_groups: Vec<GroupId>,
    /// `act:<state>:<leaf>` groups.
    pub act_groups: Vec<(StateId, NodeId, GroupId)>,
}

/// The act clause of state `s` with requirement `req` at `leaf`, over the
/// solver variables `vars` (indexed by template parameter): either the
/// state does not reach the leaf, or the leaf picks a fitting action.
pub(crate) fn act_clause(
    tpl: &TreeTemplate,
    path: &[(NodeId, bool)],
    leaf: NodeId,
    m: &Mdp,
    s: StateId,
    req: Requirement,
    vars: &[VarId],
) -> Clause {
    let val = m.valuation(s);
    let mut cubes = Vec::new();
    for &(n, left) in path {
        let (dp, bp) = (tpl.variable_param(n), tpl.bound_param(n));
        let bounds = tpl.template_domain(bp);
        let (lo, hi) = (bounds[0], bounds[bounds.len() - 1]);
        for j in tpl.template_domain(dp) {
            let c = val[j as usize] - 1;
            // Left edges need v <= b, violated iff b <= v - 1; right edges
            // need v > b, violated iff b > v - 1.
            let atom = if left {
                (lo <= c).then_some(Atom::Le(vars[bp], c))
            } else {
                (hi > c).then_some(Atom::Gt(vars[bp], c))
            };
            if let Some(atom) = atom {
                cubes.push(vec![Atom::Eq(vars[dp], j), atom]);
            }
        }
    }
    let ap = tpl.action_param(leaf);
    for a in tpl.template_domain(ap) {
        if req.accepts(m, s, a as ActionId) {
            cubes.push(vec![Atom::Eq(vars[ap], a)]);
        }
    }
    Clause::new(cubes)
}

/// Builds Φ(F, σ): one `dom:<param>` group per template parameter
/// restricting it to its domain in `family` (universes are the template
/// domains), and one `act:<state>:<leaf>` group for every defined state of
/// `policy` and every leaf.
///
/// The caller is expected to leave goal states and states unreachable
/// under `policy` undefined.
pub fn encode_policy(
    tpl: &TreeTemplate,
    family: &ParamSet,
    policy: &Policy,
    m: &Mdp,
) -> Result<PolicyEncoding, EncodeError> {
    let reqs = requirements(m, policy)?;
    let mut system = ConstraintSystem::new();
    let mut param_vars = Vec::with_capacity(tpl.num_params());
    for i in 0..tpl.num_params() {
        param_vars.push(system.add_var(tpl.param_name(i), tpl.template_domain(i))?);
    }
    let mut dom_groups = Vec::with_capacity(tpl.num_params());
    for i in 0..tpl.num_params() {
        let g = system.add_group(
            format!("dom:{}", tpl.param_name(i)),
            vec![Clause::member(param_vars[i], family.domain(i).iter().copied())],
        )?;
        dom_groups.push(g);
    }
    let paths = tpl.topology().leaf_paths();
    let mut act_groups = Vec::new();
    for &(s, req) in &reqs {
        for (leaf, path) in &paths {
            let clause = act_clause(tpl, path, *leaf, m, s, req, &param_vars);
            let g = system.add_group(format!("act:{s}:{leaf}"), vec![clause])?;
            act_groups.push((s, *leaf, g));
        }
    }
    Ok(PolicyEncoding {
        system,
        param_vars,
        dom_groups,
        act_groups,
    })
}

/// Whether the state `s` can reach `leaf` in some tree of `family`.
pub(crate) fn leaf_reachable(
    tpl: &TreeTemplate,
    family: &ParamSet,
    path: &[(NodeId, bool)],
    val: &[i64],
) -> bool {
    path.iter().all(|&(n, left)| {
        let vars = family.domain(tpl.variable_param(n));
        let bounds = family.domain(tpl.bound_param(n));
        let values = vars.iter().map(|&j| val[j as usize]);
        if left {
            values.min().expect("nonempty") <= *bounds.last().expect("nonempty")
        } else {
            values.max().expect("nonempty") > bounds[0]
        }
    })
}

/// The family-MDP: the sub-MDP that keeps `(s, α)` iff some tree of
/// `family` plays `α` in `s`.
///
/// Nodes along a root-to-leaf path carry disjoint parameters, so a leaf is
/// reachable from `s` in some tree iff every node on its path can route
/// `s` the right way on its own.
pub fn family_mdp(m: &Mdp, tpl: &TreeTemplate, family: &ParamSet) -> Result<Mdp, EncodeError> {
    let star = m.random_action().ok_or(EncodeError::NoRandomAction)?;
    let paths = tpl.topology().leaf_paths();
    let mut keep = vec![vec![false; m.num_actions()]; m.num_states()];
    for (s, row) in keep.iter_mut().enumerate() {
        let val = m.valuation(s);
        for (leaf, path) in &paths {
            if !leaf_reachable(tpl, family, path, val) {
                continue;
            }
            for &a in family.domain(tpl.action_param(*leaf)) {
                let a = a as ActionId;
                if a != star && m.is_enabled(s, a) {
                    row[a] = true;
                } else {
                    row[star] = true;
                }
            }
        }
    }
    Ok(m.restrict_with(|s, a| keep[s][a])?)
}

/// Names of template parameters, for reporting.
pub fn describe_params(tpl: &TreeTemplate, params: &[usize]) -> Vec<String> {
    params.iter().map(|&i| tpl.param_name(i)).collect()
}
