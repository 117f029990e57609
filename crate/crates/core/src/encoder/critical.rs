//! Unsat cores of Φ(F, σ) and the critical states they name.

use std::collections::{BTreeSet, VecDeque};

use super::implement::find_implementation;
use super::{encode_policy, implements_at, EncodeError};
use crate::mdp::{Mdp, Policy, StateId};
use crate::solver::Outcome;
use crate::tree::{NodeId, ParamSet, TreeTemplate};

/// Node budget for core extraction by the constraint solver.
const CORE_BUDGET: u64 = 20_000;

/// Order in which states are added while looking for the shortest
/// unimplementable prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StateOrder {
    /// Breadth-first from the initial state along the policy; states of one
    /// layer by ascending index.
    #[default]
    Bfs,
    /// Ascending state index.
    Index,
}

/// An unsatisfiable part of Φ(F, σ).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnsatCore {
    /// Template parameters whose domain constraints take part.
    pub params: Vec<usize>,
    /// `(state, leaf)` pairs of the act constraints that take part.
    pub pairs: Vec<(StateId, NodeId)>,
    /// States mentioned by `pairs`, ascending.
    pub critical: Vec<StateId>,
    /// Length of the shortest unimplementable prefix of the state order.
    pub prefix_len: usize,
}

/// The defined states of `policy` in the requested order. States not
/// reached by the breadth-first search come last, by index.
pub fn state_order(m: &Mdp, policy: &Policy, order: StateOrder) -> Vec<StateId> {
    let defined: Vec<StateId> = policy.defined_states().collect();
    if order == StateOrder::Index {
        return defined;
    }
    let n = m.num_states();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    let mut layer = vec![m.initial()];
    seen[m.initial()] = true;
    while !layer.is_empty() {
        layer.sort_unstable();
        let mut next = Vec::new();
        for &s in &layer {
            let Some(a) = policy.get(s) else { continue };
            out.push(s);
            let Some(c) = m.choice(s, a) else { continue };
            for &(t, _) in &c.dist {
                if !seen[t] {
                    seen[t] = true;
                    next.push(t);
                }
            }
        }
        layer = next;
    }
    let listed: BTreeSet<StateId> = out.iter().copied().collect();
    out.extend(defined.into_iter().filter(|s| !listed.contains(s)));
    out
}

/// Finds the shortest prefix (in `order`) of the defined states of
/// `policy` that no tree of `family` implements, and an unsat core of the
/// encoding restricted to that prefix.
///
/// The core comes from the constraint solver when it finishes within its
/// budget. Otherwise the prefix is shrunk by dropping states while it stays
/// unimplementable and the core consists of the act constraints of the
/// remaining states plus the non-trivial domain constraints.
pub fn critical_states(
    tpl: &TreeTemplate,
    family: &ParamSet,
    policy: &Policy,
    m: &Mdp,
    order: StateOrder,
) -> Result<UnsatCore, EncodeError> {
    let states = state_order(m, policy, order);
    let mut current = None;
    let mut prefix_len = None;
    for i in 0..states.len() {
        let s = states[i];
        if let Some(f) = &current {
            if implements_at(tpl, f, policy, m, s)? {
                continue;
            }
        }
        let prefix = policy.restricted_to(&states[..=i]);
        current = find_implementation(tpl, family, &prefix, m)?;
        if current.is_none() {
            prefix_len = Some(i + 1);
            break;
        }
    }
    let prefix_len = prefix_len.ok_or(EncodeError::Satisfiable)?;
    let prefix = &states[..prefix_len];
    let restricted = policy.restricted_to(prefix);

    let enc = encode_policy(tpl, family, &restricted, m)?;
    let active = enc.system.all_groups();
    let core_groups: BTreeSet<usize> = match enc.system.solve_ids(&active, Some(CORE_BUDGET)) {
        Outcome::Unsat(core) => core.into_iter().collect(),
        Outcome::Sat(_) => unreachable!("the prefix was shown unimplementable"),
        Outcome::Unknown => {
            let kept = shrink_states(tpl, family, policy, m, prefix)?;
            let kept: BTreeSet<StateId> = kept.into_iter().collect();
            let mut groups: BTreeSet<usize> = enc
                .act_groups
                .iter()
                .filter(|(s, _, _)| kept.contains(s))
                .map(|&(_, _, g)| g)
                .collect();
            for (i, &g) in enc.dom_groups.iter().enumerate() {
                if family.domain(i).len() < tpl.template_domain(i).len() {
                    groups.insert(g);
                }
            }
            groups
        }
    };

    let params: Vec<usize> = (0..tpl.num_params())
        .filter(|&i| core_groups.contains(&enc.dom_groups[i]))
        .collect();
    let pairs: Vec<(StateId, NodeId)> = enc
        .act_groups
        .iter()
        .filter(|(_, _, g)| core_groups.contains(g))
        .map(|&(s, n, _)| (s, n))
        .collect();
    let critical: BTreeSet<StateId> = pairs.iter().map(|&(s, _)| s).collect();
    Ok(UnsatCore {
        params,
        pairs,
        critical: critical.into_iter().collect(),
        prefix_len,
    })
}

/// Deletion-based shrinking of an unimplementable state set. The last
/// state of the prefix is always kept.
fn shrink_states(
    tpl: &TreeTemplate,
    family: &ParamSet,
    policy: &Policy,
    m: &Mdp,
    prefix: &[StateId],
) -> Result<Vec<StateId>, EncodeError> {
    let mut kept: VecDeque<StateId> = prefix.iter().copied().collect();
    let last = kept.pop_back().expect("nonempty prefix");
    let mut i = 0;
    while i < kept.len() {
        let mut trial: Vec<StateId> = kept.iter().copied().collect();
        trial.remove(i);
        trial.push(last);
        if find_implementation(tpl, family, &policy.restricted_to(&trial), m)?.is_none() {
            kept.remove(i);
        } else {
            i += 1;
        }
    }
    kept.push_back(last);
    Ok(kept.into_iter().collect())
}
