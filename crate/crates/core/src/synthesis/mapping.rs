//! Mapping a fixed policy to a tree of a given depth.

use super::SynthesisError;
use crate::encoder::{critical_states, describe_params, find_implementation, harmonize, Harmonizing, StateOrder, UnsatCore};
use crate::mdp::{Mdp, ModelError, Policy, StateId};
use crate::tree::{full_template, DecisionTree, Parameterization};

/// Makes `policy` undefined on `goal` states and on states its induced
/// chain never reaches. Fails if a reachable non-goal state is undefined.
pub fn preprocess_policy(m: &Mdp, policy: &Policy, goal: Option<&[StateId]>) -> Result<Policy, ModelError> {
    let mut p = policy.clone();
    for &g in goal.unwrap_or(&[]) {
        p.set(g, None);
    }
    let reachable = m.reachable_mask(&p)?;
    let goal_mask: Vec<bool> = (0..m.num_states())
        .map(|s| goal.is_some_and(|g| g.contains(&s)))
        .collect();
    for (s, &r) in reachable.iter().enumerate() {
        if !r {
            p.set(s, None);
        } else if p.get(s).is_none() && !goal_mask[s] {
            return Err(ModelError::PolicyUndefined { state: s });
        }
    }
    Ok(p)
}

#[derive(Debug, Clone, PartialEq)]
pub enum MapOutcome {
    Implemented {
        tree: DecisionTree,
        params: Parameterization,
    },
    NotImplementable {
        core: UnsatCore,
        /// Names of the template parameters in the core.
        core_params: Vec<String>,
        harmonizing: Option<Harmonizing>,
        /// Name of the parameter the harmonizing pair disagrees on.
        harmonizing_param: Option<String>,
    },
}

/// Looks for a tree of depth `depth` that implements `policy` on the
/// states it reaches (goal states excluded). `m` must contain the random
/// action.
pub fn map_policy(
    m: &Mdp,
    policy: &Policy,
    depth: usize,
    order: StateOrder,
    harmonize_budget: Option<u64>,
) -> Result<MapOutcome, SynthesisError> {
    if m.random_action().is_none() {
        return Err(SynthesisError::NoRandomAction);
    }
    let goal = m.goal_states();
    let sigma = preprocess_policy(m, policy, Some(&goal))?;
    let (tpl, family) = full_template(m, depth)?;
    if let Some(params) = find_implementation(&tpl, &family, &sigma, m)? {
        return Ok(MapOutcome::Implemented {
            tree: tpl.instantiate(&params)?,
            params,
        });
    }
    let core = critical_states(&tpl, &family, &sigma, m, order)?;
    let harmonizing = harmonize(&tpl, &family, &sigma, &core.critical, m, harmonize_budget)?;
    Ok(MapOutcome::NotImplementable {
        core_params: describe_params(&tpl, &core.params),
        harmonizing_param: harmonizing
            .as_ref()
            .filter(|h| !h.degenerate)
            .map(|h| tpl.param_name(h.param)),
        harmonizing,
        core,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{line3, line3_document};
    use crate::tree::induce_policy;

    #[test]
    fn preprocessing_drops_goal_and_unreachable_states() {
        let m = line3();
        let reset_first = Policy::from_choices(vec![Some(1), Some(0), Some(0)]);
        let p = preprocess_policy(&m, &reset_first, Some(&[2])).unwrap();
        assert_eq!(p.choices(), &[Some(1), None, None]);
        let undefined = Policy::from_choices(vec![Some(0), None, None]);
        assert_eq!(
            preprocess_policy(&m, &undefined, Some(&[2])).unwrap_err(),
            ModelError::PolicyUndefined { state: 1 }
        );
    }

    #[test]
    fn always_right_maps_to_a_leaf() {
        let m = line3().augment_random_action().unwrap();
        let out = map_policy(&m, &Policy::constant(3, 0), 0, StateOrder::Bfs, None).unwrap();
        assert_eq!(
            out,
            MapOutcome::Implemented {
                tree: DecisionTree::leaf(0),
                params: Parameterization { values: vec![0] }
            }
        );
    }

    #[test]
    fn conflicting_states_are_reported() {
        let mut doc = line3_document();
        doc.states[1] = vec![0];
        let m = Mdp::from_document(&doc).unwrap().augment_random_action().unwrap();
        let sigma = Policy::from_choices(vec![Some(0), Some(1), None]);
        // State 1 resets to 0, which is fine: both are reachable.
        match map_policy(&m, &sigma, 0, StateOrder::Bfs, None).unwrap() {
            MapOutcome::NotImplementable {
                core,
                harmonizing_param,
                ..
            } => {
                assert_eq!(core.critical, vec![0, 1]);
                assert_eq!(harmonizing_param.as_deref(), Some("a0"));
            }
            other => panic!("expected a conflict, got {other:?}"),
        }
        match map_policy(&m, &sigma, 1, StateOrder::Bfs, None).unwrap() {
            MapOutcome::NotImplementable { core, .. } => assert_eq!(core.critical, vec![0, 1]),
            other => panic!("identical valuations cannot be separated: {other:?}"),
        }
    }

    #[test]
    fn deep_enough_trees_shatter_distinct_states() {
        let m = line3().augment_random_action().unwrap();
        let sigma = Policy::from_choices(vec![Some(0), Some(1), None]);
        let MapOutcome::Implemented { tree, .. } = map_policy(&m, &sigma, 2, StateOrder::Bfs, None).unwrap() else {
            panic!("depth 2 separates three states");
        };
        let induced = induce_policy(&tree, &m).unwrap();
        assert_eq!(&induced.choices()[..2], &[Some(0), Some(1)]);
    }
}
