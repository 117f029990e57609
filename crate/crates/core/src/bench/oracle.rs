use std::collections::HashMap;

use super::BenchError;
use crate::checker::{value_of_policy, Direction, Objective};
use crate::mdp::{ActionId, Mdp, Policy};
use crate::tree::{DecisionTree, ParamKind, ParamSet, Parameterization, TreeTemplate};

pub const DEFAULT_CAP: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForce {
    pub tree: DecisionTree,
    pub params: Parameterization,
    pub value: f64,
    /// Distinct induced policies that were model checked.
    pub distinct_policies: usize,
}

/// Evaluates every member of `family` and returns the best one; ties go to
/// the first in enumeration order. Trees inducing the same policy are
/// checked once.
pub fn brute_force_best_tree(
    m: &Mdp,
    obj: &Objective,
    tpl: &TreeTemplate,
    family: &ParamSet,
    cap: u128,
    eps: f64,
) -> Result<BruteForce, BenchError> {
    let size = family.size();
    if size > cap {
        return Err(BenchError::CapExceeded { size, cap });
    }
    let star = m.random_action().ok_or(crate::mdp::ModelError::RandomActionMissing)?;
    let dir = obj.direction();
    let n_inner = family
        .kinds()
        .iter()
        .take_while(|k| !matches!(k, ParamKind::Action(_)))
        .count();
    let leaves = tpl.topology().leaves();
    let mut leaf_slot = vec![usize::MAX; tpl.topology().len()];
    for (i, &l) in leaves.iter().enumerate() {
        leaf_slot[l] = i;
    }

    let mut memo: HashMap<Vec<ActionId>, f64> = HashMap::new();
    let mut best: Option<(f64, Parameterization)> = None;
    let mut prefix: Option<Vec<i64>> = None;
    let mut state_leaf: Vec<usize> = Vec::new();
    for f in family.iter() {
        if prefix.as_deref() != Some(&f.values[..n_inner]) {
            let t = tpl.instantiate(&f)?;
            state_leaf = (0..m.num_states())
                .map(|s| leaf_slot[t.leaf_of(m.valuation(s))])
                .collect();
            prefix = Some(f.values[..n_inner].to_vec());
        }
        let choices: Vec<ActionId> = (0..m.num_states())
            .map(|s| {
                let a = f.values[n_inner + state_leaf[s]] as ActionId;
                if m.is_enabled(s, a) {
                    a
                } else {
                    star
                }
            })
            .collect();
        let value = match memo.get(&choices) {
            Some(&v) => v,
            None => {
                let policy = Policy::from_choices(choices.iter().map(|&a| Some(a)).collect());
                let v = value_of_policy(m, &policy, obj, eps)?;
                memo.insert(choices, v);
                v
            }
        };
        let better = match &best {
            None => true,
            Some((b, _)) => match dir {
                Direction::Maximize => value > *b,
                Direction::Minimize => value < *b,
            },
        };
        if better {
            best = Some((value, f));
        }
    }
    let (value, params) = best.expect("families are nonempty");
    Ok(BruteForce {
        tree: tpl.instantiate(&params)?,
        params,
        value,
        distinct_policies: memo.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::line3;
    use crate::tree::full_template;

    #[test]
    fn line3_depth_zero_picks_right() {
        let m = line3().augment_random_action().unwrap();
        let obj = Objective::max_reach(&m);
        let (tpl, fam) = full_template(&m, 0).unwrap();
        let best = brute_force_best_tree(&m, &obj, &tpl, &fam, DEFAULT_CAP, 1e-6).unwrap();
        assert_eq!(best.tree, DecisionTree::leaf(0));
        assert!((best.value - 1.0).abs() < 1e-9);
        assert_eq!(best.distinct_policies, 3);
    }

    #[test]
    fn singleton_family() {
        let m = line3().augment_random_action().unwrap();
        let obj = Objective::max_reach(&m);
        let (tpl, fam) = full_template(&m, 0).unwrap();
        let single = fam.with_domain(0, vec![1]);
        let best = brute_force_best_tree(&m, &obj, &tpl, &single, DEFAULT_CAP, 1e-6).unwrap();
        assert_eq!(best.tree, DecisionTree::leaf(1));
        assert_eq!(best.value, 0.0);
    }

    #[test]
    fn cap_is_enforced() {
        let m = line3().augment_random_action().unwrap();
        let (tpl, fam) = full_template(&m, 2).unwrap();
        let err = brute_force_best_tree(&m, &Objective::max_reach(&m), &tpl, &fam, 10, 1e-6);
        assert!(matches!(err, Err(BenchError::CapExceeded { cap: 10, .. })));
    }
}
