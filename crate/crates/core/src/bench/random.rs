use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::BenchError;
use crate::mdp::{ModelDocument, RewardEntry, TransitionEntry, Variable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomMdpSpec {
    pub seed: u64,
    pub states: usize,
    pub variables: usize,
    pub actions: usize,
    /// Successors per state-action pair (capped by the state count).
    pub branching: usize,
    /// Variables range over `0..range`; `None` picks the smallest range
    /// (at least 2) that fits the state count.
    pub range: Option<i64>,
}

impl RandomMdpSpec {
    pub fn new(seed: u64, states: usize, variables: usize, actions: usize, branching: usize) -> Self {
        RandomMdpSpec {
            seed,
            states,
            variables,
            actions,
            branching,
            range: None,
        }
    }
}

fn capacity(range: i64, vars: usize) -> u128 {
    (0..vars).fold(1u128, |acc, _| acc.saturating_mul(range as u128))
}

/// A random MDP with distinct valuations, deterministic in the seed. State 0
/// is initial; between one and a quarter of the other states are goals.
/// Every pair has a positive reward.
pub fn gen_random_mdp(spec: &RandomMdpSpec) -> Result<ModelDocument, BenchError> {
    let RandomMdpSpec {
        seed,
        states: n,
        variables: nv,
        actions: na,
        branching,
        range,
    } = *spec;
    if n == 0 || nv == 0 || na == 0 || branching == 0 {
        return Err(BenchError::BadSpec("sizes must be positive".into()));
    }
    let range = match range {
        Some(r) if r < 1 => return Err(BenchError::BadSpec(format!("range {r} must be positive"))),
        Some(r) => r,
        None => (2..).find(|&r| capacity(r, nv) >= n as u128).expect("grows without bound"),
    };
    let available = capacity(range, nv);
    if (n as u128) > available {
        return Err(BenchError::Infeasible {
            states: n,
            available,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut seen = BTreeSet::new();
    let mut states = Vec::with_capacity(n);
    if available <= 4 * n as u128 {
        let mut all: Vec<Vec<i64>> = vec![vec![]];
        for _ in 0..nv {
            all = all
                .into_iter()
                .flat_map(|p| {
                    (0..range).map(move |v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        all.shuffle(&mut rng);
        states = all.into_iter().take(n).collect();
    } else {
        while states.len() < n {
            let val: Vec<i64> = (0..nv).map(|_| rng.gen_range(0..range)).collect();
            if seen.insert(val.clone()) {
                states.push(val);
            }
        }
    }

    let mut goal: Vec<usize> = if n == 1 {
        vec![0]
    } else {
        let count = rng.gen_range(1..=((n - 1) / 4).max(1));
        let mut others: Vec<usize> = (1..n).collect();
        others.shuffle(&mut rng);
        others.truncate(count);
        others
    };
    goal.sort_unstable();

    let mut enabled = Vec::with_capacity(n);
    let mut transitions = Vec::new();
    let mut rewards = Vec::new();
    for s in 0..n {
        let mut acts: Vec<usize> = (0..na).filter(|_| rng.gen_bool(0.7)).collect();
        if acts.is_empty() {
            acts.push(rng.gen_range(0..na));
        }
        for &a in &acts {
            let k = branching.min(n);
            let mut succ: Vec<usize> = (0..n).collect();
            succ.shuffle(&mut rng);
            succ.truncate(k);
            succ.sort_unstable();
            let weights: Vec<u32> = (0..k).map(|_| rng.gen_range(1..=10)).collect();
            let total: u32 = weights.iter().sum();
            let dist = succ
                .into_iter()
                .zip(weights)
                .map(|(t, w)| (t, w as f64 / total as f64))
                .collect();
            transitions.push(TransitionEntry {
                state: s,
                action: a,
                dist,
            });
            rewards.push(RewardEntry {
                state: s,
                action: a,
                value: rng.gen_range(1..=4) as f64 / 2.0,
            });
        }
        enabled.push(acts);
    }

    Ok(ModelDocument {
        variables: (0..nv)
            .map(|i| Variable {
                name: format!("v{i}"),
                min: 0,
                max: range - 1,
            })
            .collect(),
        states,
        initial: 0,
        actions: (0..na).map(|a| format!("a{a}")).collect(),
        enabled,
        transitions,
        goal,
        rewards: Some(rewards),
        discount: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{parse_model, Mdp};

    #[test]
    fn deterministic_in_seed() {
        let spec = RandomMdpSpec::new(1, 10, 2, 3, 2);
        assert_eq!(
            gen_random_mdp(&spec).unwrap().to_json(),
            gen_random_mdp(&spec).unwrap().to_json()
        );
        let other = RandomMdpSpec { seed: 2, ..spec };
        assert_ne!(gen_random_mdp(&spec).unwrap(), gen_random_mdp(&other).unwrap());
    }

    #[test]
    fn single_state_is_an_absorbing_goal() {
        let doc = gen_random_mdp(&RandomMdpSpec::new(3, 1, 1, 2, 3)).unwrap();
        assert_eq!(doc.goal, vec![0]);
        for t in &doc.transitions {
            assert_eq!(t.dist, vec![(0, 1.0)]);
        }
    }

    #[test]
    fn infeasible_counts_are_rejected() {
        let spec = RandomMdpSpec {
            range: Some(2),
            ..RandomMdpSpec::new(0, 5, 2, 2, 2)
        };
        assert_eq!(
            gen_random_mdp(&spec).unwrap_err(),
            BenchError::Infeasible {
                states: 5,
                available: 4
            }
        );
    }

    #[test]
    fn many_seeds_are_valid_and_round_trip() {
        for seed in 0..500 {
            let spec = RandomMdpSpec::new(seed, 1 + seed as usize % 12, 1 + seed as usize % 3, 1 + seed as usize % 4, 1 + seed as usize % 3);
            let doc = gen_random_mdp(&spec).unwrap();
            let m = Mdp::from_document(&doc).unwrap();
            assert!(!m.goal_states().is_empty());
            let distinct: BTreeSet<_> = m.valuations().iter().collect();
            assert_eq!(distinct.len(), m.num_states());
            assert_eq!(parse_model(&m.to_document().to_json()).unwrap(), m);
        }
    }
}
