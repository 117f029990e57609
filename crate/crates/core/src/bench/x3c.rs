use super::BenchError;
use crate::mdp::{ModelDocument, Policy, TransitionEntry, Variable};

/// An exact-cover-by-3-sets instance over `U = {1, ..., universe}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct X3cInstance {
    pub universe: usize,
    pub sets: Vec<[usize; 3]>,
}

impl X3cInstance {
    fn validate(&self) -> Result<(), BenchError> {
        let n = self.universe;
        if n == 0 || n % 3 != 0 {
            return Err(BenchError::BadSpec(format!("universe size {n} is not a positive multiple of 3")));
        }
        for (i, t) in self.sets.iter().enumerate() {
            let mut sorted = *t;
            sorted.sort_unstable();
            if sorted[0] == sorted[1] || sorted[1] == sorted[2] || sorted[0] < 1 || sorted[2] > n {
                return Err(BenchError::BadSpec(format!("set {i} {t:?} is not a 3-subset of 1..={n}")));
            }
        }
        Ok(())
    }

    /// Depth at which trees can separate the chain states iff an exact cover
    /// exists.
    pub fn depth(&self) -> usize {
        self.universe / 3 + 2
    }
}

/// The MDP of the X3C reduction. States `1, ..., n + 4` get indices
/// `0, ..., n + 3` and the sink gets index `n + 4`. In each state
/// `s <= n + 3` action `a_s` moves to `s + 1` and every other action to the
/// sink; `n + 4` is the goal. Goal and sink loop on every action.
///
/// Variables are `T1..Tj` (membership of the state's element in each set)
/// followed by one indicator per state.
pub fn gen_x3c(inst: &X3cInstance) -> Result<ModelDocument, BenchError> {
    inst.validate()?;
    let n = inst.universe;
    let states = n + 5;
    let (goal, sink) = (n + 3, n + 4);
    let actions = n + 3;
    let mut variables: Vec<Variable> = (1..=inst.sets.len())
        .map(|i| Variable {
            name: format!("T{i}"),
            min: 0,
            max: 1,
        })
        .collect();
    variables.extend((1..=n + 4).map(|i| Variable {
        name: format!("s{i}"),
        min: 0,
        max: 1,
    }));
    variables.push(Variable {
        name: "sink".into(),
        min: 0,
        max: 1,
    });
    let valuations = (0..states)
        .map(|s| {
            let element = s + 1;
            let mut val: Vec<i64> = inst
                .sets
                .iter()
                .map(|t| i64::from(s < n && t.contains(&element)))
                .collect();
            val.extend((0..states).map(|v| i64::from(v == s)));
            val
        })
        .collect();
    let mut transitions = Vec::new();
    for s in 0..states {
        for a in 0..actions {
            let target = if s == goal || s == sink {
                s
            } else if a == s {
                s + 1
            } else {
                sink
            };
            transitions.push(TransitionEntry {
                state: s,
                action: a,
                dist: vec![(target, 1.0)],
            });
        }
    }
    Ok(ModelDocument {
        variables,
        states: valuations,
        initial: 0,
        actions: (1..=actions).map(|a| format!("a{a}")).collect(),
        enabled: vec![(0..actions).collect(); states],
        transitions,
        goal: vec![goal],
        rewards: None,
        discount: None,
    })
}

/// The policy that walks the chain to the goal: action `a_s` in every state
/// `s <= n + 3`, undefined in the goal and the sink.
pub fn x3c_chain_policy(inst: &X3cInstance) -> Policy {
    let n = inst.universe;
    Policy::from_choices((0..n + 5).map(|s| (s < n + 3).then_some(s)).collect())
}

/// Whether some subcollection covers every element exactly once, by
/// exhaustive backtracking.
pub fn exact_cover_exists(inst: &X3cInstance) -> bool {
    fn go(sets: &[[usize; 3]], covered: &mut Vec<bool>) -> bool {
        let Some(e) = (1..covered.len()).find(|&e| !covered[e]) else {
            return true;
        };
        for t in sets.iter().filter(|t| t.contains(&e)) {
            if t.iter().all(|&x| !covered[x]) {
                t.iter().for_each(|&x| covered[x] = true);
                if go(sets, covered) {
                    return true;
                }
                t.iter().for_each(|&x| covered[x] = false);
            }
        }
        false
    }
    go(&inst.sets, &mut vec![false; inst.universe + 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::Mdp;

    #[test]
    fn smallest_instance_has_eight_states() {
        let inst = X3cInstance {
            universe: 3,
            sets: vec![[1, 2, 3]],
        };
        let m = Mdp::from_document(&gen_x3c(&inst).unwrap()).unwrap();
        assert_eq!(m.num_states(), 8);
        assert_eq!(m.num_actions(), 6);
        assert_eq!(m.goal_states(), vec![6]);
        assert_eq!(m.valuation(0)[0], 1);
        assert_eq!(m.valuation(3)[0], 0);
        assert_eq!(m.choice(2, 2).unwrap().dist, vec![(3, 1.0)]);
        assert_eq!(m.choice(2, 1).unwrap().dist, vec![(7, 1.0)]);
        assert_eq!(inst.depth(), 3);
    }

    #[test]
    fn cover_search() {
        let yes = X3cInstance {
            universe: 6,
            sets: vec![[1, 2, 3], [4, 5, 6]],
        };
        let no = X3cInstance {
            universe: 6,
            sets: vec![[1, 2, 3], [1, 2, 4], [1, 2, 5]],
        };
        assert!(exact_cover_exists(&yes));
        assert!(!exact_cover_exists(&no));
        assert!(exact_cover_exists(&X3cInstance {
            universe: 0,
            sets: vec![]
        }));
    }

    #[test]
    fn malformed_sets_are_rejected() {
        for sets in [vec![[1, 1, 2]], vec![[0, 1, 2]], vec![[1, 2, 7]]] {
            assert!(gen_x3c(&X3cInstance { universe: 6, sets }).is_err());
        }
        assert!(gen_x3c(&X3cInstance { universe: 4, sets: vec![] }).is_err());
    }
}
