use crate::mdp::{ModelDocument, TransitionEntry, Variable};
use crate::tree::{DecisionTree, Node, Predicate};

/// Failure probability of the wrong action where the returned tree plays it.
const CHEAP: f64 = 0.0005;
/// Failure probability of the wrong action elsewhere.
const COSTLY: f64 = 0.05;
const CHEAP_STATES: [usize; 10] = [1, 2, 5, 6, 7, 10, 11, 12, 15, 16];

/// A 20-state chain with a depth-3 tree that is larger than it needs to be.
///
/// `x = 0` is a sink, `x = 19` the goal and the walk starts at `x = 1`.
/// Both actions move to `x + 1`. The right action is `b` up to `x = 9` and
/// `a` above; the wrong one falls into the sink with probability 0.05, or
/// 0.0005 in the states where the returned tree plays it. That tree
/// switches actions eight times, so no sibling leaves can be merged, yet
/// the single split `x <= 9` is better.
pub fn reduction_fixture() -> (ModelDocument, DecisionTree) {
    let n = 20;
    let mut transitions = Vec::new();
    for x in 0..n {
        for a in 0..2 {
            let dist = if x == 0 || x == n - 1 {
                vec![(x, 1.0)]
            } else {
                let wrong = (a == 0) != (x > 9);
                if wrong {
                    let loss = if CHEAP_STATES.contains(&x) { CHEAP } else { COSTLY };
                    vec![(0, loss), (x + 1, 1.0 - loss)]
                } else {
                    vec![(x + 1, 1.0)]
                }
            };
            transitions.push(TransitionEntry {
                state: x,
                action: a,
                dist,
            });
        }
    }
    let doc = ModelDocument {
        variables: vec![Variable {
            name: "x".into(),
            min: 0,
            max: n as i64 - 1,
        }],
        states: (0..n as i64).map(|x| vec![x]).collect(),
        initial: 1,
        actions: vec!["a".into(), "b".into()],
        enabled: vec![vec![0, 1]; n],
        transitions,
        goal: vec![n - 1],
        rewards: None,
        discount: None,
    };

    let inner = |bound, left, right| Node::Inner {
        pred: Predicate { var: 0, bound },
        left,
        right,
    };
    let leaf = |action| Node::Leaf { action };
    let nodes = vec![
        inner(9, 1, 2),
        inner(4, 3, 4),
        inner(14, 5, 6),
        inner(2, 7, 8),
        inner(7, 9, 10),
        inner(12, 11, 12),
        inner(16, 13, 14),
        leaf(0),
        leaf(1),
        leaf(0),
        leaf(1),
        leaf(1),
        leaf(0),
        leaf(1),
        leaf(0),
    ];
    (doc, DecisionTree::new(nodes, 0).expect("well-formed"))
}
