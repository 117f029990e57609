#![allow(dead_code)]

use dtsynth::mdp::{Mdp, Policy};
use dtsynth::tree::{DecisionTree, Node, Predicate};
use rand::Rng;

/// Reachability probabilities of the chain induced by `policy`, by graph
/// analysis plus Gaussian elimination. Independent of the crate's value
/// iteration.
pub fn exact_reach(m: &Mdp, policy: &Policy) -> Vec<f64> {
    let n = m.num_states();
    let succ: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|s| {
            let a = policy.get(s).expect("total policy");
            m.choice(s, a).expect("enabled").dist.clone()
        })
        .collect();

    // States that can reach the goal at all.
    let mut can = m.goal_mask().to_vec();
    loop {
        let mut changed = false;
        for s in 0..n {
            if !can[s] && succ[s].iter().any(|&(t, _)| can[t]) {
                can[s] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let unknown: Vec<usize> = (0..n).filter(|&s| can[s] && !m.is_goal(s)).collect();
    let mut index = vec![usize::MAX; n];
    for (i, &s) in unknown.iter().enumerate() {
        index[s] = i;
    }
    let k = unknown.len();
    let mut a = vec![vec![0.0; k + 1]; k];
    for (i, &s) in unknown.iter().enumerate() {
        a[i][i] += 1.0;
        for &(t, p) in &succ[s] {
            if m.is_goal(t) {
                a[i][k] += p;
            } else if can[t] {
                a[i][index[t]] -= p;
            }
        }
    }
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        let d = a[col][col];
        for j in col..=k {
            a[col][j] /= d;
        }
        for r in 0..k {
            if r != col && a[r][col] != 0.0 {
                let f = a[r][col];
                for j in col..=k {
                    a[r][j] -= f * a[col][j];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for s in 0..n {
        if m.is_goal(s) {
            x[s] = 1.0;
        } else if can[s] {
            x[s] = a[index[s]][k];
        }
    }
    x
}

/// A random tree of depth at most `max_depth` over the variables of `m`,
/// with bounds drawn slightly beyond the observed range and leaves over
/// every action of `m`.
pub fn random_tree(rng: &mut impl Rng, m: &Mdp, max_depth: usize) -> DecisionTree {
    fn grow(rng: &mut impl Rng, m: &Mdp, depth: usize, lo: i64, hi: i64, nodes: &mut Vec<Node>) -> usize {
        let id = nodes.len();
        if depth == 0 || rng.gen_bool(0.25) {
            nodes.push(Node::Leaf {
                action: rng.gen_range(0..m.num_actions()),
            });
            return id;
        }
        nodes.push(Node::Leaf { action: 0 });
        let pred = Predicate {
            var: rng.gen_range(0..m.variables().len()),
            bound: rng.gen_range(lo - 1..=hi + 1),
        };
        let left = grow(rng, m, depth - 1, lo, hi, nodes);
        let right = grow(rng, m, depth - 1, lo, hi, nodes);
        nodes[id] = Node::Inner { pred, left, right };
        id
    }
    let values = m.valuations().iter().flatten().copied();
    let lo = values.clone().min().unwrap();
    let hi = values.max().unwrap();
    let mut nodes = Vec::new();
    let root = grow(rng, m, max_depth, lo, hi, &mut nodes);
    DecisionTree::new(nodes, root).unwrap()
}
