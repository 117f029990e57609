//! Model generators and the brute-force oracle.

mod fixtures;
mod gridworld;
mod oracle;
mod random;
mod x3c;

use thiserror::Error;

use crate::checker::CheckError;
use crate::mdp::{Mdp, ModelDocument, ModelError, TransitionEntry, Variable};
use crate::tree::TreeError;

pub use fixtures::reduction_fixture;
pub use gridworld::{gen_gridworld, GridObjective, GridworldSpec, MOVES};
pub use oracle::{brute_force_best_tree, BruteForce, DEFAULT_CAP};
pub use random::{gen_random_mdp, RandomMdpSpec};
pub use x3c::{exact_cover_exists, gen_x3c, x3c_chain_policy, X3cInstance};

#[derive(Debug, Error, PartialEq)]
pub enum BenchError {
    #[error("invalid generator input: {0}")]
    BadSpec(String),
    #[error("{states} distinct valuations requested but only {available} exist")]
    Infeasible { states: usize, available: u128 },
    #[error("family has {size} members, above the enumeration cap {cap}")]
    CapExceeded { size: u128, cap: u128 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// Three states `x = 0, 1, 2` with actions `right` (to `min(x + 1, 2)`) and
/// `reset` (to `x = 0`); the goal is `x = 2`.
pub fn line3_document() -> ModelDocument {
    let mut transitions = Vec::new();
    for s in 0..3 {
        transitions.push(TransitionEntry {
            state: s,
            action: 0,
            dist: vec![((s + 1).min(2), 1.0)],
        });
        transitions.push(TransitionEntry {
            state: s,
            action: 1,
            dist: vec![(0, 1.0)],
        });
    }
    ModelDocument {
        variables: vec![Variable {
            name: "x".into(),
            min: 0,
            max: 2,
        }],
        states: vec![vec![0], vec![1], vec![2]],
        initial: 0,
        actions: vec!["right".into(), "reset".into()],
        enabled: vec![vec![0, 1]; 3],
        transitions,
        goal: vec![2],
        rewards: None,
        discount: None,
    }
}

pub fn line3() -> Mdp {
    Mdp::from_document(&line3_document()).expect("line3 is well-formed")
}
