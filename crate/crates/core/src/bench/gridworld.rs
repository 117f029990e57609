use std::collections::BTreeMap;

use super::BenchError;
use crate::mdp::{ModelDocument, RewardEntry, TransitionEntry, Variable};

/// Move actions in action-index order, as `(label, dx, dy)`. `up`
/// increases `y`.
pub const MOVES: [(&str, i64, i64); 4] = [("up", 0, 1), ("down", 0, -1), ("left", -1, 0), ("right", 1, 0)];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridObjective {
    /// No rewards; the exit is the goal.
    Reach,
    /// Reward 1 for every step taken outside the exit.
    ExpectedSteps,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridworldSpec {
    pub width: i64,
    pub height: i64,
    /// Blocked cells.
    pub walls: Vec<(i64, i64)>,
    /// Walls between two adjacent cells.
    pub wall_edges: Vec<((i64, i64), (i64, i64))>,
    pub initial: (i64, i64),
    pub exit: (i64, i64),
    /// Probability of moving to one of the two orthogonal neighbours
    /// instead, split evenly.
    pub slip: f64,
    pub objective: GridObjective,
}

impl GridworldSpec {
    /// Open grid starting at `(0, 0)` with the expected-steps objective.
    pub fn open(width: i64, height: i64, exit: (i64, i64), slip: f64) -> GridworldSpec {
        GridworldSpec {
            width,
            height,
            walls: Vec::new(),
            wall_edges: Vec::new(),
            initial: (0, 0),
            exit,
            slip,
            objective: GridObjective::ExpectedSteps,
        }
    }
}

/// A grid maze. States are the free cells in row-major order (`y` major);
/// a move that would leave the grid, enter a blocked cell or cross a wall
/// keeps the agent in place. The exit is absorbing.
pub fn gen_gridworld(spec: &GridworldSpec) -> Result<ModelDocument, BenchError> {
    let bad = |msg: String| Err(BenchError::BadSpec(msg));
    if spec.width < 1 || spec.height < 1 {
        return bad(format!("grid {}x{} is empty", spec.width, spec.height));
    }
    if !(0.0..1.0).contains(&spec.slip) {
        return bad(format!("slip {} outside [0, 1)", spec.slip));
    }
    let inside = |(x, y): (i64, i64)| (0..spec.width).contains(&x) && (0..spec.height).contains(&y);
    for (what, cell) in [("exit", spec.exit), ("initial cell", spec.initial)] {
        if !inside(cell) {
            return bad(format!("{what} {cell:?} outside the grid"));
        }
        if spec.walls.contains(&cell) {
            return bad(format!("{what} {cell:?} is blocked"));
        }
    }
    let mut index = BTreeMap::new();
    let mut cells = Vec::new();
    for y in 0..spec.height {
        for x in 0..spec.width {
            if !spec.walls.contains(&(x, y)) {
                index.insert((x, y), cells.len());
                cells.push((x, y));
            }
        }
    }
    let blocked_edge = |a: (i64, i64), b: (i64, i64)| {
        spec.wall_edges.iter().any(|&(p, q)| (p, q) == (a, b) || (p, q) == (b, a))
    };
    let step = |from: (i64, i64), (dx, dy): (i64, i64)| -> usize {
        let to = (from.0 + dx, from.1 + dy);
        match index.get(&to) {
            Some(&t) if !blocked_edge(from, to) => t,
            _ => index[&from],
        }
    };

    let goal = index[&spec.exit];
    let mut transitions = Vec::new();
    let mut rewards = Vec::new();
    for (s, &cell) in cells.iter().enumerate() {
        for (a, &(_, dx, dy)) in MOVES.iter().enumerate() {
            let mut dist: BTreeMap<usize, f64> = BTreeMap::new();
            if s == goal {
                dist.insert(s, 1.0);
            } else {
                *dist.entry(step(cell, (dx, dy))).or_default() += 1.0 - spec.slip;
                if spec.slip > 0.0 {
                    for side in [(dy, dx), (-dy, -dx)] {
                        *dist.entry(step(cell, side)).or_default() += spec.slip / 2.0;
                    }
                }
            }
            transitions.push(TransitionEntry {
                state: s,
                action: a,
                dist: dist.into_iter().collect(),
            });
            if spec.objective == GridObjective::ExpectedSteps {
                rewards.push(RewardEntry {
                    state: s,
                    action: a,
                    value: if s == goal { 0.0 } else { 1.0 },
                });
            }
        }
    }
    Ok(ModelDocument {
        variables: vec![
            Variable {
                name: "x".into(),
                min: 0,
                max: spec.width - 1,
            },
            Variable {
                name: "y".into(),
                min: 0,
                max: spec.height - 1,
            },
        ],
        states: cells.iter().map(|&(x, y)| vec![x, y]).collect(),
        initial: index[&spec.initial],
        actions: MOVES.iter().map(|m| m.0.to_string()).collect(),
        enabled: vec![(0..MOVES.len()).collect(); cells.len()],
        transitions,
        goal: vec![goal],
        rewards: (spec.objective == GridObjective::ExpectedSteps).then_some(rewards),
        discount: None,
    })
}
