//! Value iteration for reachability, expected reward and discounted reward
//! objectives, with optimal policy extraction and policy evaluation.

use std::collections::VecDeque;

use thiserror::Error;

use crate::mdp::{ActionId, Mdp, ModelError, Policy, StateId};

pub const DEFAULT_EPS: f64 = 1e-6;

/// Sweep limit for each value-iteration phase.
const MAX_SWEEPS: usize = 10_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum CheckError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("goal state {0} out of range")]
    BadGoal(StateId),
    #[error("discount {0} outside (0, 1)")]
    BadDiscount(f64),
    #[error("tolerance {0} must be positive")]
    BadTolerance(f64),
    #[error("expected-reward objective needs nonnegative rewards; state {state}, action {action} has {reward}")]
    NegativeReward {
        state: StateId,
        action: ActionId,
        reward: f64,
    },
    #[error("normalization undefined: optimal value {optimal} and random value {random} coincide or are not finite")]
    UndefinedNormalization { optimal: f64, random: f64 },
    #[error("value {0} is not finite")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Maximize,
    Minimize,
}

impl Direction {
    /// Whether `a` is strictly better than `b` by more than `slack`.
    pub fn improves(self, a: f64, b: f64, slack: f64) -> bool {
        match self {
            Direction::Maximize => a > b + slack,
            Direction::Minimize => a < b - slack,
        }
    }

    pub fn worst(self) -> f64 {
        match self {
            Direction::Maximize => f64::NEG_INFINITY,
            Direction::Minimize => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// Maximal probability of eventually reaching `goal`.
    MaxReachProbability { goal: Vec<StateId> },
    /// Minimal expected total reward until `goal` is reached. States that
    /// cannot reach `goal` almost surely have value `+inf`.
    MinExpectedReward { goal: Vec<StateId> },
    /// Maximal expected discounted total reward.
    MaxDiscountedReward { discount: f64 },
}

impl Objective {
    pub fn max_reach(m: &Mdp) -> Objective {
        Objective::MaxReachProbability {
            goal: m.goal_states(),
        }
    }

    pub fn min_expected_reward(m: &Mdp) -> Objective {
        Objective::MinExpectedReward {
            goal: m.goal_states(),
        }
    }

    pub fn direction(&self) -> Direction {
        match self {
            Objective::MinExpectedReward { .. } => Direction::Minimize,
            _ => Direction::Maximize,
        }
    }

    pub fn goal(&self) -> Option<&[StateId]> {
        match self {
            Objective::MaxReachProbability { goal } | Objective::MinExpectedReward { goal } => {
                Some(goal)
            }
            Objective::MaxDiscountedReward { .. } => None,
        }
    }

    pub(crate) fn goal_mask(&self, n: usize) -> Result<Vec<bool>, CheckError> {
        let mut mask = vec![false; n];
        for &g in self.goal().unwrap_or(&[]) {
            *mask.get_mut(g).ok_or(CheckError::BadGoal(g))? = true;
        }
        Ok(mask)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub values: Vec<f64>,
    pub policy: Policy,
    pub value_at_initial: f64,
}

/// Computes optimal values and an optimal policy.
///
/// Iteration stops once the sup-norm change of a sweep is at most `eps`,
/// then continues until it is at most `eps * 1e-3`. Ties between optimal
/// actions go to the smallest action index; for goal-based objectives the
/// tie-break is restricted to actions that make progress towards the goal.
pub fn check(m: &Mdp, obj: &Objective, eps: f64) -> Result<CheckResult, CheckError> {
    check_traced(m, obj, eps, &mut |_| {})
}

pub(crate) fn check_traced(
    m: &Mdp,
    obj: &Objective,
    eps: f64,
    trace: &mut dyn FnMut(&[f64]),
) -> Result<CheckResult, CheckError> {
    if !(eps > 0.0) {
        return Err(CheckError::BadTolerance(eps));
    }
    let (values, policy) = match obj {
        Objective::MaxReachProbability { .. } => {
            let goal = obj.goal_mask(m.num_states())?;
            max_reach(m, &goal, eps, trace)
        }
        Objective::MinExpectedReward { .. } => {
            let goal = obj.goal_mask(m.num_states())?;
            min_reward(m, &goal, eps, trace)?
        }
        Objective::MaxDiscountedReward { discount } => {
            if !(*discount > 0.0 && *discount < 1.0) {
                return Err(CheckError::BadDiscount(*discount));
            }
            discounted(m, *discount, eps, trace)
        }
    };
    Ok(CheckResult {
        value_at_initial: values[m.initial()],
        values,
        policy,
    })
}

/// Value of `policy` from the initial state.
pub fn value_of_policy(
    m: &Mdp,
    policy: &Policy,
    obj: &Objective,
    eps: f64,
) -> Result<f64, CheckError> {
    let chain = m.induced_chain(policy)?;
    Ok(check(&chain, obj, eps)?.value_at_initial)
}

/// Runs value iteration in place (Gauss-Seidel) on the states in `order`
/// until the change drops below `eps`, then below `eps * 1e-3`.
fn iterate(
    values: &mut [f64],
    order: &[StateId],
    eps: f64,
    trace: &mut dyn FnMut(&[f64]),
    mut backup: impl FnMut(StateId, &[f64]) -> f64,
) {
    for threshold in [eps, eps * 1e-3] {
        for _ in 0..MAX_SWEEPS {
            let mut delta: f64 = 0.0;
            for &s in order {
                let v = backup(s, values);
                let d = (v - values[s]).abs();
                if d > delta {
                    delta = d;
                }
                values[s] = v;
            }
            trace(values);
            if delta <= threshold {
                break;
            }
        }
    }
}

fn expectation(dist: &[(StateId, f64)], values: &[f64]) -> f64 {
    dist.iter().map(|&(t, p)| p * values[t]).sum()
}

/// States from which `target` is reachable with positive probability, using
/// only the allowed choices.
fn backward_reach(m: &Mdp, target: &[bool], allowed: &dyn Fn(StateId, ActionId) -> bool) -> Vec<bool> {
    let n = m.num_states();
    let mut preds: Vec<Vec<StateId>> = vec![Vec::new(); n];
    for s in 0..n {
        for c in m.choices(s) {
            if allowed(s, c.action) {
                for &(t, _) in &c.dist {
                    preds[t].push(s);
                }
            }
        }
    }
    let mut seen = target.to_vec();
    let mut queue: VecDeque<StateId> = (0..n).filter(|&s| target[s]).collect();
    while let Some(t) = queue.pop_front() {
        for &s in &preds[t] {
            if !seen[s] {
                seen[s] = true;
                queue.push_back(s);
            }
        }
    }
    seen
}

/// States that can reach the goal with probability one under some policy,
/// together with the actions that keep the play inside that set.
fn prob1_states(m: &Mdp, goal: &[bool]) -> Vec<bool> {
    let n = m.num_states();
    let mut inside = vec![true; n];
    loop {
        let stays = |s: StateId, a: ActionId| {
            m.choice(s, a)
                .map(|c| c.dist.iter().all(|&(t, _)| inside[t]))
                .unwrap_or(false)
        };
        let reach = backward_reach(m, goal, &|s, a| inside[s] && stays(s, a));
        let next: Vec<bool> = (0..n).map(|s| inside[s] && reach[s]).collect();
        if next == inside {
            return inside;
        }
        inside = next;
    }
}

/// Picks, per state, the smallest near-optimal action that moves closer to
/// the goal in the backward attractor of near-optimal actions.
fn attractor_policy(
    m: &Mdp,
    goal: &[bool],
    candidates: &[Vec<ActionId>],
) -> Vec<Option<ActionId>> {
    let n = m.num_states();
    let mut ranked = goal.to_vec();
    let mut choice: Vec<Option<ActionId>> = vec![None; n];
    loop {
        let mut layer = Vec::new();
        for s in 0..n {
            if ranked[s] {
                continue;
            }
            let progress = candidates[s].iter().copied().find(|&a| {
                m.choice(s, a)
                    .expect("candidate actions are enabled")
                    .dist
                    .iter()
                    .any(|&(t, _)| ranked[t])
            });
            if let Some(a) = progress {
                layer.push((s, a));
            }
        }
        if layer.is_empty() {
            break;
        }
        for (s, a) in layer {
            ranked[s] = true;
            choice[s] = Some(a);
        }
    }
    choice
}

fn max_reach(
    m: &Mdp,
    goal: &[bool],
    eps: f64,
    trace: &mut dyn FnMut(&[f64]),
) -> (Vec<f64>, Policy) {
    let n = m.num_states();
    let can_reach = backward_reach(m, goal, &|_, _| true);
    let mut values: Vec<f64> = (0..n).map(|s| if goal[s] { 1.0 } else { 0.0 }).collect();
    let order: Vec<StateId> = (0..n).filter(|&s| !goal[s] && can_reach[s]).collect();
    iterate(&mut values, &order, eps, trace, |s, v| {
        m.choices(s)
            .iter()
            .map(|c| expectation(&c.dist, v))
            .fold(0.0, f64::max)
    });

    let tol = eps * 1e-2;
    let candidates: Vec<Vec<ActionId>> = (0..n)
        .map(|s| near_optimal(m, s, &values, tol, Direction::Maximize, false, |_| true))
        .collect();
    let ranked = attractor_policy(m, goal, &candidates);
    let choice = (0..n)
        .map(|s| {
            if goal[s] || values[s] <= 0.0 {
                Some(m.choices(s)[0].action)
            } else {
                ranked[s].or(candidates[s].first().copied())
            }
        })
        .collect();
    (values, Policy::from_choices(choice))
}

/// Actions within `tol` of the best Q-value; rewards count only if
/// `rewards` is set.
fn near_optimal(
    m: &Mdp,
    s: StateId,
    values: &[f64],
    tol: f64,
    dir: Direction,
    rewards: bool,
    allowed: impl Fn(ActionId) -> bool,
) -> Vec<ActionId> {
    let q: Vec<(ActionId, f64)> = m
        .choices(s)
        .iter()
        .filter(|c| allowed(c.action))
        .map(|c| {
            let r = if rewards { c.reward } else { 0.0 };
            (c.action, r + expectation(&c.dist, values))
        })
        .collect();
    let best = q
        .iter()
        .map(|&(_, x)| x)
        .fold(dir.worst(), |acc, x| if dir.improves(x, acc, 0.0) { x } else { acc });
    q.into_iter()
        .filter(|&(_, x)| !dir.improves(best, x, tol))
        .map(|(a, _)| a)
        .collect()
}

fn min_reward(
    m: &Mdp,
    goal: &[bool],
    eps: f64,
    trace: &mut dyn FnMut(&[f64]),
) -> Result<(Vec<f64>, Policy), CheckError> {
    let n = m.num_states();
    for s in 0..n {
        if goal[s] {
            continue;
        }
        for c in m.choices(s) {
            if c.reward < 0.0 {
                return Err(CheckError::NegativeReward {
                    state: s,
                    action: c.action,
                    reward: c.reward,
                });
            }
        }
    }
    let proper = prob1_states(m, goal);
    let stays = |s: StateId, a: ActionId| {
        m.choice(s, a)
            .is_some_and(|c| c.dist.iter().all(|&(t, _)| proper[t]))
    };
    let mut values: Vec<f64> = (0..n)
        .map(|s| if proper[s] { 0.0 } else { f64::INFINITY })
        .collect();
    let order: Vec<StateId> = (0..n).filter(|&s| proper[s] && !goal[s]).collect();
    iterate(&mut values, &order, eps, trace, |s, v| {
        m.choices(s)
            .iter()
            .filter(|c| stays(s, c.action))
            .map(|c| c.reward + expectation(&c.dist, v))
            .fold(f64::INFINITY, f64::min)
    });

    let tol = eps * 1e-2;
    let candidates: Vec<Vec<ActionId>> = (0..n)
        .map(|s| {
            if proper[s] {
                near_optimal(m, s, &values, tol, Direction::Minimize, true, |a| stays(s, a))
            } else {
                Vec::new()
            }
        })
        .collect();
    let ranked = attractor_policy(m, goal, &candidates);
    let choice = (0..n)
        .map(|s| {
            if goal[s] || !proper[s] {
                Some(m.choices(s)[0].action)
            } else {
                ranked[s].or(candidates[s].first().copied())
            }
        })
        .collect();
    Ok((values, Policy::from_choices(choice)))
}

fn discounted(
    m: &Mdp,
    gamma: f64,
    eps: f64,
    trace: &mut dyn FnMut(&[f64]),
) -> (Vec<f64>, Policy) {
    let n = m.num_states();
    let mut values = vec![0.0; n];
    let order: Vec<StateId> = (0..n).collect();
    let stop = eps * (1.0 - gamma) / gamma;
    iterate(&mut values, &order, stop, trace, |s, v| {
        m.choices(s)
            .iter()
            .map(|c| c.reward + gamma * expectation(&c.dist, v))
            .fold(f64::NEG_INFINITY, f64::max)
    });
    let choice = (0..n)
        .map(|s| {
            let mut best: Option<(ActionId, f64)> = None;
            for c in m.choices(s) {
                let q = c.reward + gamma * expectation(&c.dist, &values);
                if best.map_or(true, |(_, b)| q > b + stop) {
                    best = Some((c.action, q));
                }
            }
            best.map(|(a, _)| a)
        })
        .collect();
    (values, Policy::from_choices(choice))
}

/// Maps values affinely so that the uniform random policy scores 0 and an
/// optimal policy scores 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalizer {
    pub optimal: f64,
    pub random: f64,
}

impl Normalizer {
    /// Computes both reference values. The random baseline plays the random
    /// action everywhere, adding it to the model first if necessary.
    pub fn new(m: &Mdp, obj: &Objective, eps: f64) -> Result<Normalizer, CheckError> {
        let optimal = check(m, obj, eps)?.value_at_initial;
        let augmented;
        let model = match m.random_action() {
            Some(_) => m,
            None => {
                augmented = m.augment_random_action()?;
                &augmented
            }
        };
        let star = model.random_action().expect("augmented");
        let random = value_of_policy(
            model,
            &Policy::constant(model.num_states(), star),
            obj,
            eps,
        )?;
        let out = Normalizer { optimal, random };
        out.denominator()?;
        Ok(out)
    }

    fn denominator(&self) -> Result<f64, CheckError> {
        let d = self.optimal - self.random;
        if !d.is_finite() || d.abs() < 1e-12 {
            return Err(CheckError::UndefinedNormalization {
                optimal: self.optimal,
                random: self.random,
            });
        }
        Ok(d)
    }

    pub fn normalize(&self, v: f64) -> Result<f64, CheckError> {
        if !v.is_finite() {
            return Err(CheckError::NonFinite(v));
        }
        // Adding zero turns -0.0 into 0.0.
        Ok((v - self.random) / self.denominator()? + 0.0)
    }
}

/// `(v - V(random)) / (V(optimal) - V(random))`.
pub fn normalized_value(m: &Mdp, obj: &Objective, v: f64, eps: f64) -> Result<f64, CheckError> {
    Normalizer::new(m, obj, eps)?.normalize(v)
}
