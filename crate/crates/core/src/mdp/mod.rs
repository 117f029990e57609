//! Explicit-state MDPs whose states are valuations of bounded integer
//! variables.

mod document;

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use document::{ModelDocument, RewardEntry, TransitionEntry};

pub type StateId = usize;
pub type ActionId = usize;

/// Label of the synthetic uniform-mixture action.
pub const RANDOM_ACTION_LABEL: &str = "__random__";

/// Tolerance on the total mass of a distribution.
pub const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("malformed model document: {0}")]
    Syntax(String),
    #[error("model has no states")]
    NoStates,
    #[error("variable `{name}`: empty range [{min}, {max}]")]
    EmptyRange { name: String, min: i64, max: i64 },
    #[error("duplicate variable name `{0}`")]
    DuplicateVariable(String),
    #[error("duplicate action label `{0}`")]
    DuplicateAction(String),
    #[error("states[{state}]: expected {expected} values, found {found}")]
    ValuationArity {
        state: StateId,
        expected: usize,
        found: usize,
    },
    #[error("states[{state}]: value {value} of `{var}` outside [{min}, {max}]")]
    ValueOutOfRange {
        state: StateId,
        var: String,
        value: i64,
        min: i64,
        max: i64,
    },
    #[error("initial state {0} out of range")]
    BadInitial(StateId),
    #[error("goal state {0} out of range")]
    BadGoal(StateId),
    #[error("enabled: expected {expected} entries, found {found}")]
    EnabledArity { expected: usize, found: usize },
    #[error("enabled[{state}]: no enabled actions")]
    NoActions { state: StateId },
    #[error("enabled[{state}]: action index {action} out of range")]
    BadAction { state: StateId, action: ActionId },
    #[error("enabled[{state}]: action {action} listed twice")]
    RepeatedAction { state: StateId, action: ActionId },
    #[error("transitions[{index}]: state {state} out of range")]
    BadTransitionState { index: usize, state: StateId },
    #[error("transitions[{index}]: action {action} is not enabled in state {state}")]
    TransitionNotEnabled {
        index: usize,
        state: StateId,
        action: ActionId,
    },
    #[error("transitions[{index}]: second transition for state {state}, action {action}")]
    DuplicateTransition {
        index: usize,
        state: StateId,
        action: ActionId,
    },
    #[error("transitions[{index}]: successor {target} out of range")]
    BadSuccessor { index: usize, target: StateId },
    #[error("transitions[{index}]: probability {prob} outside [0, 1]")]
    BadProbability { index: usize, prob: f64 },
    #[error("transitions[{index}] (state {state}, action {action}): distribution mass {mass} differs from 1")]
    Mass {
        index: usize,
        state: StateId,
        action: ActionId,
        mass: f64,
    },
    #[error("state {state}, action {action}: no transition given")]
    MissingTransition { state: StateId, action: ActionId },
    #[error("rewards[{index}]: state {state}, action {action} is not an enabled pair")]
    BadReward {
        index: usize,
        state: StateId,
        action: ActionId,
    },
    #[error("rewards[{index}]: value is not finite")]
    NonFiniteReward { index: usize },
    #[error("discount {0} outside (0, 1]")]
    BadDiscount(f64),
    #[error("action label `{RANDOM_ACTION_LABEL}` is already present")]
    RandomActionPresent,
    #[error("model has no `{RANDOM_ACTION_LABEL}` action")]
    RandomActionMissing,
    #[error("policy covers {found} states, model has {expected}")]
    PolicyArity { expected: usize, found: usize },
    #[error("policy chooses action {action} which is not enabled in state {state}")]
    PolicyNotEnabled { state: StateId, action: ActionId },
    #[error("policy is undefined in reachable non-goal state {state}")]
    PolicyUndefined { state: StateId },
    #[error("restriction leaves state {state} without actions")]
    EmptyRestriction { state: StateId },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub min: i64,
    pub max: i64,
}

/// One enabled action of a state with its distribution and reward.
#[derive(Debug, Clone, PartialEq)]
pub struct Choice {
    pub action: ActionId,
    /// Successors with positive probability, sorted by state.
    pub dist: Vec<(StateId, f64)>,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    variables: Vec<Variable>,
    valuations: Vec<Vec<i64>>,
    initial: StateId,
    actions: Vec<String>,
    choices: Vec<Vec<Choice>>,
    goal: Vec<bool>,
    has_rewards: bool,
    discount: Option<f64>,
}

/// Parses a JSON model document and validates it.
pub fn parse_model(text: &str) -> Result<Mdp, ModelError> {
    let doc = ModelDocument::from_json(text).map_err(|e| ModelError::Syntax(e.to_string()))?;
    Mdp::from_document(&doc)
}

impl Mdp {
    pub fn from_document(doc: &ModelDocument) -> Result<Mdp, ModelError> {
        let n = doc.states.len();
        if n == 0 {
            return Err(ModelError::NoStates);
        }
        let mut names = BTreeSet::new();
        for v in &doc.variables {
            if v.min > v.max {
                return Err(ModelError::EmptyRange {
                    name: v.name.clone(),
                    min: v.min,
                    max: v.max,
                });
            }
            if !names.insert(v.name.as_str()) {
                return Err(ModelError::DuplicateVariable(v.name.clone()));
            }
        }
        let mut labels = BTreeSet::new();
        for a in &doc.actions {
            if !labels.insert(a.as_str()) {
                return Err(ModelError::DuplicateAction(a.clone()));
            }
        }
        for (s, val) in doc.states.iter().enumerate() {
            if val.len() != doc.variables.len() {
                return Err(ModelError::ValuationArity {
                    state: s,
                    expected: doc.variables.len(),
                    found: val.len(),
                });
            }
            for (v, &x) in doc.variables.iter().zip(val) {
                if x < v.min || x > v.max {
                    return Err(ModelError::ValueOutOfRange {
                        state: s,
                        var: v.name.clone(),
                        value: x,
                        min: v.min,
                        max: v.max,
                    });
                }
            }
        }
        if doc.initial >= n {
            return Err(ModelError::BadInitial(doc.initial));
        }
        let mut goal = vec![false; n];
        for &g in &doc.goal {
            if g >= n {
                return Err(ModelError::BadGoal(g));
            }
            goal[g] = true;
        }
        if doc.enabled.len() != n {
            return Err(ModelError::EnabledArity {
                expected: n,
                found: doc.enabled.len(),
            });
        }
        let mut enabled = Vec::with_capacity(n);
        for (s, acts) in doc.enabled.iter().enumerate() {
            if acts.is_empty() {
                return Err(ModelError::NoActions { state: s });
            }
            let mut sorted = acts.clone();
            sorted.sort_unstable();
            for w in sorted.windows(2) {
                if w[0] == w[1] {
                    return Err(ModelError::RepeatedAction {
                        state: s,
                        action: w[0],
                    });
                }
            }
            if let Some(&a) = sorted.iter().find(|&&a| a >= doc.actions.len()) {
                return Err(ModelError::BadAction { state: s, action: a });
            }
            enabled.push(sorted);
        }

        let mut dists: HashMap<(StateId, ActionId), Vec<(StateId, f64)>> = HashMap::new();
        for (index, t) in doc.transitions.iter().enumerate() {
            if t.state >= n {
                return Err(ModelError::BadTransitionState {
                    index,
                    state: t.state,
                });
            }
            if enabled[t.state].binary_search(&t.action).is_err() {
                return Err(ModelError::TransitionNotEnabled {
                    index,
                    state: t.state,
                    action: t.action,
                });
            }
            let mut mass = 0.0;
            let mut merged: Vec<(StateId, f64)> = Vec::with_capacity(t.dist.len());
            for &(target, prob) in &t.dist {
                if target >= n {
                    return Err(ModelError::BadSuccessor { index, target });
                }
                if !(0.0..=1.0).contains(&prob) {
                    return Err(ModelError::BadProbability { index, prob });
                }
                mass += prob;
                if prob > 0.0 {
                    merged.push((target, prob));
                }
            }
            if (mass - 1.0).abs() > MASS_TOLERANCE {
                return Err(ModelError::Mass {
                    index,
                    state: t.state,
                    action: t.action,
                    mass,
                });
            }
            merged.sort_by_key(|&(target, _)| target);
            merged.dedup_by(|next, kept| {
                if next.0 == kept.0 {
                    kept.1 += next.1;
                    true
                } else {
                    false
                }
            });
            if dists.insert((t.state, t.action), merged).is_some() {
                return Err(ModelError::DuplicateTransition {
                    index,
                    state: t.state,
                    action: t.action,
                });
            }
        }

        let mut rewards: HashMap<(StateId, ActionId), f64> = HashMap::new();
        if let Some(entries) = &doc.rewards {
            for (index, r) in entries.iter().enumerate() {
                if r.state >= n || enabled[r.state].binary_search(&r.action).is_err() {
                    return Err(ModelError::BadReward {
                        index,
                        state: r.state,
                        action: r.action,
                    });
                }
                if !r.value.is_finite() {
                    return Err(ModelError::NonFiniteReward { index });
                }
                *rewards.entry((r.state, r.action)).or_insert(0.0) += r.value;
            }
        }
        if let Some(g) = doc.discount {
            if !(g > 0.0 && g <= 1.0) {
                return Err(ModelError::BadDiscount(g));
            }
        }

        let mut choices = Vec::with_capacity(n);
        for (s, acts) in enabled.iter().enumerate() {
            let mut row = Vec::with_capacity(acts.len());
            for &a in acts {
                let dist = dists
                    .remove(&(s, a))
                    .ok_or(ModelError::MissingTransition { state: s, action: a })?;
                row.push(Choice {
                    action: a,
                    dist,
                    reward: rewards.get(&(s, a)).copied().unwrap_or(0.0),
                });
            }
            choices.push(row);
        }

        Ok(Mdp {
            variables: doc.variables.clone(),
            valuations: doc.states.clone(),
            initial: doc.initial,
            actions: doc.actions.clone(),
            choices,
            goal,
            has_rewards: doc.rewards.is_some(),
            discount: doc.discount,
        })
    }

    pub fn to_document(&self) -> ModelDocument {
        let mut transitions = Vec::new();
        let mut rewards = Vec::new();
        for (s, row) in self.choices.iter().enumerate() {
            for c in row {
                transitions.push(TransitionEntry {
                    state: s,
                    action: c.action,
                    dist: c.dist.clone(),
                });
                if self.has_rewards {
                    rewards.push(RewardEntry {
                        state: s,
                        action: c.action,
                        value: c.reward,
                    });
                }
            }
        }
        ModelDocument {
            variables: self.variables.clone(),
            states: self.valuations.clone(),
            initial: self.initial,
            actions: self.actions.clone(),
            enabled: self
                .choices
                .iter()
                .map(|row| row.iter().map(|c| c.action).collect())
                .collect(),
            transitions,
            goal: self.goal_states(),
            rewards: self.has_rewards.then_some(rewards),
            discount: self.discount,
        }
    }

    pub fn num_states(&self) -> usize {
        self.valuations.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn valuation(&self, s: StateId) -> &[i64] {
        &self.valuations[s]
    }

    pub fn valuations(&self) -> &[Vec<i64>] {
        &self.valuations
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn action_label(&self, a: ActionId) -> &str {
        &self.actions[a]
    }

    pub fn action_index(&self, label: &str) -> Option<ActionId> {
        self.actions.iter().position(|l| l == label)
    }

    /// Index of the random action, if the model has been augmented.
    pub fn random_action(&self) -> Option<ActionId> {
        self.action_index(RANDOM_ACTION_LABEL)
    }

    /// Enabled actions of `s` in ascending order, with their data.
    pub fn choices(&self, s: StateId) -> &[Choice] {
        &self.choices[s]
    }

    pub fn choice(&self, s: StateId, a: ActionId) -> Option<&Choice> {
        let row = &self.choices[s];
        row.binary_search_by_key(&a, |c| c.action).ok().map(|i| &row[i])
    }

    pub fn is_enabled(&self, s: StateId, a: ActionId) -> bool {
        self.choice(s, a).is_some()
    }

    pub fn enabled(&self, s: StateId) -> impl Iterator<Item = ActionId> + '_ {
        self.choices[s].iter().map(|c| c.action)
    }

    pub fn is_goal(&self, s: StateId) -> bool {
        self.goal[s]
    }

    pub fn goal_mask(&self) -> &[bool] {
        &self.goal
    }

    pub fn goal_states(&self) -> Vec<StateId> {
        (0..self.num_states()).filter(|&s| self.goal[s]).collect()
    }

    pub fn has_rewards(&self) -> bool {
        self.has_rewards
    }

    pub fn discount(&self) -> Option<f64> {
        self.discount
    }

    pub fn num_choices(&self) -> usize {
        self.choices.iter().map(Vec::len).sum()
    }

    /// Adds the random action: in every state it mixes the enabled actions
    /// uniformly, and its reward is their average reward. It gets the last
    /// action index.
    pub fn augment_random_action(&self) -> Result<Mdp, ModelError> {
        if self.random_action().is_some() {
            return Err(ModelError::RandomActionPresent);
        }
        let star = self.actions.len();
        let mut out = self.clone();
        out.actions.push(RANDOM_ACTION_LABEL.to_string());
        for row in &mut out.choices {
            let k = row.len() as f64;
            let mut mix: Vec<(StateId, f64)> = Vec::new();
            let mut reward = 0.0;
            for c in row.iter() {
                mix.extend(c.dist.iter().map(|&(t, p)| (t, p / k)));
                reward += c.reward / k;
            }
            mix.sort_by_key(|&(t, _)| t);
            mix.dedup_by(|next, kept| {
                if next.0 == kept.0 {
                    kept.1 += next.1;
                    true
                } else {
                    false
                }
            });
            row.push(Choice {
                action: star,
                dist: mix,
                reward,
            });
        }
        Ok(out)
    }

    fn check_policy(&self, policy: &Policy) -> Result<(), ModelError> {
        if policy.len() != self.num_states() {
            return Err(ModelError::PolicyArity {
                expected: self.num_states(),
                found: policy.len(),
            });
        }
        for (s, a) in policy.iter() {
            if let Some(a) = a {
                if !self.is_enabled(s, a) {
                    return Err(ModelError::PolicyNotEnabled { state: s, action: a });
                }
            }
        }
        Ok(())
    }

    /// Reachability mask of the chain induced by `policy`. Undefined states
    /// are not expanded.
    pub(crate) fn reachable_mask(&self, policy: &Policy) -> Result<Vec<bool>, ModelError> {
        self.check_policy(policy)?;
        let mut seen = vec![false; self.num_states()];
        let mut queue = VecDeque::from([self.initial]);
        seen[self.initial] = true;
        while let Some(s) = queue.pop_front() {
            let Some(a) = policy.get(s) else { continue };
            for &(t, _) in &self.choice(s, a).expect("checked").dist {
                if !seen[t] {
                    seen[t] = true;
                    queue.push_back(t);
                }
            }
        }
        Ok(seen)
    }

    /// States reachable from the initial state in the chain induced by
    /// `policy`.
    pub fn reachable_under(&self, policy: &Policy) -> Result<BTreeSet<StateId>, ModelError> {
        let mask = self.reachable_mask(policy)?;
        Ok((0..self.num_states()).filter(|&s| mask[s]).collect())
    }

    /// The Markov chain induced by `policy`: every state keeps exactly one
    /// action. Undefined states keep their first enabled action, which is
    /// only allowed where they are unreachable or goal states.
    pub fn induced_chain(&self, policy: &Policy) -> Result<Mdp, ModelError> {
        let mask = self.reachable_mask(policy)?;
        let mut out = self.clone();
        for s in 0..self.num_states() {
            let a = match policy.get(s) {
                Some(a) => a,
                None if mask[s] && !self.goal[s] => {
                    return Err(ModelError::PolicyUndefined { state: s })
                }
                None => self.choices[s][0].action,
            };
            out.choices[s].retain(|c| c.action == a);
        }
        Ok(out)
    }

    /// Sub-MDP keeping the enabled pairs accepted by `keep`.
    pub fn restrict_with(
        &self,
        mut keep: impl FnMut(StateId, ActionId) -> bool,
    ) -> Result<Mdp, ModelError> {
        let mut out = self.clone();
        for (s, row) in out.choices.iter_mut().enumerate() {
            row.retain(|c| keep(s, c.action));
            if row.is_empty() {
                return Err(ModelError::EmptyRestriction { state: s });
            }
        }
        Ok(out)
    }

    pub fn restrict(&self, keep: &BTreeSet<(StateId, ActionId)>) -> Result<Mdp, ModelError> {
        self.restrict_with(|s, a| keep.contains(&(s, a)))
    }

    /// All enabled (state, action) pairs.
    pub fn pairs(&self) -> BTreeSet<(StateId, ActionId)> {
        (0..self.num_states())
            .flat_map(|s| self.enabled(s).map(move |a| (s, a)))
            .collect()
    }

    /// Observed values of variable `v` over all states, sorted and distinct.
    pub fn observed_values(&self, v: usize) -> Vec<i64> {
        let set: BTreeSet<i64> = self.valuations.iter().map(|val| val[v]).collect();
        set.into_iter().collect()
    }
}

/// A deterministic memoryless policy; `None` is the undefined choice.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Policy {
    choice: Vec<Option<ActionId>>,
}

impl Policy {
    pub fn undefined(n: usize) -> Policy {
        Policy {
            choice: vec![None; n],
        }
    }

    pub fn constant(n: usize, a: ActionId) -> Policy {
        Policy {
            choice: vec![Some(a); n],
        }
    }

    pub fn from_choices(choice: Vec<Option<ActionId>>) -> Policy {
        Policy { choice }
    }

    pub fn len(&self) -> usize {
        self.choice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choice.is_empty()
    }

    pub fn get(&self, s: StateId) -> Option<ActionId> {
        self.choice[s]
    }

    pub fn set(&mut self, s: StateId, a: Option<ActionId>) {
        self.choice[s] = a;
    }

    pub fn choices(&self) -> &[Option<ActionId>] {
        &self.choice
    }

    pub fn iter(&self) -> impl Iterator<Item = (StateId, Option<ActionId>)> + '_ {
        self.choice.iter().copied().enumerate()
    }

    pub fn defined_states(&self) -> impl Iterator<Item = StateId> + '_ {
        self.iter().filter(|(_, a)| a.is_some()).map(|(s, _)| s)
    }

    /// Keeps the choices of `states` and makes every other state undefined.
    pub fn restricted_to(&self, states: &[StateId]) -> Policy {
        let mut out = Policy::undefined(self.len());
        for &s in states {
            out.choice[s] = self.choice[s];
        }
        out
    }
}
