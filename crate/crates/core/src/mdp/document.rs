use serde::{Deserialize, Serialize};

use super::Variable;

/// The explicit JSON model format.
///
/// ```json
/// {
///   "variables": [{"name": "x", "min": 0, "max": 2}],
///   "states": [[0], [1], [2]],
///   "initial": 0,
///   "actions": ["right", "reset"],
///   "enabled": [[0, 1], [0, 1], [0, 1]],
///   "transitions": [{"state": 0, "action": 0, "dist": [[1, 1.0]]}, ...],
///   "goal": [2]
/// }
/// ```
///
/// `rewards` (a list of `{state, action, value}`) and `discount` are optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub variables: Vec<Variable>,
    pub states: Vec<Vec<i64>>,
    pub initial: usize,
    pub actions: Vec<String>,
    pub enabled: Vec<Vec<usize>>,
    pub transitions: Vec<TransitionEntry>,
    pub goal: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rewards: Option<Vec<RewardEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discount: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionEntry {
    pub state: usize,
    pub action: usize,
    pub dist: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardEntry {
    pub state: usize,
    pub action: usize,
    pub value: f64,
}

impl ModelDocument {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model documents always serialize")
    }
}
