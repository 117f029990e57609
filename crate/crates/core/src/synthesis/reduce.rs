//! Shrinking a large tree one sub-tree at a time.

use std::time::Instant;

use super::{run_fixed, tree_value, Incumbent, SearchConfig, SynthesisError};
use crate::checker::{Direction, Normalizer, Objective};
use crate::mdp::Mdp;
use crate::tree::{postprocess, splice_template, DecisionTree, NodeId};

#[derive(Debug, Clone, PartialEq)]
pub struct ReduceResult {
    pub tree: DecisionTree,
    pub value: f64,
    pub original_value: f64,
    pub original_inner: usize,
    /// Number of committed sub-tree replacements.
    pub replacements: usize,
    pub timed_out: bool,
}

/// Inner nodes whose sub-tree has depth exactly `d`, in preorder.
fn nodes_of_depth(t: &DecisionTree, d: usize) -> Vec<NodeId> {
    let topo = t.topology();
    topo.preorder()
        .into_iter()
        .filter(|&n| !topo.is_leaf(n) && topo.depth_of(n) == d)
        .collect()
}

/// Replaces sub-trees of `t` by smaller ones while the value of the whole
/// tree stays within `error` of the value of `t`.
///
/// Sub-trees of depth `subtree_depth` are visited first (in preorder), then
/// those of depth `subtree_depth - 1` and so on. For each, complete
/// replacements of depth `0, 1, ...` are searched, and finally trees of the
/// sub-tree's own shape; the first replacement that keeps the value within
/// the budget and strictly lowers the inner-node count is committed. The
/// budget is measured against the original tree throughout, so the total
/// loss is at most `error`.
pub fn reduce_tree(
    m: &Mdp,
    obj: &Objective,
    t: &DecisionTree,
    subtree_depth: usize,
    error: f64,
    deadline: Option<Instant>,
    cfg: &SearchConfig,
) -> Result<ReduceResult, SynthesisError> {
    if m.random_action().is_none() {
        return Err(SynthesisError::NoRandomAction);
    }
    if !(error >= 0.0) {
        return Err(SynthesisError::BadConfig(format!("error budget {error} must be nonnegative")));
    }
    t.check_against(m)?;
    let dir = obj.direction();
    let original_value = tree_value(m, obj, t, cfg.eps)?;
    let tol = 10.0 * cfg.eps;
    let (floor, incumbent) = match dir {
        Direction::Maximize => (original_value - error, original_value - error - tol),
        Direction::Minimize => (original_value + error, original_value + error + tol),
    };
    let acceptable = |v: f64| !dir.improves(floor, v, tol);
    let inner_cfg = SearchConfig {
        target: Some(incumbent),
        trace: false,
        ..cfg.clone()
    };
    let normalizer = Normalizer::new(m, obj, cfg.eps).ok();

    let mut current = t.clone();
    let mut replacements = 0;
    let mut timed_out = false;
    'depths: for d in (1..=subtree_depth).rev() {
        let mut i = 0;
        loop {
            let candidates = nodes_of_depth(&current, d);
            let Some(&n) = candidates.get(i) else { break };
            let before = current.inner_count();
            let mut replaced = None;
            for r in 0..=d {
                if deadline.is_some_and(|dl| Instant::now() >= dl) {
                    timed_out = true;
                    break 'depths;
                }
                let (tpl, family) = splice_template(&current, n, (r < d).then_some(r), m)?;
                let res = run_fixed(
                    m,
                    obj,
                    &tpl,
                    vec![family],
                    Incumbent {
                        value: incumbent,
                        tree: None,
                    },
                    deadline,
                    &inner_cfg,
                    Instant::now(),
                    normalizer,
                )?;
                let Some(found) = res.best_tree else { continue };
                let candidate = postprocess(&found, m);
                if candidate.inner_count() < before && acceptable(tree_value(m, obj, &candidate, cfg.eps)?) {
                    replaced = Some((candidate, r < d));
                    break;
                }
            }
            match replaced {
                Some((tree, shallower)) => {
                    current = tree;
                    replacements += 1;
                    if !shallower {
                        i += 1;
                    }
                }
                None => i += 1,
            }
        }
    }
    let tree = postprocess(&current, m);
    let value = tree_value(m, obj, &tree, cfg.eps)?;
    Ok(ReduceResult {
        tree,
        value,
        original_value,
        original_inner: t.inner_count(),
        replacements,
        timed_out,
    })
}
