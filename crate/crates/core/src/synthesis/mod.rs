//! Abstraction-refinement search over families of trees.
//!
//! A family is explored by model checking its family-MDP. If the optimum
//! there is no better than the best tree found so far the whole family is
//! pruned; if the optimal policy is implemented by a member, that member is
//! the best tree of the family. Otherwise the family is split, guided by a
//! pair of harmonizing parameterizations when one exists.

mod mapping;
mod reduce;
mod split;

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::checker::{check, value_of_policy, CheckError, Direction, Normalizer, Objective, DEFAULT_EPS};
use crate::encoder::{critical_states, family_mdp, find_implementation, harmonize, EncodeError, Harmonizing, StateOrder};
use crate::mdp::{Mdp, ModelError, Policy, StateId};
use crate::tree::{full_template, induced_actions, postprocess, DecisionTree, ParamSet, Parameterization, TreeError, TreeTemplate};

pub use mapping::{map_policy, preprocess_policy, MapOutcome};
pub use reduce::{reduce_tree, ReduceResult};
pub use split::{split_arbitrary, split_informed};

#[derive(Debug, Error, PartialEq)]
pub enum SynthesisError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error("model has no random action; augment it first")]
    NoRandomAction,
    #[error("family does not fit the template")]
    FamilyMismatch,
    #[error("cannot split: {0}")]
    BadSplit(String),
    #[error("every parameter of the family is fixed, nothing to split")]
    Unsplittable,
    #[error("invalid configuration: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Largest tree depth.
    pub depth: usize,
    /// Wall-clock budget for the whole run.
    pub timeout: Option<Duration>,
    pub eps: f64,
    /// Start each depth with the family that follows the best shallower
    /// tree.
    pub hints: bool,
    /// Families whose family-MDP value does not beat the incumbent by more
    /// than this are pruned.
    pub prune_slack: f64,
    /// Use harmonizing pairs to choose splits.
    pub informed_split: bool,
    /// Node budget of the harmonization query.
    pub harmonize_budget: Option<u64>,
    pub state_order: StateOrder,
    /// Stop as soon as a tree reaches this value.
    pub target: Option<f64>,
    /// Record harmonizations and pruned families.
    pub trace: bool,
}

impl SearchConfig {
    pub fn new(depth: usize) -> SearchConfig {
        SearchConfig {
            depth,
            timeout: None,
            eps: DEFAULT_EPS,
            hints: true,
            prune_slack: 1e-9,
            informed_split: true,
            harmonize_budget: Some(50_000),
            state_order: StateOrder::Bfs,
            target: None,
            trace: false,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> SearchConfig {
        self.timeout = Some(timeout);
        self
    }

    fn validate(&self) -> Result<(), SynthesisError> {
        if self.timeout.is_some_and(|t| t.is_zero()) {
            return Err(SynthesisError::BadConfig("timeout must be positive".into()));
        }
        if !(self.eps > 0.0) {
            return Err(SynthesisError::BadConfig(format!("eps {} must be positive", self.eps)));
        }
        if !(self.prune_slack >= 0.0) {
            return Err(SynthesisError::BadConfig("prune slack must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SynthesisStatus {
    /// Every family was explored or pruned; the best tree is optimal.
    OptimalExhausted,
    /// A tree reached the configured target value.
    TargetReached,
    Timeout,
    /// An internal error stopped the search; the best tree so far is kept.
    Error(String),
}

impl SynthesisStatus {
    pub fn label(&self) -> &'static str {
        match self {
            SynthesisStatus::OptimalExhausted => "optimal-exhausted",
            SynthesisStatus::TargetReached => "target-reached",
            SynthesisStatus::Timeout => "timeout",
            SynthesisStatus::Error(_) => "error",
        }
    }
}

/// One improvement of the best tree.
#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub elapsed: Duration,
    pub value: f64,
    pub normalized: Option<f64>,
    pub inner_nodes: usize,
    pub depth: usize,
    /// The improving tree, post-processed.
    pub tree: DecisionTree,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub families: usize,
    pub pruned: usize,
    pub implemented: usize,
    pub harmonized: usize,
    pub informed_splits: usize,
    pub arbitrary_splits: usize,
}

/// A harmonization step, kept for auditing.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonizationEvent {
    pub family: ParamSet,
    pub policy: Policy,
    pub critical: Vec<StateId>,
    pub result: Harmonizing,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchTrace {
    pub harmonizations: Vec<HarmonizationEvent>,
    /// Pruned families with the incumbent value at the time.
    pub pruned: Vec<(ParamSet, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    pub best_tree: Option<DecisionTree>,
    pub best_value: f64,
    /// Parameters of the best tree when it was found in the searched
    /// template.
    pub best_params: Option<Parameterization>,
    pub status: SynthesisStatus,
    pub stats: SearchStats,
    pub log: Vec<LogEntry>,
    pub trace: Option<SearchTrace>,
}

impl SynthesisResult {
    /// The anytime log as CSV with a header row.
    pub fn log_csv(&self) -> String {
        let mut out = String::from("elapsed_ms,value,normalized_value,inner_nodes,depth\n");
        for e in &self.log {
            let norm = e.normalized.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                e.elapsed.as_millis(),
                e.value,
                norm,
                e.inner_nodes,
                e.depth
            );
        }
        out
    }
}

/// Best value and tree known before a search starts.
#[derive(Debug, Clone, PartialEq)]
pub struct Incumbent {
    pub value: f64,
    pub tree: Option<DecisionTree>,
}

impl Incumbent {
    pub fn none(obj: &Objective) -> Incumbent {
        Incumbent {
            value: obj.direction().worst(),
            tree: None,
        }
    }
}

/// Value of the policy that `t` induces on `m`.
pub fn tree_value(m: &Mdp, obj: &Objective, t: &DecisionTree, eps: f64) -> Result<f64, SynthesisError> {
    let policy = induced_actions(t, m)?;
    Ok(value_of_policy(m, &policy, obj, eps)?)
}

struct Search<'a> {
    m: &'a Mdp,
    obj: &'a Objective,
    tpl: &'a TreeTemplate,
    cfg: &'a SearchConfig,
    dir: Direction,
    start: Instant,
    normalizer: Option<Normalizer>,
    best_value: f64,
    best_tree: Option<DecisionTree>,
    best_params: Option<Parameterization>,
    stats: SearchStats,
    log: Vec<LogEntry>,
    trace: Option<SearchTrace>,
}

impl Search<'_> {
    fn consider(&mut self, f: &Parameterization) -> Result<(), SynthesisError> {
        let tree = self.tpl.instantiate(f)?;
        let value = tree_value(self.m, self.obj, &tree, self.cfg.eps)?;
        if self.dir.improves(value, self.best_value, 0.0) {
            let pretty = postprocess(&tree, self.m);
            self.log.push(LogEntry {
                elapsed: self.start.elapsed(),
                value,
                normalized: self.normalizer.and_then(|n| n.normalize(value).ok()),
                inner_nodes: pretty.inner_count(),
                depth: pretty.depth(),
                tree: pretty,
            });
            self.best_value = value;
            self.best_tree = Some(tree);
            self.best_params = Some(f.clone());
        }
        Ok(())
    }

    fn target_reached(&self) -> bool {
        self.cfg
            .target
            .is_some_and(|t| self.best_tree.is_some() && !self.dir.improves(t, self.best_value, 0.0))
    }

    /// Processes one family and returns the sub-families to push, in push
    /// order.
    fn step(&mut self, family: ParamSet) -> Result<Vec<ParamSet>, SynthesisError> {
        self.stats.families += 1;
        let fmdp = family_mdp(self.m, self.tpl, &family)?;
        let result = check(&fmdp, self.obj, self.cfg.eps)?;
        if !self.dir.improves(result.value_at_initial, self.best_value, self.cfg.prune_slack) {
            self.stats.pruned += 1;
            if let Some(trace) = &mut self.trace {
                trace.pruned.push((family, self.best_value));
            }
            return Ok(Vec::new());
        }
        let sigma = preprocess_policy(&fmdp, &result.policy, self.obj.goal())?;
        if let Some(f) = find_implementation(self.tpl, &family, &sigma, self.m)? {
            self.stats.implemented += 1;
            self.consider(&f)?;
            return Ok(Vec::new());
        }
        let core = critical_states(self.tpl, &family, &sigma, self.m, self.cfg.state_order)?;
        let harmonizing = if self.cfg.informed_split {
            harmonize(self.tpl, &family, &sigma, &core.critical, self.m, self.cfg.harmonize_budget)?
        } else {
            None
        };
        let (first, second) = match harmonizing {
            Some(h) => {
                self.stats.harmonized += 1;
                self.consider(&h.f1)?;
                if !h.degenerate {
                    self.consider(&h.f2)?;
                }
                let split = if h.degenerate {
                    None
                } else {
                    Some(split_informed(&family, h.param, &h.f1, &h.f2)?)
                };
                if let Some(trace) = &mut self.trace {
                    trace.harmonizations.push(HarmonizationEvent {
                        family: family.clone(),
                        policy: sigma.clone(),
                        critical: core.critical.clone(),
                        result: h,
                    });
                }
                match split {
                    Some(pair) => {
                        self.stats.informed_splits += 1;
                        pair
                    }
                    None => {
                        self.stats.arbitrary_splits += 1;
                        split_arbitrary(&family, &core.params)?
                    }
                }
            }
            None => {
                self.stats.arbitrary_splits += 1;
                split_arbitrary(&family, &core.params)?
            }
        };
        Ok(vec![second, first])
    }
}

fn run_fixed(
    m: &Mdp,
    obj: &Objective,
    tpl: &TreeTemplate,
    stack: Vec<ParamSet>,
    incumbent: Incumbent,
    deadline: Option<Instant>,
    cfg: &SearchConfig,
    start: Instant,
    normalizer: Option<Normalizer>,
) -> Result<SynthesisResult, SynthesisError> {
    cfg.validate()?;
    if m.random_action().is_none() {
        return Err(SynthesisError::NoRandomAction);
    }
    if stack.iter().any(|f| f.kinds() != tpl.kinds() || !f.is_subset_of(&tpl.superfamily())) {
        return Err(SynthesisError::FamilyMismatch);
    }
    let mut search = Search {
        m,
        obj,
        tpl,
        cfg,
        dir: obj.direction(),
        start,
        normalizer,
        best_value: incumbent.value,
        best_tree: incumbent.tree,
        best_params: None,
        stats: SearchStats::default(),
        log: Vec::new(),
        trace: cfg.trace.then(SearchTrace::default),
    };
    let mut stack = stack;
    let mut status = SynthesisStatus::OptimalExhausted;
    while let Some(family) = stack.pop() {
        if search.target_reached() {
            status = SynthesisStatus::TargetReached;
            break;
        }
        // Without any tree yet, keep going so that a result always exists.
        let anytime = search.best_tree.is_some() || cfg.target.is_some();
        if anytime && deadline.is_some_and(|d| Instant::now() >= d) {
            status = SynthesisStatus::Timeout;
            break;
        }
        match search.step(family) {
            Ok(children) => stack.extend(children),
            Err(e) => {
                status = SynthesisStatus::Error(e.to_string());
                break;
            }
        }
    }
    if status == SynthesisStatus::OptimalExhausted && search.target_reached() {
        status = SynthesisStatus::TargetReached;
    }
    Ok(SynthesisResult {
        best_tree: search.best_tree,
        best_value: search.best_value,
        best_params: search.best_params,
        status,
        stats: search.stats,
        log: search.log,
        trace: search.trace,
    })
}

/// Searches the families on `stack` (the last one first) for the best tree
/// of `tpl`. Only trees strictly better than `incumbent` are reported.
///
/// `m` must contain the random action. With status
/// [`SynthesisStatus::OptimalExhausted`] the result is the best value over
/// all families on the initial stack (or the incumbent's, if that is
/// better). `cfg.depth` and `cfg.timeout` are not used; the search stops at
/// `deadline`.
pub fn synthesize_fixed_template(
    m: &Mdp,
    obj: &Objective,
    tpl: &TreeTemplate,
    stack: Vec<ParamSet>,
    incumbent: Incumbent,
    deadline: Option<Instant>,
    cfg: &SearchConfig,
) -> Result<SynthesisResult, SynthesisError> {
    let normalizer = Normalizer::new(m, obj, cfg.eps).ok();
    run_fixed(m, obj, tpl, stack, incumbent, deadline, cfg, Instant::now(), normalizer)
}

/// Searches trees of depth `0, 1, ..., cfg.depth` in turn, carrying the best
/// tree over. Each depth below the last gets `timeout / (2 * depth)`; the
/// last depth gets what remains. The returned tree is post-processed.
pub fn synthesize_bounded_depth(
    m: &Mdp,
    obj: &Objective,
    cfg: &SearchConfig,
) -> Result<SynthesisResult, SynthesisError> {
    cfg.validate()?;
    let start = Instant::now();
    let deadline = cfg.timeout.map(|t| start + t);
    let per_depth = cfg
        .timeout
        .filter(|_| cfg.depth > 0)
        .map(|t| t / (2 * cfg.depth as u32));
    let normalizer = Normalizer::new(m, obj, cfg.eps).ok();

    let mut incumbent = Incumbent::none(obj);
    let mut best_params = None;
    let mut stats = SearchStats::default();
    let mut log = Vec::new();
    let mut trace = cfg.trace.then(SearchTrace::default);
    let mut status = SynthesisStatus::OptimalExhausted;
    for depth in 0..=cfg.depth {
        let (tpl, family) = full_template(m, depth)?;
        let mut stack = vec![family.clone()];
        if cfg.hints {
            if let Some(hint) = incumbent.tree.as_ref().filter(|_| depth > 0) {
                if let Ok(hinted) = tpl.hint_family(&family, hint) {
                    stack.push(hinted);
                }
            }
        }
        let depth_deadline = match (depth < cfg.depth, per_depth, deadline) {
            (true, Some(p), Some(d)) => Some((Instant::now() + p).min(d)),
            _ => deadline,
        };
        let r = run_fixed(m, obj, &tpl, stack, incumbent.clone(), depth_deadline, cfg, start, normalizer)?;
        stats.families += r.stats.families;
        stats.pruned += r.stats.pruned;
        stats.implemented += r.stats.implemented;
        stats.harmonized += r.stats.harmonized;
        stats.informed_splits += r.stats.informed_splits;
        stats.arbitrary_splits += r.stats.arbitrary_splits;
        log.extend(r.log);
        if let (Some(all), Some(t)) = (&mut trace, r.trace) {
            all.harmonizations.extend(t.harmonizations);
            all.pruned.extend(t.pruned);
        }
        if r.best_params.is_some() {
            best_params = r.best_params;
        }
        incumbent = Incumbent {
            value: r.best_value,
            tree: r.best_tree,
        };
        status = r.status;
        if matches!(status, SynthesisStatus::Error(_) | SynthesisStatus::TargetReached) {
            break;
        }
        if deadline.is_some_and(|d| Instant::now() >= d) {
            if depth < cfg.depth {
                status = SynthesisStatus::Timeout;
            }
            break;
        }
    }
    Ok(SynthesisResult {
        best_tree: incumbent.tree.map(|t| postprocess(&t, m)),
        best_value: incumbent.value,
        best_params,
        status,
        stats,
        log,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::line3;

    fn line3a() -> Mdp {
        line3().augment_random_action().unwrap()
    }

    #[test]
    fn line3_depth_zero() {
        let m = line3a();
        let obj = Objective::max_reach(&m);
        let (tpl, fam) = full_template(&m, 0).unwrap();
        let r = synthesize_fixed_template(&m, &obj, &tpl, vec![fam], Incumbent::none(&obj), None, &SearchConfig::new(0)).unwrap();
        assert_eq!(r.status, SynthesisStatus::OptimalExhausted);
        assert_eq!(r.best_tree, Some(DecisionTree::leaf(0)));
        assert!((r.best_value - 1.0).abs() < 1e-9);
        assert_eq!(r.stats.families, 1);
    }

    #[test]
    fn incumbent_prunes_everything() {
        let m = line3a();
        let obj = Objective::max_reach(&m);
        let (tpl, fam) = full_template(&m, 1).unwrap();
        let inc = Incumbent {
            value: 1.0,
            tree: Some(DecisionTree::leaf(0)),
        };
        let r = synthesize_fixed_template(&m, &obj, &tpl, vec![fam], inc, None, &SearchConfig::new(1)).unwrap();
        assert_eq!(r.best_params, None);
        assert_eq!(r.stats.pruned, 1);
        assert!(r.log.is_empty());
    }

    #[test]
    fn expected_steps_on_a_corridor() {
        let doc = crate::bench::gen_gridworld(&crate::bench::GridworldSpec::open(3, 2, (2, 1), 0.0)).unwrap();
        let m = Mdp::from_document(&doc).unwrap().augment_random_action().unwrap();
        let obj = Objective::min_expected_reward(&m);
        let r = synthesize_bounded_depth(&m, &obj, &SearchConfig::new(1)).unwrap();
        assert_eq!(r.status, SynthesisStatus::OptimalExhausted);
        assert!((r.best_value - 3.0).abs() < 1e-6, "{}", r.best_value);
        let t = r.best_tree.unwrap();
        assert!((tree_value(&m, &obj, &t, 1e-6).unwrap() - 3.0).abs() < 1e-6);
    }

    #[test]
    fn log_is_monotone_and_csv_shaped() {
        let m = line3a();
        let obj = Objective::max_reach(&m);
        let r = synthesize_bounded_depth(&m, &obj, &SearchConfig::new(2)).unwrap();
        assert!(r.log.windows(2).all(|w| w[0].value < w[1].value));
        let csv = r.log_csv();
        assert!(csv.starts_with("elapsed_ms,value,normalized_value,inner_nodes,depth\n"));
        assert_eq!(csv.lines().count(), r.log.len() + 1);
    }

    #[test]
    fn tiny_timeout_still_yields_a_tree() {
        let m = line3a();
        let obj = Objective::max_reach(&m);
        let cfg = SearchConfig::new(3).with_timeout(Duration::from_nanos(1));
        let r = synthesize_bounded_depth(&m, &obj, &cfg).unwrap();
        assert_eq!(r.status, SynthesisStatus::Timeout);
        assert!(r.best_tree.is_some());
    }

    #[test]
    fn zero_timeout_is_rejected() {
        let m = line3a();
        let cfg = SearchConfig::new(1).with_timeout(Duration::ZERO);
        assert!(matches!(
            synthesize_bounded_depth(&m, &Objective::max_reach(&m), &cfg),
            Err(SynthesisError::BadConfig(_))
        ));
    }
}
