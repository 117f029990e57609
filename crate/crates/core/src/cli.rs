//! Command-line front end: `synthesize`, `map`, `reduce`, `evaluate` and
//! `generate`.
//!
//! Exit codes: 0 on success, 2 when a time limit cut the search short but a
//! tree was found, 1 on any error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{gen_gridworld, gen_random_mdp, gen_x3c, GridObjective, GridworldSpec, RandomMdpSpec, X3cInstance};
use crate::checker::{Normalizer, Objective, DEFAULT_EPS};
use crate::encoder::StateOrder;
use crate::mdp::{parse_model, Mdp, Policy};
use crate::synthesis::{map_policy, reduce_tree, synthesize_bounded_depth, tree_value, MapOutcome, SearchConfig, SynthesisStatus};
use crate::tree::DecisionTree;

/// Environment variable with the default generator seed.
pub const SEED_VAR: &str = "DTSYNTH_SEED";

#[derive(Debug, Parser)]
#[command(name = "dtsynth", version, about = "Decision-tree policies for Markov decision processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Find the best tree of bounded depth.
    Synthesize(SynthesizeArgs),
    /// Represent a given policy as a tree of fixed depth.
    Map(MapArgs),
    /// Shrink a tree sub-tree by sub-tree.
    Reduce(ReduceArgs),
    /// Evaluate the policy of a tree.
    Evaluate(EvaluateArgs),
    /// Write a benchmark model.
    #[command(subcommand)]
    Generate(Generate),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ObjectiveKind {
    /// Maximal probability of reaching the goal.
    Reach,
    /// Minimal expected reward until the goal.
    Reward,
    /// Maximal discounted reward.
    Discounted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Debug, Args)]
struct ObjectiveArgs {
    #[arg(long, value_enum, default_value = "reach")]
    objective: ObjectiveKind,
    /// Discount factor; defaults to the model's.
    #[arg(long)]
    discount: Option<f64>,
}

#[derive(Debug, Args)]
struct SynthesizeArgs {
    model: PathBuf,
    #[arg(long, default_value_t = 3)]
    depth: usize,
    /// Time limit in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    #[command(flatten)]
    objective: ObjectiveArgs,
    #[arg(long, value_enum, default_value = "on")]
    hints: Switch,
    /// Tree output (JSON); a DOT rendering is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Anytime log output (CSV).
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MapArgs {
    model: PathBuf,
    /// JSON object from state index to action label.
    policy: PathBuf,
    #[arg(long, default_value_t = 3)]
    depth: usize,
}

#[derive(Debug, Args)]
struct ReduceArgs {
    model: PathBuf,
    tree: PathBuf,
    #[arg(long, default_value_t = 3)]
    subtree_depth: usize,
    /// Allowed absolute loss of value.
    #[arg(long, default_value_t = 0.0)]
    error: f64,
    #[arg(long)]
    timeout: Option<f64>,
    #[command(flatten)]
    objective: ObjectiveArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    model: PathBuf,
    tree: PathBuf,
    #[command(flatten)]
    objective: ObjectiveArgs,
}

#[derive(Debug, Subcommand)]
enum Generate {
    /// Grid maze with slippery moves.
    Gridworld {
        #[arg(long)]
        width: i64,
        #[arg(long)]
        height: i64,
        /// Exit cell as `x,y`.
        #[arg(long, value_parser = parse_cell)]
        exit: (i64, i64),
        #[arg(long, value_parser = parse_cell, default_value = "0,0")]
        start: (i64, i64),
        /// Blocked cells as `x,y`, repeatable.
        #[arg(long = "wall", value_parser = parse_cell)]
        walls: Vec<(i64, i64)>,
        #[arg(long, default_value_t = 0.1)]
        slip: f64,
        /// Reward 1 per step instead of a plain reachability model.
        #[arg(long)]
        steps: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Instance of the exact-cover reduction.
    X3c {
        #[arg(long)]
        universe: usize,
        /// A 3-set as `a,b,c`, repeatable.
        #[arg(long = "set", value_parser = parse_triple)]
        sets: Vec<[usize; 3]>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random MDP.
    Random {
        #[arg(long)]
        states: usize,
        #[arg(long, default_value_t = 2)]
        variables: usize,
        #[arg(long, default_value_t = 3)]
        actions: usize,
        #[arg(long, default_value_t = 2)]
        branching: usize,
        /// Defaults to $DTSYNTH_SEED, then 0.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_cell(s: &str) -> Result<(i64, i64), String> {
    let (x, y) = s.split_once(',').ok_or_else(|| format!("expected `x,y`, got `{s}`"))?;
    let num = |v: &str| v.trim().parse::<i64>().map_err(|e| format!("`{v}`: {e}"));
    Ok((num(x)?, num(y)?))
}

fn parse_triple(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|v| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}")))
        .collect::<Result<_, _>>()?;
    parts.try_into().map_err(|_| format!("expected three elements, got `{s}`"))
}

type CliResult = Result<i32, String>;

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, text: &str) -> Result<(), String> {
    std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_model(path: &Path) -> Result<Mdp, String> {
    let m = parse_model(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))?;
    if m.random_action().is_some() {
        Ok(m)
    } else {
        m.augment_random_action().map_err(|e| e.to_string())
    }
}

fn load_tree(path: &Path, m: &Mdp) -> Result<DecisionTree, String> {
    let t = DecisionTree::from_json(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))?;
    t.check_against(m).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(t)
}

fn objective(args: &ObjectiveArgs, m: &Mdp) -> Result<Objective, String> {
    Ok(match args.objective {
        ObjectiveKind::Reach => Objective::max_reach(m),
        ObjectiveKind::Reward => {
            if !m.has_rewards() {
                return Err("the model has no rewards".into());
            }
            Objective::min_expected_reward(m)
        }
        ObjectiveKind::Discounted => {
            let discount = args
                .discount
                .or(m.discount())
                .ok_or("a discount factor is required (--discount or in the model)")?;
            Objective::MaxDiscountedReward { discount }
        }
    })
}

fn seconds(t: Option<f64>) -> Result<Option<Duration>, String> {
    t.map(|s| Duration::try_from_secs_f64(s).map_err(|e| format!("--timeout {s}: {e}")))
        .transpose()
}

fn fmt_value(v: f64) -> String {
    format!("{v:.6}")
}

fn normalized(m: &Mdp, obj: &Objective, v: f64) -> String {
    Normalizer::new(m, obj, DEFAULT_EPS)
        .and_then(|n| n.normalize(v))
        .map(fmt_value)
        .unwrap_or_else(|_| "n/a".into())
}

fn emit_tree(out: &mut dyn Write, path: Option<&Path>, t: &DecisionTree, m: &Mdp) -> Result<(), String> {
    match path {
        Some(p) => {
            write_file(p, &t.to_json())?;
            write_file(&p.with_extension("dot"), &t.to_dot_named(m))?;
        }
        None => {
            let _ = writeln!(out, "{}", t.to_json());
        }
    }
    Ok(())
}

fn synthesize(a: &SynthesizeArgs, out: &mut dyn Write) -> CliResult {
    let m = load_model(&a.model)?;
    let obj = objective(&a.objective, &m)?;
    let mut cfg = SearchConfig::new(a.depth);
    cfg.timeout = seconds(a.timeout)?;
    cfg.hints = a.hints == Switch::On;
    let r = synthesize_bounded_depth(&m, &obj, &cfg).map_err(|e| e.to_string())?;
    if let Some(log) = &a.log {
        write_file(log, &r.log_csv())?;
    }
    let Some(tree) = &r.best_tree else {
        return Err(format!("no tree found (status {})", r.status.label()));
    };
    let _ = writeln!(out, "value: {}", fmt_value(r.best_value));
    let _ = writeln!(out, "normalized value: {}", normalized(&m, &obj, r.best_value));
    let _ = writeln!(out, "inner nodes: {}", tree.inner_count());
    let _ = writeln!(out, "depth: {}", tree.depth());
    let _ = writeln!(out, "status: {}", r.status.label());
    emit_tree(out, a.out.as_deref(), tree, &m)?;
    match r.status {
        SynthesisStatus::Timeout => Ok(2),
        SynthesisStatus::Error(e) => Err(e),
        _ => Ok(0),
    }
}

fn load_policy(path: &Path, m: &Mdp) -> Result<Policy, String> {
    let raw: BTreeMap<String, String> =
        serde_json::from_str(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut p = Policy::undefined(m.num_states());
    for (state, label) in raw {
        let s: usize = state
            .parse()
            .ok()
            .filter(|&s| s < m.num_states())
            .ok_or_else(|| format!("{}: `{state}` is not a state index", path.display()))?;
        let a = m
            .action_index(&label)
            .ok_or_else(|| format!("{}: unknown action `{label}`", path.display()))?;
        if !m.is_enabled(s, a) {
            return Err(format!("{}: action `{label}` is not enabled in state {s}", path.display()));
        }
        p.set(s, Some(a));
    }
    Ok(p)
}

fn map(a: &MapArgs, out: &mut dyn Write) -> CliResult {
    let m = load_model(&a.model)?;
    let policy = load_policy(&a.policy, &m)?;
    let outcome = map_policy(&m, &policy, a.depth, StateOrder::Bfs, Some(50_000)).map_err(|e| e.to_string())?;
    match outcome {
        MapOutcome::Implemented { tree, .. } => {
            let _ = writeln!(out, "SAT");
            let _ = writeln!(out, "{}", tree.to_json());
        }
        MapOutcome::NotImplementable {
            core,
            core_params,
            harmonizing_param,
            ..
        } => {
            let list = |v: Vec<String>| v.join(", ");
            let _ = writeln!(out, "UNSAT");
            let _ = writeln!(
                out,
                "critical states: {}",
                list(core.critical.iter().map(|s| s.to_string()).collect())
            );
            let _ = writeln!(out, "core parameters: {}", list(core_params));
            if let Some(h) = harmonizing_param {
                let _ = writeln!(out, "harmonizing parameter: {h}");
            }
        }
    }
    Ok(0)
}

fn reduce(a: &ReduceArgs, out: &mut dyn Write) -> CliResult {
    let m = load_model(&a.model)?;
    let obj = objective(&a.objective, &m)?;
    let t = load_tree(&a.tree, &m)?;
    let deadline = seconds(a.timeout)?.map(|d| Instant::now() + d);
    let cfg = SearchConfig::new(a.subtree_depth);
    let r = reduce_tree(&m, &obj, &t, a.subtree_depth, a.error, deadline, &cfg).map_err(|e| e.to_string())?;
    let _ = writeln!(out, "inner nodes: {} -> {}", r.original_inner, r.tree.inner_count());
    let _ = writeln!(out, "value: {} -> {}", fmt_value(r.original_value), fmt_value(r.value));
    let _ = writeln!(out, "replacements: {}", r.replacements);
    emit_tree(out, a.out.as_deref(), &r.tree, &m)?;
    Ok(if r.timed_out { 2 } else { 0 })
}

fn evaluate(a: &EvaluateArgs, out: &mut dyn Write) -> CliResult {
    let m = load_model(&a.model)?;
    let obj = objective(&a.objective, &m)?;
    let t = load_tree(&a.tree, &m)?;
    let v = tree_value(&m, &obj, &t, DEFAULT_EPS).map_err(|e| e.to_string())?;
    let _ = writeln!(out, "value: {}", fmt_value(v));
    let _ = writeln!(out, "normalized value: {}", normalized(&m, &obj, v));
    let _ = writeln!(out, "inner nodes: {}", t.inner_count());
    let _ = writeln!(out, "depth: {}", t.depth());
    Ok(0)
}

fn generate(g: &Generate, out: &mut dyn Write) -> CliResult {
    let (doc, path) = match g {
        Generate::Gridworld {
            width,
            height,
            exit,
            start,
            walls,
            slip,
            steps,
            out,
        } => {
            let spec = GridworldSpec {
                width: *width,
                height: *height,
                walls: walls.clone(),
                wall_edges: Vec::new(),
                initial: *start,
                exit: *exit,
                slip: *slip,
                objective: if *steps {
                    GridObjective::ExpectedSteps
                } else {
                    GridObjective::Reach
                },
            };
            (gen_gridworld(&spec), out)
        }
        Generate::X3c { universe, sets, out } => (
            gen_x3c(&X3cInstance {
                universe: *universe,
                sets: sets.clone(),
            }),
            out,
        ),
        Generate::Random {
            states,
            variables,
            actions,
            branching,
            seed,
            out,
        } => {
            let seed = match seed {
                Some(s) => *s,
                None => match std::env::var(SEED_VAR) {
                    Ok(v) => v.parse().map_err(|e| format!("{SEED_VAR}={v}: {e}"))?,
                    Err(_) => 0,
                },
            };
            (
                gen_random_mdp(&RandomMdpSpec::new(seed, *states, *variables, *actions, *branching)),
                out,
            )
        }
    };
    let text = doc.map_err(|e| e.to_string())?.to_json();
    match path {
        Some(p) => write_file(p, &text)?,
        None => {
            let _ = writeln!(out, "{text}");
        }
    }
    Ok(0)
}

/// Runs the command line `args` (program name first) and returns the exit
/// code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return 1;
            }
            let _ = write!(out, "{e}");
            return 0;
        }
    };
    let result = match &cli.command {
        Command::Synthesize(a) => synthesize(a, out),
        Command::Map(a) => map(a, out),
        Command::Reduce(a) => reduce(a, out),
        Command::Evaluate(a) => evaluate(a, out),
        Command::Generate(g) => generate(g, out),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            1
        }
    }
}
