use std::path::{Path, PathBuf};
use std::process::Command;

use dtsynth::bench::{line3_document, reduction_fixture};
use dtsynth::checker::{Objective, DEFAULT_EPS};
use dtsynth::cli::run;
use dtsynth::mdp::parse_model;
use dtsynth::synthesis::tree_value;
use dtsynth::tree::{DecisionTree, Node, Predicate};
use tempfile::TempDir;

struct Outcome {
    code: i32,
    stdout: String,
    stderr: String,
}

fn dtsynth(args: &[&str]) -> Outcome {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(std::iter::once("dtsynth").chain(args.iter().copied()), &mut out, &mut err);
    Outcome {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn line(stdout: &str, key: &str) -> String {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(key))
        .unwrap_or_else(|| panic!("no `{key}` in {stdout}"))
        .to_string()
}

#[test]
fn synthesize_line3_depth0() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "line3.json", &line3_document().to_json());
    let tree = dir.path().join("tree.json");
    let log = dir.path().join("log.csv");
    let o = dtsynth(&["synthesize", s(&model), "--depth", "0", "--out", s(&tree), "--log", s(&log)]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert_eq!(line(&o.stdout, "value: "), "1.000000");
    assert_eq!(line(&o.stdout, "status: "), "optimal-exhausted");
    assert_eq!(line(&o.stdout, "inner nodes: "), "0");

    let t = DecisionTree::from_json(&std::fs::read_to_string(&tree).unwrap()).unwrap();
    assert_eq!(t, DecisionTree::leaf(0));
    assert!(std::fs::read_to_string(tree.with_extension("dot")).unwrap().contains("right"));
    let csv = std::fs::read_to_string(&log).unwrap();
    assert!(csv.starts_with("elapsed_ms,value"));
}

#[test]
fn negative_depth_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "line3.json", &line3_document().to_json());
    let o = dtsynth(&["synthesize", s(&model), "--depth", "-1"]);
    assert_eq!(o.code, 1);
    assert!(!o.stderr.is_empty());
}

#[test]
fn tiny_timeout_exits_2_with_a_tree() {
    let dir = TempDir::new().unwrap();
    let gen = dtsynth(&["generate", "gridworld", "--width", "5", "--height", "5", "--exit", "4,4", "--steps"]);
    assert_eq!(gen.code, 0);
    let model = write(&dir, "maze.json", &gen.stdout);
    let o = dtsynth(&["synthesize", s(&model), "--depth", "4", "--objective", "reward", "--timeout", "0.001"]);
    assert_eq!(o.code, 2, "{}{}", o.stdout, o.stderr);
    assert_eq!(line(&o.stdout, "status: "), "timeout");
    assert!(o.stdout.contains("\"root\""));
}

#[test]
fn missing_model_is_an_error() {
    let o = dtsynth(&["synthesize", "/nonexistent/model.json"]);
    assert_eq!(o.code, 1);
    assert!(o.stderr.starts_with("error: "));
}

#[test]
fn map_always_right_is_sat() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "line3.json", &line3_document().to_json());
    let policy = write(&dir, "p.json", r#"{"0": "right", "1": "right"}"#);
    let o = dtsynth(&["map", s(&model), s(&policy), "--depth", "0"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let tree = o.stdout.strip_prefix("SAT\n").unwrap();
    assert_eq!(DecisionTree::from_json(tree).unwrap(), DecisionTree::leaf(0));
}

#[test]
fn map_conflict_lists_two_critical_states() {
    let dir = TempDir::new().unwrap();
    let mut doc = line3_document();
    doc.states[1] = doc.states[0].clone();
    let model = write(&dir, "m.json", &doc.to_json());
    let policy = write(&dir, "p.json", r#"{"0": "right", "1": "reset"}"#);
    let o = dtsynth(&["map", s(&model), s(&policy), "--depth", "0"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.stdout.starts_with("UNSAT\n"));
    assert_eq!(line(&o.stdout, "critical states: "), "0, 1");
    assert_eq!(line(&o.stdout, "harmonizing parameter: "), "a0");
}

#[test]
fn map_rejects_disabled_actions() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "line3.json", &line3_document().to_json());
    let policy = write(&dir, "p.json", r#"{"0": "jump"}"#);
    let o = dtsynth(&["map", s(&model), s(&policy)]);
    assert_eq!(o.code, 1);
    assert!(o.stderr.contains("unknown action"));
}

#[test]
fn reduce_fixture_and_reevaluate() {
    let dir = TempDir::new().unwrap();
    let (doc, t) = reduction_fixture();
    let model = write(&dir, "m.json", &doc.to_json());
    let tree = write(&dir, "t.json", &t.to_json());
    let small = dir.path().join("small.json");
    let o = dtsynth(&[
        "reduce",
        s(&model),
        s(&tree),
        "--subtree-depth",
        "3",
        "--error",
        "0.01",
        "--out",
        s(&small),
    ]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let (before, after) = line(&o.stdout, "inner nodes: ")
        .split_once(" -> ")
        .map(|(a, b)| (a.parse::<usize>().unwrap(), b.parse::<usize>().unwrap()))
        .unwrap();
    assert_eq!(before, 7);
    assert!(after * 10 <= before * 7, "{after}");

    let ev = dtsynth(&["evaluate", s(&model), s(&small)]);
    assert_eq!(ev.code, 0);
    let printed: f64 = line(&ev.stdout, "value: ").parse().unwrap();
    let m = parse_model(&doc.to_json()).unwrap().augment_random_action().unwrap();
    let small_tree = DecisionTree::from_json(&std::fs::read_to_string(&small).unwrap()).unwrap();
    let direct = tree_value(&m, &Objective::max_reach(&m), &small_tree, DEFAULT_EPS).unwrap();
    assert!((printed - direct).abs() <= 10.0 * DEFAULT_EPS);
}

#[test]
fn minimal_tree_is_not_reduced() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "line3.json", &line3_document().to_json());
    let tree = write(&dir, "t.json", &DecisionTree::leaf(0).to_json());
    let o = dtsynth(&["reduce", s(&model), s(&tree), "--subtree-depth", "1"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert_eq!(line(&o.stdout, "inner nodes: "), "0 -> 0");
}

#[test]
fn evaluate_rejects_foreign_tree() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "line3.json", &line3_document().to_json());
    // line3 has a single variable.
    let t = DecisionTree::new(
        vec![
            Node::Inner {
                pred: Predicate { var: 1, bound: 0 },
                left: 1,
                right: 2,
            },
            Node::Leaf { action: 0 },
            Node::Leaf { action: 1 },
        ],
        0,
    )
    .unwrap();
    let tree = write(&dir, "t.json", &t.to_json());
    let o = dtsynth(&["evaluate", s(&model), s(&tree)]);
    assert_eq!(o.code, 1, "{}", o.stdout);
    assert!(o.stderr.starts_with("error: "));
}

#[test]
fn generators_are_deterministic_and_parse() {
    let a = dtsynth(&["generate", "random", "--states", "8", "--seed", "1"]);
    let b = dtsynth(&["generate", "random", "--states", "8", "--seed", "1"]);
    assert_eq!(a.code, 0);
    assert_eq!(a.stdout, b.stdout);
    parse_model(&a.stdout).unwrap();

    let g = dtsynth(&["generate", "gridworld", "--width", "3", "--height", "3", "--exit", "2,2", "--wall", "1,1", "--steps"]);
    assert_eq!(g.code, 0, "{}", g.stderr);
    assert_eq!(parse_model(&g.stdout).unwrap().num_states(), 8);

    let x = dtsynth(&["generate", "x3c", "--universe", "3", "--set", "1,2,3"]);
    assert_eq!(x.code, 0, "{}", x.stderr);
    assert_eq!(parse_model(&x.stdout).unwrap().num_states(), 8);
}

#[test]
fn seed_comes_from_the_environment() {
    let out = |seed: &str| {
        Command::new(env!("CARGO_BIN_EXE_dtsynth"))
            .args(["generate", "random", "--states", "6"])
            .env(dtsynth::cli::SEED_VAR, seed)
            .output()
            .unwrap()
    };
    let a = out("7");
    assert!(a.status.success());
    assert_eq!(a.stdout, out("7").stdout);
    assert_ne!(a.stdout, out("8").stdout);
    let explicit = Command::new(env!("CARGO_BIN_EXE_dtsynth"))
        .args(["generate", "random", "--states", "6", "--seed", "7"])
        .output()
        .unwrap();
    assert_eq!(a.stdout, explicit.stdout);
}
