mod common;

use std::collections::BTreeSet;

use dtsynth::bench::{brute_force_best_tree, gen_gridworld, gen_random_mdp, gen_x3c, GridworldSpec, RandomMdpSpec, X3cInstance, DEFAULT_CAP};
use dtsynth::checker::{check, value_of_policy, Objective, DEFAULT_EPS};
use dtsynth::encoder::{critical_states, encode_policy, family_mdp, find_implementation, StateOrder};
use dtsynth::mdp::{parse_model, Mdp, ModelDocument, Policy};
use dtsynth::solver::{enumerate_solutions, Atom, Clause, ConstraintSystem, SolveOutcome};
use dtsynth::synthesis::{
    preprocess_policy, split_arbitrary, synthesize_fixed_template, tree_value, Incumbent, SearchConfig, SynthesisStatus,
};
use dtsynth::tree::{full_template, induced_actions, postprocess, ParamSet, Parameterization, TreeTemplate};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_spec() -> impl Strategy<Value = RandomMdpSpec> {
    (any::<u64>(), 1usize..=12, 1usize..=3, 1usize..=4, 1usize..=3)
        .prop_map(|(seed, states, vars, actions, branching)| RandomMdpSpec::new(seed, states, vars, actions, branching))
}

fn model(spec: &RandomMdpSpec) -> Mdp {
    Mdp::from_document(&gen_random_mdp(spec).unwrap()).unwrap()
}

fn random_member(rng: &mut impl Rng, family: &ParamSet) -> Parameterization {
    Parameterization {
        values: (0..family.len())
            .map(|i| {
                let d = family.domain(i);
                d[rng.gen_range(0..d.len())]
            })
            .collect(),
    }
}

/// A random sub-family with at most `width` values per parameter.
fn random_subfamily(rng: &mut impl Rng, family: &ParamSet, width: usize) -> ParamSet {
    (0..family.len()).fold(family.clone(), |fam, i| {
        let mut d = fam.domain(i).to_vec();
        while d.len() > width || (d.len() > 1 && rng.gen_bool(0.3)) {
            d.remove(rng.gen_range(0..d.len()));
        }
        fam.with_domain(i, d)
    })
}

/// A random policy that is defined on non-goal states with probability 0.7.
fn random_policy(rng: &mut impl Rng, m: &Mdp) -> Policy {
    let mut p = Policy::undefined(m.num_states());
    for s in (0..m.num_states()).filter(|&s| !m.is_goal(s)) {
        if rng.gen_bool(0.7) {
            let enabled: Vec<usize> = m.enabled(s).collect();
            p.set(s, Some(enabled[rng.gen_range(0..enabled.len())]));
        }
    }
    p
}

fn agrees(tpl: &TreeTemplate, f: &Parameterization, sigma: &Policy, m: &Mdp) -> bool {
    let induced = induced_actions(&tpl.instantiate(f).unwrap(), m).unwrap();
    sigma.iter().all(|(s, a)| a.is_none() || a == induced.get(s))
}

fn all_groups(sys: &ConstraintSystem) -> Vec<&str> {
    sys.groups().iter().map(|g| g.name.as_str()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn augmentation_keeps_the_optimum(spec in small_spec()) {
        let m = model(&spec);
        let aug = m.augment_random_action().unwrap();
        let v = check(&m, &Objective::max_reach(&m), DEFAULT_EPS).unwrap().value_at_initial;
        let w = check(&aug, &Objective::max_reach(&aug), DEFAULT_EPS).unwrap().value_at_initial;
        prop_assert!((v - w).abs() <= 1e-6);
    }

    #[test]
    fn restricting_to_all_pairs_is_identity(spec in small_spec()) {
        let m = model(&spec).augment_random_action().unwrap();
        prop_assert_eq!(m.restrict(&m.pairs()).unwrap(), m);
    }

    #[test]
    fn policy_values_match_exact_solution(spec in small_spec(), seed in any::<u64>()) {
        let m = model(&spec);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = Policy::from_choices(
            (0..m.num_states())
                .map(|s| {
                    let enabled: Vec<usize> = m.enabled(s).collect();
                    Some(enabled[rng.gen_range(0..enabled.len())])
                })
                .collect(),
        );
        let v = value_of_policy(&m, &p, &Objective::max_reach(&m), DEFAULT_EPS).unwrap();
        let exact = common::exact_reach(&m, &p)[m.initial()];
        prop_assert!((v - exact).abs() <= 1e-5, "{} vs {}", v, exact);
    }

    #[test]
    fn extracted_policies_achieve_the_value(spec in small_spec()) {
        let m = model(&spec);
        for obj in [Objective::max_reach(&m), Objective::min_expected_reward(&m)] {
            let r = check(&m, &obj, DEFAULT_EPS).unwrap();
            let v = value_of_policy(&m, &r.policy, &obj, DEFAULT_EPS).unwrap();
            if r.value_at_initial.is_finite() {
                prop_assert!((v - r.value_at_initial).abs() <= 10.0 * DEFAULT_EPS * r.value_at_initial.abs().max(1.0),
                    "{:?}: {} vs {}", obj, v, r.value_at_initial);
            } else {
                prop_assert!(v.is_infinite());
            }
        }
    }

    #[test]
    fn sub_mdps_are_no_better(spec in small_spec(), seed in any::<u64>()) {
        let m = model(&spec);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let keep: Vec<Vec<bool>> = (0..m.num_states())
            .map(|s| {
                let n = m.choices(s).len();
                let forced = rng.gen_range(0..n);
                (0..n).map(|i| i == forced || rng.gen_bool(0.5)).collect()
            })
            .collect();
        let sub = m.restrict_with(|s, a| {
            let i = m.choices(s).iter().position(|c| c.action == a).unwrap();
            keep[s][i]
        }).unwrap();
        let v = check(&m, &Objective::max_reach(&m), DEFAULT_EPS).unwrap().value_at_initial;
        let w = check(&sub, &Objective::max_reach(&sub), DEFAULT_EPS).unwrap().value_at_initial;
        prop_assert!(w <= v + 10.0 * DEFAULT_EPS);
    }

    #[test]
    fn leaves_partition_the_states(spec in small_spec(), seed in any::<u64>()) {
        let m = model(&spec).augment_random_action().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = common::random_tree(&mut rng, &m, 4);
        let paths = t.topology().leaf_paths();
        for s in 0..m.num_states() {
            let val = m.valuation(s);
            let hits: Vec<usize> = paths
                .iter()
                .filter(|(_, path)| path.iter().all(|&(n, left)| match t.node(n) {
                    dtsynth::tree::Node::Inner { pred, .. } => pred.holds(val) == left,
                    dtsynth::tree::Node::Leaf { .. } => unreachable!(),
                }))
                .map(|&(leaf, _)| leaf)
                .collect();
            prop_assert_eq!(hits, vec![t.leaf_of(val)]);
        }
    }

    #[test]
    fn postprocessing_is_safe(spec in small_spec(), seed in any::<u64>()) {
        let m = model(&spec).augment_random_action().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = common::random_tree(&mut rng, &m, 4);
        let p = postprocess(&t, &m);
        prop_assert!(p.inner_count() <= t.inner_count());
        prop_assert_eq!(induced_actions(&p, &m).unwrap(), induced_actions(&t, &m).unwrap());
    }

    #[test]
    fn models_of_the_encoding_are_the_agreeing_members(
        seed in any::<u64>(),
        states in 1usize..=12,
        depth in 0usize..=2,
    ) {
        let spec = RandomMdpSpec::new(seed, states, 1 + seed as usize % 2, 2, 2);
        let m = model(&spec).augment_random_action().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (tpl, superfamily) = full_template(&m, depth).unwrap();
        let family = random_subfamily(&mut rng, &superfamily, if depth == 2 { 2 } else { 4 });
        let sigma = random_policy(&mut rng, &m);
        let enc = encode_policy(&tpl, &family, &sigma, &m).unwrap();
        let models: BTreeSet<Vec<i64>> = enumerate_solutions(&enc.system, &enc.system.all_groups())
            .into_iter()
            .map(|a| enc.param_vars.iter().map(|&v| a.values[v]).collect())
            .collect();
        let agreeing: BTreeSet<Vec<i64>> = family
            .iter()
            .filter(|f| agrees(&tpl, f, &sigma, &m))
            .map(|f| f.values)
            .collect();
        prop_assert_eq!(&models, &agreeing);
        prop_assert_eq!(find_implementation(&tpl, &family, &sigma, &m).unwrap().is_some(), !agreeing.is_empty());
    }

    #[test]
    fn critical_states_alone_are_unimplementable(seed in any::<u64>(), states in 2usize..=12, depth in 0usize..=2) {
        let spec = RandomMdpSpec::new(seed, states, 1 + seed as usize % 3, 3, 2);
        let m = model(&spec).augment_random_action().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (tpl, superfamily) = full_template(&m, depth).unwrap();
        let family = random_subfamily(&mut rng, &superfamily, 3);
        let sigma = random_policy(&mut rng, &m);
        prop_assume!(find_implementation(&tpl, &family, &sigma, &m).unwrap().is_none());
        let core = critical_states(&tpl, &family, &sigma, &m, StateOrder::Bfs).unwrap();
        prop_assert!(!core.critical.is_empty());
        let restricted = sigma.restricted_to(&core.critical);
        prop_assert!(find_implementation(&tpl, &family, &restricted, &m).unwrap().is_none());
    }

    #[test]
    fn members_play_family_mdp_actions(seed in any::<u64>(), states in 1usize..=12, depth in 0usize..=3) {
        let spec = RandomMdpSpec::new(seed, states, 1 + seed as usize % 3, 3, 2);
        let m = model(&spec).augment_random_action().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (tpl, superfamily) = full_template(&m, depth).unwrap();
        let family = random_subfamily(&mut rng, &superfamily, 3);
        let fm = family_mdp(&m, &tpl, &family).unwrap();
        for _ in 0..10 {
            let f = random_member(&mut rng, &family);
            let p = induced_actions(&tpl.instantiate(&f).unwrap(), &m).unwrap();
            for (s, a) in p.iter() {
                prop_assert!(fm.is_enabled(s, a.unwrap()));
            }
        }
    }

    #[test]
    fn family_mdp_matches_the_solver(seed in any::<u64>(), states in 1usize..=8, depth in 0usize..=2) {
        let spec = RandomMdpSpec::new(seed, states, 1 + seed as usize % 2, 3, 2);
        let m = model(&spec).augment_random_action().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (tpl, superfamily) = full_template(&m, depth).unwrap();
        let family = random_subfamily(&mut rng, &superfamily, 3);
        let fm = family_mdp(&m, &tpl, &family).unwrap();
        for s in 0..m.num_states() {
            for a in m.enabled(s) {
                let mut single = Policy::undefined(m.num_states());
                single.set(s, Some(a));
                let enc = encode_policy(&tpl, &family, &single, &m).unwrap();
                let sat = matches!(enc.system.solve(&all_groups(&enc.system)).unwrap(), SolveOutcome::Sat(_));
                prop_assert_eq!(fm.is_enabled(s, a), sat, "state {} action {}", s, a);
            }
        }
    }

    #[test]
    fn solver_agrees_with_enumeration(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sys = ConstraintSystem::new();
        let nvars = rng.gen_range(1..=4);
        let universes: Vec<std::ops::Range<i64>> = (0..nvars)
            .map(|_| {
                let lo = rng.gen_range(-2..=2);
                lo..lo + rng.gen_range(1..=4)
            })
            .collect();
        let vars: Vec<usize> = universes
            .iter()
            .enumerate()
            .map(|(i, u)| sys.add_var(format!("x{i}"), u.clone()).unwrap())
            .collect();
        let atom = |rng: &mut ChaCha8Rng| {
            let x = vars[rng.gen_range(0..vars.len())];
            let c = rng.gen_range(-3..=4);
            match rng.gen_range(0..5) {
                0 => Atom::Eq(x, c),
                1 => Atom::Ne(x, c),
                2 => Atom::Le(x, c),
                3 => Atom::Gt(x, c),
                _ => {
                    let y = vars[rng.gen_range(0..vars.len())];
                    if universes[x] == universes[y] { Atom::EqVar(x, y) } else { Atom::Eq(x, c) }
                }
            }
        };
        let ngroups = rng.gen_range(1..=6);
        for g in 0..ngroups {
            let clauses = (0..rng.gen_range(1..=2))
                .map(|_| Clause::new((0..rng.gen_range(1..=3)).map(|_| (0..rng.gen_range(1..=2)).map(|_| atom(&mut rng)).collect()).collect()))
                .collect();
            sys.add_group(format!("g{g}"), clauses).unwrap();
        }
        let names = all_groups(&sys);
        let expected = !enumerate_solutions(&sys, &sys.all_groups()).is_empty();
        match sys.solve(&names).unwrap() {
            SolveOutcome::Sat(a) => {
                prop_assert!(expected);
                prop_assert!(sys.satisfies(&a, &sys.all_groups()));
            }
            SolveOutcome::Unsat(core) => {
                prop_assert!(!expected);
                let core: Vec<&str> = core.iter().map(String::as_str).collect();
                prop_assert!(matches!(sys.solve(&core).unwrap(), SolveOutcome::Unsat(_)));
            }
            SolveOutcome::Unknown => prop_assert!(false, "no budget was set"),
        }
    }

    #[test]
    fn splits_partition_the_family(seed in any::<u64>(), depth in 0usize..=2) {
        let m = model(&RandomMdpSpec::new(seed, 6, 2, 3, 2)).augment_random_action().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (_, superfamily) = full_template(&m, depth).unwrap();
        let family = random_subfamily(&mut rng, &superfamily, 3);
        prop_assume!(family.size() > 1);
        let core: Vec<usize> = (0..family.len()).filter(|_| rng.gen_bool(0.3)).collect();
        let (a, b) = split_arbitrary(&family, &core).unwrap();
        prop_assert!(a.size() < family.size() && b.size() < family.size());
        prop_assert_eq!(a.size() + b.size(), family.size());
        prop_assert!(a.is_subset_of(&family) && b.is_subset_of(&family));
        prop_assert!(!a.iter().any(|f| b.contains(&f)));
    }

    #[test]
    fn generated_documents_round_trip(spec in small_spec(), w in 1i64..=5, h in 1i64..=5, slip in 0.0f64..0.5) {
        let mut docs: Vec<ModelDocument> = vec![gen_random_mdp(&spec).unwrap()];
        docs.push(gen_gridworld(&GridworldSpec::open(w, h, (w - 1, h - 1), slip)).unwrap());
        docs.push(gen_x3c(&X3cInstance { universe: 3, sets: vec![[1, 2, 3]] }).unwrap());
        for doc in docs {
            let text = doc.to_json();
            prop_assert_eq!(&ModelDocument::from_json(&text).unwrap(), &doc);
            let m = parse_model(&text).unwrap();
            prop_assert_eq!(&m, &Mdp::from_document(&doc).unwrap());
            prop_assert_eq!(parse_model(&m.to_document().to_json()).unwrap(), m);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pruned_families_hold_nothing_better(seed in any::<u64>(), states in 2usize..=8, depth in 1usize..=2) {
        let spec = RandomMdpSpec::new(seed, states, 1 + seed as usize % 2, 3, 2);
        let m = model(&spec).augment_random_action().unwrap();
        let obj = Objective::max_reach(&m);
        let (tpl, family) = full_template(&m, depth).unwrap();
        let cfg = SearchConfig { trace: true, ..SearchConfig::new(depth) };
        let r = synthesize_fixed_template(&m, &obj, &tpl, vec![family.clone()], Incumbent::none(&obj), None, &cfg).unwrap();
        prop_assert_eq!(&r.status, &SynthesisStatus::OptimalExhausted);
        for (pruned, incumbent) in r.trace.unwrap().pruned {
            let best = brute_force_best_tree(&m, &obj, &tpl, &pruned, DEFAULT_CAP, DEFAULT_EPS).unwrap();
            prop_assert!(best.value <= incumbent + 10.0 * DEFAULT_EPS, "{} > {}", best.value, incumbent);
        }
        let oracle = brute_force_best_tree(&m, &obj, &tpl, &family, DEFAULT_CAP, DEFAULT_EPS).unwrap();
        prop_assert!((oracle.value - r.best_value).abs() <= 1e-6);
        for e in &r.log {
            prop_assert!((tree_value(&m, &obj, &e.tree, DEFAULT_EPS).unwrap() - e.value).abs() <= 10.0 * DEFAULT_EPS);
        }
    }

    #[test]
    fn preprocessing_keeps_the_value(spec in small_spec()) {
        let m = model(&spec).augment_random_action().unwrap();
        let obj = Objective::max_reach(&m);
        let r = check(&m, &obj, DEFAULT_EPS).unwrap();
        let sigma = preprocess_policy(&m, &r.policy, obj.goal()).unwrap();
        // Any completion of the preprocessed policy keeps the value.
        let filled = Policy::from_choices(
            (0..m.num_states()).map(|s| sigma.get(s).or(Some(m.choices(s)[0].action))).collect(),
        );
        let v = value_of_policy(&m, &filled, &obj, DEFAULT_EPS).unwrap();
        prop_assert!((v - r.value_at_initial).abs() <= 10.0 * DEFAULT_EPS);
    }
}
