//! Synthesis of trees minimizing the expected total reward on seeded random
//! MDPs, checked against the brute-force oracle, and the anytime log of one
//! run.

use dtsynth::bench::{brute_force_best_tree, gen_random_mdp, RandomMdpSpec, DEFAULT_CAP};
use dtsynth::checker::{Objective, DEFAULT_EPS};
use dtsynth::mdp::Mdp;
use dtsynth::synthesis::{synthesize_bounded_depth, synthesize_fixed_template, Incumbent, SearchConfig};
use dtsynth::tree::full_template;

fn main() -> dtsynth::Result<()> {
    println!("seed  states  depth  synthesized  oracle    families  policies");
    for seed in 0..8 {
        let spec = RandomMdpSpec::new(seed, 10, 2, 3, 2);
        let m = Mdp::from_document(&gen_random_mdp(&spec)?)?.augment_random_action()?;
        let obj = Objective::min_expected_reward(&m);
        let depth = 2;
        let (tpl, family) = full_template(&m, depth)?;
        let r = synthesize_fixed_template(
            &m,
            &obj,
            &tpl,
            vec![family.clone()],
            Incumbent::none(&obj),
            None,
            &SearchConfig::new(depth),
        )?;
        let oracle = brute_force_best_tree(&m, &obj, &tpl, &family, DEFAULT_CAP, DEFAULT_EPS)?;
        println!(
            "{seed:<5} {:<7} {depth:<6} {:<12.4} {:<9.4} {:<9} {}",
            m.num_states(),
            r.best_value,
            oracle.value,
            r.stats.families,
            oracle.distinct_policies
        );
    }

    let spec = RandomMdpSpec::new(42, 12, 3, 4, 3);
    let m = Mdp::from_document(&gen_random_mdp(&spec)?)?.augment_random_action()?;
    let r = synthesize_bounded_depth(&m, &Objective::min_expected_reward(&m), &SearchConfig::new(3))?;
    println!();
    print!("{}", r.log_csv());
    Ok(())
}
