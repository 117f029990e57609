//! Mapping a fixed policy to a tree of fixed depth, and what is reported
//! when that is impossible.

use dtsynth::bench::line3_document;
use dtsynth::encoder::StateOrder;
use dtsynth::mdp::{Mdp, Policy};
use dtsynth::synthesis::{map_policy, MapOutcome};

fn report(m: &Mdp, policy: &Policy, depth: usize) -> dtsynth::Result<()> {
    let labels: Vec<&str> = policy.iter().map(|(_, a)| a.map_or("-", |a| m.action_label(a))).collect();
    print!("policy {labels:?} at depth {depth}: ");
    match map_policy(m, policy, depth, StateOrder::Bfs, Some(50_000))? {
        MapOutcome::Implemented { tree, .. } => {
            println!("implemented by a tree with {} inner nodes", tree.inner_count());
        }
        MapOutcome::NotImplementable {
            core,
            core_params,
            harmonizing_param,
            ..
        } => {
            println!("not implementable");
            println!("  critical states:       {:?}", core.critical);
            println!("  core parameters:       {core_params:?}");
            println!("  harmonizing parameter: {harmonizing_param:?}");
        }
    }
    Ok(())
}

fn main() -> dtsynth::Result<()> {
    let m = dtsynth::bench::line3().augment_random_action()?;
    let (right, reset) = (m.action_index("right").unwrap(), m.action_index("reset").unwrap());

    report(&m, &Policy::constant(3, right), 0)?;
    let alternating = Policy::from_choices(vec![Some(right), Some(reset), None]);
    report(&m, &alternating, 0)?;
    report(&m, &alternating, 1)?;

    // With two states sharing a valuation no depth separates them.
    let mut doc = line3_document();
    doc.states[1] = doc.states[0].clone();
    let twins = Mdp::from_document(&doc)?.augment_random_action()?;
    report(&twins, &alternating, 2)?;
    Ok(())
}
