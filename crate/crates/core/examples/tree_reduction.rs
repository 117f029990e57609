//! Shrinking an oversized tree sub-tree by sub-tree within an error budget.

use dtsynth::bench::reduction_fixture;
use dtsynth::checker::Objective;
use dtsynth::mdp::Mdp;
use dtsynth::synthesis::{reduce_tree, SearchConfig};

fn main() -> dtsynth::Result<()> {
    let (doc, tree) = reduction_fixture();
    let m = Mdp::from_document(&doc)?.augment_random_action()?;
    let obj = Objective::max_reach(&m);
    for error in [0.0, 0.001, 0.01] {
        let r = reduce_tree(&m, &obj, &tree, 3, error, None, &SearchConfig::new(3))?;
        println!(
            "budget {error:<6} inner nodes {} -> {}, value {:.6} -> {:.6}, {} replacements",
            r.original_inner,
            r.tree.inner_count(),
            r.original_value,
            r.value,
            r.replacements
        );
    }
    Ok(())
}
