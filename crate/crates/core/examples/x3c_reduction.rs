//! The exact-cover construction: a tree of depth |U|/3 + 2 that walks the
//! chain to the goal exists exactly when the sets contain an exact cover.

use dtsynth::bench::{exact_cover_exists, gen_x3c, x3c_chain_policy, X3cInstance};
use dtsynth::checker::{Objective, DEFAULT_EPS};
use dtsynth::encoder::find_implementation;
use dtsynth::mdp::Mdp;
use dtsynth::synthesis::tree_value;
use dtsynth::tree::{full_template, postprocess};

fn main() -> dtsynth::Result<()> {
    let instances = [
        vec![[1, 2, 3], [4, 5, 6]],
        vec![[1, 2, 3], [1, 2, 4], [1, 2, 5]],
        vec![[1, 2, 4], [3, 5, 6], [2, 3, 4]],
        vec![[1, 2, 4], [2, 3, 5], [3, 4, 6], [1, 5, 6]],
    ];
    for sets in instances {
        let inst = X3cInstance { universe: 6, sets };
        let m = Mdp::from_document(&gen_x3c(&inst)?)?.augment_random_action()?;
        let (tpl, family) = full_template(&m, inst.depth())?;
        let found = find_implementation(&tpl, &family, &x3c_chain_policy(&inst), &m)?;
        print!("{:?}: cover {}, ", inst.sets, exact_cover_exists(&inst));
        match found {
            Some(f) => {
                let tree = postprocess(&tpl.instantiate(&f)?, &m);
                let v = tree_value(&m, &Objective::max_reach(&m), &tree, DEFAULT_EPS)?;
                println!("depth-{} tree with value {v} and {} inner nodes", inst.depth(), tree.inner_count());
            }
            None => println!("no depth-{} tree follows the chain", inst.depth()),
        }
    }
    Ok(())
}
