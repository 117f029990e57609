//! Expected steps out of a serpentine maze for trees of growing depth.
//!
//! Run with `--release`; depth 2 alone explores a few thousand families.

use std::time::{Duration, Instant};

use dtsynth::bench::{gen_gridworld, GridworldSpec};
use dtsynth::checker::{check, Normalizer, Objective, DEFAULT_EPS};
use dtsynth::mdp::Mdp;
use dtsynth::synthesis::{synthesize_bounded_depth, SearchConfig};

fn main() -> dtsynth::Result<()> {
    // Walls leave a single path: up column 0, down column 2, up column 4.
    let mut spec = GridworldSpec::open(5, 5, (4, 4), 0.1);
    spec.walls = vec![(1, 0), (1, 1), (1, 2), (1, 3), (3, 1), (3, 2), (3, 3), (3, 4)];
    let m = Mdp::from_document(&gen_gridworld(&spec)?)?.augment_random_action()?;
    let obj = Objective::min_expected_reward(&m);
    let norm = Normalizer::new(&m, &obj, DEFAULT_EPS)?;
    println!("optimal expected steps: {:.4}", check(&m, &obj, DEFAULT_EPS)?.value_at_initial);
    println!("random policy:          {:.4}", norm.random);
    println!();
    println!("depth  steps      normalized  nodes  status             time");
    for depth in 0..=4 {
        let start = Instant::now();
        let cfg = SearchConfig::new(depth).with_timeout(Duration::from_secs(120));
        let r = synthesize_bounded_depth(&m, &obj, &cfg)?;
        let nodes = r.best_tree.as_ref().map_or(0, |t| t.inner_count());
        println!(
            "{depth:<6} {:<10.4} {:<11.4} {nodes:<6} {:<18} {:.1?}",
            r.best_value,
            norm.normalize(r.best_value)?,
            r.status.label(),
            start.elapsed()
        );
    }
    Ok(())
}
