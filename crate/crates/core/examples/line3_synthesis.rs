//! Bounded-depth synthesis on a three-state chain, or on a model file.
//!
//! ```text
//! cargo run --example line3_synthesis
//! cargo run --example line3_synthesis -- model.json 2
//! ```

use dtsynth::prelude::*;

fn main() -> dtsynth::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let model = match args.first() {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| dtsynth::Error::Io {
                path: path.clone(),
                source,
            })?;
            parse_model(&text)?
        }
        None => dtsynth::bench::line3(),
    };
    let depth = args.get(1).and_then(|d| d.parse().ok()).unwrap_or(1);
    let model = model.augment_random_action()?;
    let objective = Objective::max_reach(&model);

    let result = synthesize_bounded_depth(&model, &objective, &SearchConfig::new(depth))?;
    let tree = result.best_tree.expect("the search always finds a leaf");
    println!("status:      {}", result.status.label());
    println!("value:       {:.6}", result.best_value);
    println!("inner nodes: {}", tree.inner_count());
    println!("families:    {}", result.stats.families);
    println!();
    println!("{}", tree.to_dot_named(&model));
    Ok(())
}
