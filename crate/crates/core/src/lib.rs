//! Synthesis of small decision trees that represent (near-)optimal policies
//! of Markov decision processes.
//!
//! The crate is organised bottom-up:
//!
//! - [`mdp`]: explicit MDPs, policies, the random action, induced chains.
//! - [`checker`]: value iteration and policy evaluation.
//! - [`tree`]: decision trees, templates, families of parameterizations.
//! - [`solver`]: a finite-domain constraint solver with unsat cores.
//! - [`encoder`]: implementability constraints, critical states,
//!   harmonization and family-MDPs.
//! - [`synthesis`]: the abstraction-refinement search, bounded-depth
//!   scheduling and sub-tree reduction.
//! - [`bench`]: model generators and a brute-force oracle.
//! - [`cli`]: the command-line front end used by the `dtsynth` binary.
//!
//! ```
//! use dtsynth::prelude::*;
//!
//! let model = dtsynth::bench::line3().augment_random_action().unwrap();
//! let objective = Objective::max_reach(&model);
//! let config = SearchConfig::new(0);
//! let result = synthesize_bounded_depth(&model, &objective, &config).unwrap();
//! assert!((result.best_value - 1.0).abs() < 1e-6);
//! ```

pub mod bench;
pub mod checker;
pub mod cli;
pub mod encoder;
pub mod mdp;
pub mod solver;
pub mod synthesis;
pub mod tree;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] mdp::ModelError),
    #[error(transparent)]
    Check(#[from] checker::CheckError),
    #[error(transparent)]
    Tree(#[from] tree::TreeError),
    #[error(transparent)]
    Solver(#[from] solver::SolverError),
    #[error(transparent)]
    Encode(#[from] encoder::EncodeError),
    #[error(transparent)]
    Synthesis(#[from] synthesis::SynthesisError),
    #[error(transparent)]
    Bench(#[from] bench::BenchError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub mod prelude {
    pub use crate::checker::{check, value_of_policy, CheckResult, Normalizer, Objective};
    pub use crate::mdp::{parse_model, Mdp, Policy};
    pub use crate::synthesis::{
        reduce_tree, synthesize_bounded_depth, synthesize_fixed_template, SearchConfig,
        SynthesisResult, SynthesisStatus,
    };
    pub use crate::tree::{DecisionTree, ParamSet, Parameterization, TreeTemplate};
}
