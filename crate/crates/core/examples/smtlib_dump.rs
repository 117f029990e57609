//! The implementability constraints of a policy as an SMT-LIB script. When
//! `z3` is on the path the script is also solved externally and compared
//! with the built-in solver.

use dtsynth::encoder::encode_policy;
use dtsynth::mdp::Policy;
use dtsynth::solver::{ExternalSolver, SolveOutcome};
use dtsynth::tree::full_template;

fn verdict(o: &SolveOutcome) -> String {
    match o {
        SolveOutcome::Sat(_) => "sat".into(),
        SolveOutcome::Unsat(core) => format!("unsat, core {core:?}"),
        SolveOutcome::Unknown => "unknown".into(),
    }
}

fn main() -> dtsynth::Result<()> {
    let m = dtsynth::bench::line3().augment_random_action()?;
    let (tpl, family) = full_template(&m, 0)?;
    let policy = Policy::from_choices(vec![Some(0), Some(1), None]);
    let enc = encode_policy(&tpl, &family, &policy, &m)?;
    print!("{}", enc.system.to_smtlib(&enc.system.all_groups()));

    let groups: Vec<&str> = enc.system.groups().iter().map(|g| g.name.as_str()).collect();
    println!("; built-in: {}", verdict(&enc.system.solve(&groups)?));
    let z3 = ExternalSolver::z3();
    if z3.available() {
        println!("; z3: {}", verdict(&z3.solve(&enc.system, &groups)?));
    }
    Ok(())
}
