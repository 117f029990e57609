//! Harmonizing parameterizations: two members of a family that differ in
//! at most one parameter and together cover a policy on a set of states.

use super::{act_clause, requirements, EncodeError};
use crate::mdp::{Mdp, Policy, StateId};
use crate::solver::{Assignment, Atom, Clause, ConstraintSystem, Outcome, VarId};
use crate::tree::{ParamSet, Parameterization, TreeTemplate};

/// The constraint system Φ^H over two copies of the template parameters.
#[derive(Debug, Clone)]
pub struct HarmonizationSystem {
    pub system: ConstraintSystem,
    /// Index of the parameter the two copies may disagree on.
    pub h: VarId,
    pub unprimed: Vec<VarId>,
    pub primed: Vec<VarId>,
    /// One selector per critical state: 0 means the unprimed copy covers it.
    pub selectors: Vec<VarId>,
}

/// The outcome of harmonization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Harmonizing {
    /// Template parameter on which `f1` and `f2` may differ.
    pub param: usize,
    pub f1: Parameterization,
    pub f2: Parameterization,
    /// `f1 == f2`: a single tree already covers the critical states, so the
    /// pair gives no splitting information.
    pub degenerate: bool,
}

/// Builds Φ^H(F, σ) restricted to `critical`: domain constraints for both
/// copies, channel clauses `(h = i) ∨ (x_i = x'_i)`, and per critical state
/// the act constraints of either copy (chosen by a selector variable).
///
/// Variables are declared in the order `h, x_0, x'_0, x_1, x'_1, ...`
/// followed by the selectors.
pub fn encode_harmonization(
    tpl: &TreeTemplate,
    family: &ParamSet,
    policy: &Policy,
    critical: &[StateId],
    m: &Mdp,
) -> Result<HarmonizationSystem, EncodeError> {
    if critical.is_empty() {
        return Err(EncodeError::EmptyCritical);
    }
    let reqs = requirements(m, &policy.restricted_to(critical))?;
    let p = tpl.num_params();
    let mut system = ConstraintSystem::new();
    let h = system.add_var("h", 0..p as i64)?;
    let mut unprimed = Vec::with_capacity(p);
    let mut primed = Vec::with_capacity(p);
    for i in 0..p {
        let name = tpl.param_name(i);
        unprimed.push(system.add_var(name.clone(), tpl.template_domain(i))?);
        primed.push(system.add_var(format!("{name}'"), tpl.template_domain(i))?);
    }
    let selectors: Vec<VarId> = reqs
        .iter()
        .map(|(s, _)| system.add_var(format!("c{s}"), [0, 1]))
        .collect::<Result<_, _>>()?;

    for i in 0..p {
        let dom = family.domain(i).iter().copied();
        system.add_group(
            format!("dom:{}", tpl.param_name(i)),
            vec![Clause::member(unprimed[i], dom.clone())],
        )?;
        system.add_group(
            format!("dom:{}'", tpl.param_name(i)),
            vec![Clause::member(primed[i], dom)],
        )?;
    }
    let channels = (0..p)
        .map(|i| {
            Clause::new(vec![
                vec![Atom::Eq(h, i as i64)],
                vec![Atom::EqVar(unprimed[i], primed[i])],
            ])
        })
        .collect();
    system.add_group("harm", channels)?;

    let paths = tpl.topology().leaf_paths();
    for (k, &(s, req)) in reqs.iter().enumerate() {
        let c = selectors[k];
        let mut clauses = Vec::new();
        for (copy, vars) in [(0, &unprimed), (1, &primed)] {
            for (leaf, path) in &paths {
                let mut clause = act_clause(tpl, path, *leaf, m, s, req, vars);
                clause.cubes.insert(0, vec![Atom::Ne(c, copy)]);
                clauses.push(clause);
            }
        }
        system.add_group(format!("crit:{s}"), clauses)?;
    }
    Ok(HarmonizationSystem {
        system,
        h,
        unprimed,
        primed,
        selectors,
    })
}

/// Reads `(h, f1, f2)` from a model of Φ^H.
pub fn extract_harmonizing(
    enc: &HarmonizationSystem,
    model: &Assignment,
) -> Result<Harmonizing, EncodeError> {
    let get = |x: VarId| {
        model
            .values
            .get(x)
            .copied()
            .ok_or_else(|| EncodeError::MissingVariable(enc.system.vars()[x].name.clone()))
    };
    let param = get(enc.h)? as usize;
    let f1 = Parameterization {
        values: enc.unprimed.iter().map(|&x| get(x)).collect::<Result<_, _>>()?,
    };
    let f2 = Parameterization {
        values: enc.primed.iter().map(|&x| get(x)).collect::<Result<_, _>>()?,
    };
    Ok(Harmonizing {
        param,
        degenerate: f1 == f2,
        f1,
        f2,
    })
}

/// Encodes and solves Φ^H. Returns `None` when it is unsatisfiable or the
/// solver gives up within `budget` nodes.
pub fn harmonize(
    tpl: &TreeTemplate,
    family: &ParamSet,
    policy: &Policy,
    critical: &[StateId],
    m: &Mdp,
    budget: Option<u64>,
) -> Result<Option<Harmonizing>, EncodeError> {
    let enc = encode_harmonization(tpl, family, policy, critical, m)?;
    match enc.system.solve_ids(&enc.system.all_groups(), budget) {
        Outcome::Sat(model) => Ok(Some(extract_harmonizing(&enc, &model)?)),
        Outcome::Unsat(_) | Outcome::Unknown => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::line3_document;
    use crate::tree::{full_template, induce_policy};

    #[test]
    fn two_state_conflict_at_depth_zero() {
        let mut doc = line3_document();
        doc.states[1] = vec![0];
        let m = Mdp::from_document(&doc).unwrap().augment_random_action().unwrap();
        let (tpl, fam) = full_template(&m, 0).unwrap();
        let sigma = Policy::from_choices(vec![Some(0), Some(1), None]);
        let h = harmonize(&tpl, &fam, &sigma, &[0, 1], &m, None).unwrap().unwrap();
        assert_eq!(h.param, 0);
        assert!(!h.degenerate);
        let mut pair = [h.f1.values[0], h.f2.values[0]];
        pair.sort();
        assert_eq!(pair, [0, 1]);
        for s in [0, 1] {
            let covered = [&h.f1, &h.f2].iter().any(|f| {
                induce_policy(&tpl.instantiate(f).unwrap(), &m).unwrap().get(s) == sigma.get(s)
            });
            assert!(covered);
        }
    }

    #[test]
    fn empty_critical_set_is_rejected() {
        let m = crate::bench::line3().augment_random_action().unwrap();
        let (tpl, fam) = full_template(&m, 0).unwrap();
        assert_eq!(
            encode_harmonization(&tpl, &fam, &Policy::undefined(3), &[], &m).unwrap_err(),
            EncodeError::EmptyCritical
        );
    }

    #[test]
    fn implementable_states_give_degenerate_pair() {
        let m = crate::bench::line3().augment_random_action().unwrap();
        let (tpl, fam) = full_template(&m, 0).unwrap();
        let sigma = Policy::from_choices(vec![Some(0), Some(0), None]);
        let h = harmonize(&tpl, &fam, &sigma, &[0, 1], &m, None).unwrap().unwrap();
        assert!(h.degenerate);
    }
}
