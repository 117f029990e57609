//! Splitting a family into two disjoint sub-families along one parameter.

use super::SynthesisError;
use crate::tree::{ParamSet, Parameterization};

fn halves_at(domain: &[i64], mid: i64) -> (Vec<i64>, Vec<i64>) {
    domain.iter().partition(|&&v| v <= mid)
}

/// Splits `F(h)` so that `f1(h)` and `f2(h)` end up on different sides.
/// Bounds are cut at `floor((f1(h) + f2(h)) / 2)`; other parameters are
/// split into `{f1(h)}` and the rest. The first returned family contains
/// `f1`'s value.
pub fn split_informed(
    family: &ParamSet,
    h: usize,
    f1: &Parameterization,
    f2: &Parameterization,
) -> Result<(ParamSet, ParamSet), SynthesisError> {
    if h >= family.len() {
        return Err(SynthesisError::BadSplit(format!("parameter {h} out of range")));
    }
    let (v1, v2) = (f1.values[h], f2.values[h]);
    let dom = family.domain(h);
    if v1 == v2 || dom.binary_search(&v1).is_err() || dom.binary_search(&v2).is_err() {
        return Err(SynthesisError::BadSplit(format!(
            "values {v1} and {v2} of parameter {h} must be distinct members of its domain"
        )));
    }
    let (first, second) = if family.kind(h).is_bound() {
        let (low, high) = halves_at(dom, (v1.min(v2) + v1.max(v2)).div_euclid(2));
        if v1 < v2 {
            (low, high)
        } else {
            (high, low)
        }
    } else {
        (vec![v1], dom.iter().copied().filter(|&v| v != v1).collect())
    };
    Ok((family.with_domain(h, first), family.with_domain(h, second)))
}

/// Halves the domain of the first parameter of `core` (or, failing that,
/// of any parameter) that has more than one value. Bounds are cut at the
/// midpoint of their range, other parameters after the first `ceil(n/2)`
/// values.
pub fn split_arbitrary(family: &ParamSet, core: &[usize]) -> Result<(ParamSet, ParamSet), SynthesisError> {
    let splittable = |&i: &usize| i < family.len() && family.domain(i).len() > 1;
    let h = core
        .iter()
        .copied()
        .find(splittable)
        .or_else(|| (0..family.len()).find(splittable))
        .ok_or(SynthesisError::Unsplittable)?;
    let dom = family.domain(h);
    let (first, second) = if family.kind(h).is_bound() {
        halves_at(dom, (dom[0] + dom[dom.len() - 1]).div_euclid(2))
    } else {
        let cut = dom.len().div_ceil(2);
        (dom[..cut].to_vec(), dom[cut..].to_vec())
    };
    Ok((family.with_domain(h, first), family.with_domain(h, second)))
}
