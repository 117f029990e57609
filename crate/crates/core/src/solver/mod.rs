//! A finite-domain constraint solver over named groups of clauses.
//!
//! A clause is a disjunction of cubes and a cube is a conjunction of atoms
//! over integer variables with explicit finite universes. Search is
//! depth-first with constructive-disjunction propagation, branching on the
//! smallest unfixed variable and trying values in ascending order. Every
//! domain reduction records the groups it depends on, so a refutation
//! yields an unsatisfiable subset of the active groups.

mod smtlib;

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

pub use smtlib::{parse_response, ExternalSolver, SmtResponse};

pub type VarId = usize;
pub type GroupId = usize;

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("unknown group `{0}`")]
    UnknownGroup(String),
    #[error("group `{0}` defined twice")]
    DuplicateGroup(String),
    #[error("variable `{0}` declared twice")]
    DuplicateVar(String),
    #[error("variable `{0}` has an empty universe")]
    EmptyUniverse(String),
    #[error("group `{group}` mentions undeclared variable {var}")]
    UnknownVar { group: String, var: VarId },
    #[error("group `{group}`: equality between `{a}` and `{b}` with different universes")]
    UniverseMismatch { group: String, a: String, b: String },
    #[error("external solver: {0}")]
    External(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Atom {
    Eq(VarId, i64),
    Ne(VarId, i64),
    Le(VarId, i64),
    Gt(VarId, i64),
    /// Equality of two variables with identical universes.
    EqVar(VarId, VarId),
}

impl Atom {
    fn vars(&self) -> impl Iterator<Item = VarId> {
        let (a, b) = match *self {
            Atom::Eq(x, _) | Atom::Ne(x, _) | Atom::Le(x, _) | Atom::Gt(x, _) => (x, None),
            Atom::EqVar(x, y) => (x, Some(y)),
        };
        std::iter::once(a).chain(b)
    }

    pub fn holds(&self, values: &[i64]) -> bool {
        match *self {
            Atom::Eq(x, c) => values[x] == c,
            Atom::Ne(x, c) => values[x] != c,
            Atom::Le(x, c) => values[x] <= c,
            Atom::Gt(x, c) => values[x] > c,
            Atom::EqVar(x, y) => values[x] == values[y],
        }
    }
}

/// A disjunction of cubes; each cube is a conjunction of atoms.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Clause {
    pub cubes: Vec<Vec<Atom>>,
}

impl Clause {
    pub fn new(cubes: Vec<Vec<Atom>>) -> Clause {
        Clause { cubes }
    }

    /// `x ∈ values`.
    pub fn member(x: VarId, values: impl IntoIterator<Item = i64>) -> Clause {
        Clause {
            cubes: values.into_iter().map(|v| vec![Atom::Eq(x, v)]).collect(),
        }
    }

    pub fn holds(&self, values: &[i64]) -> bool {
        self.cubes
            .iter()
            .any(|cube| cube.iter().all(|a| a.holds(values)))
    }

    fn vars(&self) -> Vec<VarId> {
        let mut v: Vec<VarId> = self.cubes.iter().flatten().flat_map(Atom::vars).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub name: String,
    /// Sorted, duplicate-free.
    pub universe: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub name: String,
    pub clauses: Vec<Clause>,
}

/// Variables with finite universes and named groups of clauses.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintSystem {
    vars: Vec<VarDecl>,
    var_index: HashMap<String, VarId>,
    groups: Vec<Group>,
    group_index: HashMap<String, GroupId>,
}

/// A value for every variable of a system.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    pub values: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveOutcome {
    Sat(Assignment),
    /// Names of an unsatisfiable subset of the active groups.
    Unsat(Vec<String>),
    /// The node budget ran out.
    Unknown,
}

/// Outcome over group ids, as used inside the crate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Outcome {
    Sat(Assignment),
    Unsat(Vec<GroupId>),
    Unknown,
}

impl ConstraintSystem {
    pub fn new() -> ConstraintSystem {
        ConstraintSystem::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, universe: impl IntoIterator<Item = i64>) -> Result<VarId, SolverError> {
        let name = name.into();
        let mut universe: Vec<i64> = universe.into_iter().collect();
        universe.sort_unstable();
        universe.dedup();
        if universe.is_empty() {
            return Err(SolverError::EmptyUniverse(name));
        }
        if self.var_index.contains_key(&name) {
            return Err(SolverError::DuplicateVar(name));
        }
        let id = self.vars.len();
        self.var_index.insert(name.clone(), id);
        self.vars.push(VarDecl { name, universe });
        Ok(id)
    }

    pub fn add_group(&mut self, name: impl Into<String>, clauses: Vec<Clause>) -> Result<GroupId, SolverError> {
        let name = name.into();
        if self.group_index.contains_key(&name) {
            return Err(SolverError::DuplicateGroup(name));
        }
        for atom in clauses.iter().flat_map(|c| c.cubes.iter().flatten()) {
            for v in atom.vars() {
                if v >= self.vars.len() {
                    return Err(SolverError::UnknownVar { group: name, var: v });
                }
            }
            if let Atom::EqVar(x, y) = *atom {
                if self.vars[x].universe != self.vars[y].universe {
                    return Err(SolverError::UniverseMismatch {
                        group: name,
                        a: self.vars[x].name.clone(),
                        b: self.vars[y].name.clone(),
                    });
                }
            }
        }
        let id = self.groups.len();
        self.group_index.insert(name.clone(), id);
        self.groups.push(Group { name, clauses });
        Ok(id)
    }

    pub fn vars(&self) -> &[VarDecl] {
        &self.vars
    }

    pub fn var(&self, name: &str) -> Option<VarId> {
        self.var_index.get(name).copied()
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn group(&self, name: &str) -> Option<GroupId> {
        self.group_index.get(name).copied()
    }

    pub fn group_name(&self, g: GroupId) -> &str {
        &self.groups[g].name
    }

    pub fn all_groups(&self) -> Vec<GroupId> {
        (0..self.groups.len()).collect()
    }

    fn resolve(&self, names: &[&str]) -> Result<Vec<GroupId>, SolverError> {
        names
            .iter()
            .map(|n| self.group(n).ok_or_else(|| SolverError::UnknownGroup(n.to_string())))
            .collect()
    }

    /// Direct evaluation of a group under a total assignment.
    pub fn group_holds(&self, g: GroupId, a: &Assignment) -> bool {
        self.groups[g].clauses.iter().all(|c| c.holds(&a.values))
    }

    /// Whether `a` is within the universes and satisfies every group in
    /// `active`.
    pub fn satisfies(&self, a: &Assignment, active: &[GroupId]) -> bool {
        a.values.len() == self.vars.len()
            && a.values
                .iter()
                .zip(&self.vars)
                .all(|(v, d)| d.universe.binary_search(v).is_ok())
            && active.iter().all(|&g| self.group_holds(g, a))
    }

    /// Decides the conjunction of the named groups.
    pub fn solve(&self, active: &[&str]) -> Result<SolveOutcome, SolverError> {
        let ids = self.resolve(active)?;
        Ok(self.to_named(self.solve_ids(&ids, None)))
    }

    fn to_named(&self, o: Outcome) -> SolveOutcome {
        match o {
            Outcome::Sat(a) => SolveOutcome::Sat(a),
            Outcome::Unsat(core) => SolveOutcome::Unsat(
                core.into_iter().map(|g| self.groups[g].name.clone()).collect(),
            ),
            Outcome::Unknown => SolveOutcome::Unknown,
        }
    }

    /// Decides the conjunction of the groups `active`, giving up after
    /// `budget` search nodes.
    pub(crate) fn solve_ids(&self, active: &[GroupId], budget: Option<u64>) -> Outcome {
        Engine::new(self, active, budget).run()
    }

    /// Drops groups from an unsatisfiable core one at a time while the rest
    /// stays unsatisfiable. Cores returned by [`ConstraintSystem::solve`]
    /// are not minimized; this pass is optional.
    pub fn shrink_core(&self, core: &[&str]) -> Result<Vec<String>, SolverError> {
        let ids = self.resolve(core)?;
        Ok(self
            .shrink_core_ids(&ids)
            .into_iter()
            .map(|g| self.groups[g].name.clone())
            .collect())
    }

    fn shrink_core_ids(&self, core: &[GroupId]) -> Vec<GroupId> {
        let mut keep = core.to_vec();
        let mut i = 0;
        while i < keep.len() {
            let mut trial = keep.clone();
            trial.remove(i);
            match self.solve_ids(&trial, None) {
                Outcome::Unsat(c) => keep = c,
                _ => i += 1,
            }
        }
        keep
    }

    pub fn session(&self) -> Session<'_> {
        Session {
            sys: self,
            active: Vec::new(),
            last: None,
        }
    }
}

impl fmt::Display for ConstraintSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_smtlib(&self.all_groups()))
    }
}

/// Incremental solving over a growing set of active groups. A model of the
/// previous query is reused while it satisfies the new groups; it is then
/// also the model a fresh solve would return, because search finds the
/// lexicographically smallest solution.
pub struct Session<'a> {
    sys: &'a ConstraintSystem,
    active: Vec<GroupId>,
    last: Option<Assignment>,
}

impl Session<'_> {
    pub fn push_group(&mut self, name: &str) -> Result<(), SolverError> {
        let g = self
            .sys
            .group(name)
            .ok_or_else(|| SolverError::UnknownGroup(name.to_string()))?;
        self.push_id(g);
        Ok(())
    }

    pub(crate) fn push_id(&mut self, g: GroupId) {
        self.active.push(g);
        if let Some(a) = &self.last {
            if !self.sys.group_holds(g, a) {
                self.last = None;
            }
        }
    }

    pub fn active(&self) -> &[GroupId] {
        &self.active
    }

    pub fn solve(&mut self) -> SolveOutcome {
        let o = self.solve_ids(None);
        self.sys.to_named(o)
    }

    pub(crate) fn solve_ids(&mut self, budget: Option<u64>) -> Outcome {
        if let Some(a) = &self.last {
            return Outcome::Sat(a.clone());
        }
        let o = self.sys.solve_ids(&self.active, budget);
        if let Outcome::Sat(a) = &o {
            self.last = Some(a.clone());
        }
        o
    }
}

struct Bits<'a>(&'a [u64]);

fn words_for(n: usize) -> usize {
    n.div_ceil(64).max(1)
}

impl Bits<'_> {
    fn first(&self) -> Option<usize> {
        self.0
            .iter()
            .enumerate()
            .find(|(_, w)| **w != 0)
            .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
    }

    fn count(&self) -> u32 {
        self.0.iter().map(|w| w.count_ones()).sum()
    }

    fn ones(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (i, &w) in self.0.iter().enumerate() {
            let mut w = w;
            while w != 0 {
                out.push(i * 64 + w.trailing_zeros() as usize);
                w &= w - 1;
            }
        }
        out
    }
}

/// A cube compiled against the universes: one mask per constrained
/// variable plus variable equalities.
struct CCube {
    unary: Vec<(VarId, Vec<u64>)>,
    eqs: Vec<(VarId, VarId)>,
}

struct CClause {
    group: usize,
    cubes: Vec<CCube>,
    vars: Vec<VarId>,
}

struct Engine<'a> {
    sys: &'a ConstraintSystem,
    /// Position of each active group in the reason bitsets.
    groups: Vec<GroupId>,
    clauses: Vec<CClause>,
    watch: Vec<Vec<usize>>,
    offset: Vec<usize>,
    width: Vec<usize>,
    gw: usize,
    nodes: u64,
    budget: Option<u64>,
}

#[derive(Clone)]
struct SearchState {
    dom: Vec<u64>,
    reason: Vec<u64>,
}

enum Res {
    Sat(Vec<usize>),
    Fail(Vec<u64>),
    Unknown,
}

impl<'a> Engine<'a> {
    fn new(sys: &'a ConstraintSystem, active: &[GroupId], budget: Option<u64>) -> Engine<'a> {
        let mut groups = active.to_vec();
        groups.sort_unstable();
        groups.dedup();
        let mut offset = Vec::with_capacity(sys.vars.len());
        let mut width = Vec::with_capacity(sys.vars.len());
        let mut total = 0;
        for v in &sys.vars {
            offset.push(total);
            let w = words_for(v.universe.len());
            width.push(w);
            total += w;
        }
        let mask_of = |x: VarId, pred: &dyn Fn(i64) -> bool| -> Vec<u64> {
            let mut m = vec![0u64; width[x]];
            for (i, &v) in sys.vars[x].universe.iter().enumerate() {
                if pred(v) {
                    m[i / 64] |= 1 << (i % 64);
                }
            }
            m
        };
        let mut clauses = Vec::new();
        for (gi, &g) in groups.iter().enumerate() {
            for clause in &sys.groups[g].clauses {
                let mut cubes = Vec::new();
                for cube in &clause.cubes {
                    let mut unary: Vec<(VarId, Vec<u64>)> = Vec::new();
                    let mut eqs = Vec::new();
                    for atom in cube {
                        let (x, m) = match *atom {
                            Atom::Eq(x, c) => (x, mask_of(x, &|v| v == c)),
                            Atom::Ne(x, c) => (x, mask_of(x, &|v| v != c)),
                            Atom::Le(x, c) => (x, mask_of(x, &|v| v <= c)),
                            Atom::Gt(x, c) => (x, mask_of(x, &|v| v > c)),
                            Atom::EqVar(x, y) => {
                                eqs.push((x, y));
                                continue;
                            }
                        };
                        match unary.iter_mut().find(|(v, _)| *v == x) {
                            Some((_, old)) => old.iter_mut().zip(&m).for_each(|(a, b)| *a &= b),
                            None => unary.push((x, m)),
                        }
                    }
                    cubes.push(CCube { unary, eqs });
                }
                clauses.push(CClause {
                    group: gi,
                    cubes,
                    vars: clause.vars(),
                });
            }
        }
        let mut watch = vec![Vec::new(); sys.vars.len()];
        for (ci, c) in clauses.iter().enumerate() {
            for &v in &c.vars {
                watch[v].push(ci);
            }
        }
        Engine {
            sys,
            gw: words_for(groups.len()),
            groups,
            clauses,
            watch,
            offset,
            width,
            nodes: 0,
            budget,
        }
    }

    fn dom<'s>(&self, st: &'s SearchState, x: VarId) -> &'s [u64] {
        &st.dom[self.offset[x]..self.offset[x] + self.width[x]]
    }

    fn reason<'s>(&self, st: &'s SearchState, x: VarId) -> &'s [u64] {
        &st.reason[x * self.gw..(x + 1) * self.gw]
    }

    fn run(mut self) -> Outcome {
        let mut dom = vec![0u64; self.offset.last().map_or(0, |o| o + self.width[self.width.len() - 1])];
        for (x, v) in self.sys.vars.iter().enumerate() {
            for i in 0..v.universe.len() {
                dom[self.offset[x] + i / 64] |= 1 << (i % 64);
            }
        }
        let st = SearchState {
            dom,
            reason: vec![0u64; self.gw * self.sys.vars.len()],
        };
        let all: Vec<usize> = (0..self.clauses.len()).collect();
        match self.search(st, all) {
            Res::Sat(idx) => Outcome::Sat(Assignment {
                values: idx
                    .iter()
                    .enumerate()
                    .map(|(x, &i)| self.sys.vars[x].universe[i])
                    .collect(),
            }),
            Res::Fail(core) => Outcome::Unsat(
                Bits(&core).ones().into_iter().map(|i| self.groups[i]).collect(),
            ),
            Res::Unknown => Outcome::Unknown,
        }
    }

    fn search(&mut self, mut st: SearchState, queue: Vec<usize>) -> Res {
        self.nodes += 1;
        if self.budget.is_some_and(|b| self.nodes > b) {
            return Res::Unknown;
        }
        if let Err(conflict) = self.propagate(&mut st, queue) {
            return Res::Fail(conflict);
        }
        let branch = (0..self.sys.vars.len()).find(|&x| Bits(self.dom(&st, x)).count() > 1);
        let Some(x) = branch else {
            let idx = (0..self.sys.vars.len())
                .map(|x| Bits(self.dom(&st, x)).first().expect("nonempty"))
                .collect();
            return Res::Sat(idx);
        };
        let mut failure = self.reason(&st, x).to_vec();
        for i in Bits(self.dom(&st, x)).ones() {
            let mut child = st.clone();
            let (o, w) = (self.offset[x], self.width[x]);
            child.dom[o..o + w].fill(0);
            child.dom[o + i / 64] = 1 << (i % 64);
            child.reason[x * self.gw..(x + 1) * self.gw].fill(0);
            match self.search(child, self.watch[x].clone()) {
                Res::Fail(f) => failure.iter_mut().zip(&f).for_each(|(a, b)| *a |= b),
                other => return other,
            }
        }
        Res::Fail(failure)
    }

    /// Runs clause propagation to a fixpoint. On conflict returns the set of
    /// groups that refutes the current node together with the decisions
    /// above it.
    fn propagate(&self, st: &mut SearchState, mut queue: Vec<usize>) -> Result<(), Vec<u64>> {
        let mut queued = vec![false; self.clauses.len()];
        for &c in &queue {
            queued[c] = true;
        }
        let mut scratch: Vec<u64> = Vec::new();
        while let Some(ci) = queue.pop() {
            queued[ci] = false;
            let clause = &self.clauses[ci];
            let mut possible: Vec<&CCube> = Vec::new();
            let mut certain = false;
            for cube in &clause.cubes {
                match self.cube_status(st, cube) {
                    CubeStatus::False => {}
                    CubeStatus::True => {
                        certain = true;
                        break;
                    }
                    CubeStatus::Open => possible.push(cube),
                }
            }
            if certain {
                continue;
            }
            if possible.is_empty() {
                return Err(self.clause_reason(st, clause));
            }
            for &x in &clause.vars {
                let w = self.width[x];
                let mut union = vec![0u64; w];
                let mut covered = true;
                for cube in &possible {
                    if !self.cube_mask(st, cube, x, &mut scratch) {
                        covered = false;
                        break;
                    }
                    union.iter_mut().zip(&scratch).for_each(|(u, s)| *u |= s);
                }
                if !covered {
                    continue;
                }
                let o = self.offset[x];
                let cur = &st.dom[o..o + w];
                let narrowed: Vec<u64> = cur.iter().zip(&union).map(|(c, u)| c & u).collect();
                if narrowed == cur {
                    continue;
                }
                let why = self.clause_reason(st, clause);
                if narrowed.iter().all(|&w| w == 0) {
                    return Err(why);
                }
                st.dom[o..o + w].copy_from_slice(&narrowed);
                st.reason[x * self.gw..(x + 1) * self.gw]
                    .iter_mut()
                    .zip(&why)
                    .for_each(|(r, y)| *r |= y);
                for &c in &self.watch[x] {
                    if !queued[c] {
                        queued[c] = true;
                        queue.push(c);
                    }
                }
            }
        }
        Ok(())
    }

    fn clause_reason(&self, st: &SearchState, clause: &CClause) -> Vec<u64> {
        let mut r = vec![0u64; self.gw];
        r[clause.group / 64] |= 1 << (clause.group % 64);
        for &y in &clause.vars {
            r.iter_mut()
                .zip(self.reason(st, y))
                .for_each(|(a, b)| *a |= b);
        }
        r
    }

    fn cube_status(&self, st: &SearchState, cube: &CCube) -> CubeStatus {
        let mut certain = true;
        for (x, m) in &cube.unary {
            let d = self.dom(st, *x);
            let mut meets = false;
            for (a, b) in d.iter().zip(m) {
                if a & b != 0 {
                    meets = true;
                }
                if a & !b != 0 {
                    certain = false;
                }
            }
            if !meets {
                return CubeStatus::False;
            }
        }
        for &(x, y) in &cube.eqs {
            let (dx, dy) = (self.dom(st, x), self.dom(st, y));
            if dx.iter().zip(dy).all(|(a, b)| a & b == 0) {
                return CubeStatus::False;
            }
            if !(Bits(dx).count() == 1 && dx == dy) {
                certain = false;
            }
        }
        if certain {
            CubeStatus::True
        } else {
            CubeStatus::Open
        }
    }

    /// Values of `x` allowed by `cube`, written to `out`. Returns false if
    /// the cube does not constrain `x`.
    fn cube_mask(&self, st: &SearchState, cube: &CCube, x: VarId, out: &mut Vec<u64>) -> bool {
        out.clear();
        out.extend_from_slice(self.dom(st, x));
        let mut mentioned = false;
        for (v, m) in &cube.unary {
            if *v == x {
                mentioned = true;
                out.iter_mut().zip(m).for_each(|(a, b)| *a &= b);
            }
        }
        for &(a, b) in &cube.eqs {
            let other = if a == x {
                b
            } else if b == x {
                a
            } else {
                continue;
            };
            mentioned = true;
            out.iter_mut()
                .zip(self.dom(st, other))
                .for_each(|(p, q)| *p &= q);
        }
        mentioned
    }
}

enum CubeStatus {
    False,
    True,
    Open,
}

/// Exhaustive enumeration of all assignments; for tests on small systems.
pub fn enumerate_solutions(sys: &ConstraintSystem, active: &[GroupId]) -> Vec<Assignment> {
    let mut out = Vec::new();
    let n = sys.vars.len();
    let mut idx = vec![0usize; n];
    loop {
        let a = Assignment {
            values: (0..n).map(|x| sys.vars[x].universe[idx[x]]).collect(),
        };
        if active.iter().all(|&g| sys.group_holds(g, &a)) {
            out.push(a);
        }
        let mut p = n;
        loop {
            if p == 0 {
                return out;
            }
            p -= 1;
            idx[p] += 1;
            if idx[p] < sys.vars[p].universe.len() {
                break;
            }
            idx[p] = 0;
        }
    }
}
