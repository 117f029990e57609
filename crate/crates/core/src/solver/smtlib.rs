//! SMT-LIB v2 export and an external-process backend.

use std::fmt::Write as _;
use std::io::Write as _;
use std::process::{Command, Stdio};

use super::{Assignment, Atom, Clause, ConstraintSystem, GroupId, SolveOutcome, SolverError};

fn quote(name: &str) -> String {
    format!("|{name}|")
}

fn int(c: i64) -> String {
    if c < 0 {
        format!("(- {})", c.unsigned_abs())
    } else {
        c.to_string()
    }
}

impl ConstraintSystem {
    fn atom_smt(&self, a: &Atom) -> String {
        let v = |x: usize| quote(&self.vars[x].name);
        match *a {
            Atom::Eq(x, c) => format!("(= {} {})", v(x), int(c)),
            Atom::Ne(x, c) => format!("(not (= {} {}))", v(x), int(c)),
            Atom::Le(x, c) => format!("(<= {} {})", v(x), int(c)),
            Atom::Gt(x, c) => format!("(> {} {})", v(x), int(c)),
            Atom::EqVar(x, y) => format!("(= {} {})", v(x), v(y)),
        }
    }

    fn clause_smt(&self, c: &Clause) -> String {
        let cubes: Vec<String> = c
            .cubes
            .iter()
            .map(|cube| match cube.len() {
                0 => "true".to_string(),
                1 => self.atom_smt(&cube[0]),
                _ => format!(
                    "(and {})",
                    cube.iter().map(|a| self.atom_smt(a)).collect::<Vec<_>>().join(" ")
                ),
            })
            .collect();
        match cubes.len() {
            0 => "false".to_string(),
            1 => cubes.into_iter().next().unwrap(),
            _ => format!("(or {})", cubes.join(" ")),
        }
    }

    /// SMT-LIB v2 script (QF_LIA) with one named assertion per active
    /// group, followed by `check-sat`, `get-model` and `get-unsat-core`.
    pub fn to_smtlib(&self, active: &[GroupId]) -> String {
        let mut out = String::new();
        out.push_str("(set-option :produce-models true)\n");
        out.push_str("(set-option :produce-unsat-cores true)\n");
        out.push_str("(set-logic QF_LIA)\n");
        for v in &self.vars {
            let _ = writeln!(out, "(declare-const {} Int)", quote(&v.name));
            let members: Vec<String> = v
                .universe
                .iter()
                .map(|&c| format!("(= {} {})", quote(&v.name), int(c)))
                .collect();
            if members.len() == 1 {
                let _ = writeln!(out, "(assert {})", members[0]);
            } else {
                let _ = writeln!(out, "(assert (or {}))", members.join(" "));
            }
        }
        for &g in active {
            let group = &self.groups[g];
            let body = match group.clauses.len() {
                0 => "true".to_string(),
                1 => self.clause_smt(&group.clauses[0]),
                _ => format!(
                    "(and {})",
                    group
                        .clauses
                        .iter()
                        .map(|c| self.clause_smt(c))
                        .collect::<Vec<_>>()
                        .join(" ")
                ),
            };
            let _ = writeln!(out, "(assert (! {} :named {}))", body, quote(&group.name));
        }
        out.push_str("(check-sat)\n(get-model)\n(get-unsat-core)\n");
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '(' | ')' => {
                out.push(c.to_string());
                chars.next();
            }
            '|' => {
                chars.next();
                let mut s = String::new();
                for c in chars.by_ref() {
                    if c == '|' {
                        break;
                    }
                    s.push(c);
                }
                out.push(s);
            }
            '"' => {
                chars.next();
                let mut s = String::from("\"");
                for c in chars.by_ref() {
                    if c == '"' {
                        break;
                    }
                    s.push(c);
                }
                out.push(s);
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            _ => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' {
                        break;
                    }
                    s.push(c);
                    chars.next();
                }
                out.push(s);
            }
        }
    }
    out
}

fn parse_sexps(tokens: &[String]) -> Result<Vec<Sexp>, String> {
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    for t in tokens {
        match t.as_str() {
            "(" => stack.push(Vec::new()),
            ")" => {
                let list = stack.pop().ok_or("unbalanced `)`")?;
                stack
                    .last_mut()
                    .ok_or("unbalanced `)`")?
                    .push(Sexp::List(list));
            }
            _ => stack.last_mut().expect("nonempty").push(Sexp::Atom(t.clone())),
        }
    }
    if stack.len() != 1 {
        return Err("unbalanced `(`".into());
    }
    Ok(stack.pop().unwrap())
}

fn int_value(s: &Sexp) -> Option<i64> {
    match s {
        Sexp::Atom(a) => a.parse().ok(),
        Sexp::List(items) => match items.as_slice() {
            [Sexp::Atom(minus), inner] if minus == "-" => int_value(inner).map(|v| -v),
            _ => None,
        },
    }
}

/// A parsed solver reply.
#[derive(Debug, Clone, PartialEq)]
pub enum SmtResponse {
    Sat(Vec<(String, i64)>),
    Unsat(Vec<String>),
    Unknown,
}

/// Parses the output of the script produced by
/// [`ConstraintSystem::to_smtlib`]. `(error ...)` replies to the query that
/// does not apply are ignored.
pub fn parse_response(text: &str) -> Result<SmtResponse, SolverError> {
    let sexps = parse_sexps(&tokenize(text)).map_err(SolverError::External)?;
    let mut items = sexps.into_iter().filter(|s| match s {
        Sexp::List(l) => !matches!(l.first(), Some(Sexp::Atom(a)) if a == "error"),
        Sexp::Atom(_) => true,
    });
    let status = match items.next() {
        Some(Sexp::Atom(a)) => a,
        other => return Err(SolverError::External(format!("expected a status, got {other:?}"))),
    };
    match status.as_str() {
        "sat" => {
            let mut values = Vec::new();
            if let Some(Sexp::List(model)) = items.next() {
                let defs = match model.first() {
                    Some(Sexp::Atom(a)) if a == "model" => &model[1..],
                    _ => &model[..],
                };
                for d in defs {
                    if let Sexp::List(parts) = d {
                        if let [Sexp::Atom(kw), Sexp::Atom(name), _, _, value] = parts.as_slice() {
                            if kw == "define-fun" {
                                let v = int_value(value).ok_or_else(|| {
                                    SolverError::External(format!("non-integer value for {name}"))
                                })?;
                                values.push((name.clone(), v));
                            }
                        }
                    }
                }
            }
            Ok(SmtResponse::Sat(values))
        }
        "unsat" => {
            let mut core = Vec::new();
            for item in items {
                if let Sexp::List(names) = item {
                    for n in names {
                        if let Sexp::Atom(a) = n {
                            core.push(a);
                        }
                    }
                }
            }
            Ok(SmtResponse::Unsat(core))
        }
        "unknown" => Ok(SmtResponse::Unknown),
        other => Err(SolverError::External(format!("unexpected status `{other}`"))),
    }
}

/// Runs an SMT solver process that reads a script on standard input, such
/// as `z3 -in`.
#[derive(Debug, Clone)]
pub struct ExternalSolver {
    pub program: String,
    pub args: Vec<String>,
}

impl ExternalSolver {
    pub fn z3() -> ExternalSolver {
        ExternalSolver {
            program: "z3".into(),
            args: vec!["-in".into()],
        }
    }

    /// Whether the program can be started.
    pub fn available(&self) -> bool {
        Command::new(&self.program)
            .arg("-version")
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .status()
            .is_ok()
    }

    pub fn solve(&self, cs: &ConstraintSystem, active: &[&str]) -> Result<SolveOutcome, SolverError> {
        let ids: Vec<GroupId> = active
            .iter()
            .map(|n| cs.group(n).ok_or_else(|| SolverError::UnknownGroup(n.to_string())))
            .collect::<Result<_, _>>()?;
        let script = cs.to_smtlib(&ids);
        let external = |e: std::io::Error| SolverError::External(format!("{}: {e}", self.program));
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(external)?;
        child
            .stdin
            .take()
            .expect("piped")
            .write_all(script.as_bytes())
            .map_err(external)?;
        let output = child.wait_with_output().map_err(external)?;
        let text = String::from_utf8_lossy(&output.stdout);
        Ok(match parse_response(&text)? {
            SmtResponse::Sat(values) => {
                let mut out: Vec<i64> = cs.vars().iter().map(|v| v.universe[0]).collect();
                for (name, v) in values {
                    if let Some(x) = cs.var(&name) {
                        out[x] = v;
                    }
                }
                SolveOutcome::Sat(Assignment { values: out })
            }
            SmtResponse::Unsat(core) => SolveOutcome::Unsat(core),
            SmtResponse::Unknown => SolveOutcome::Unknown,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn system() -> ConstraintSystem {
        let mut cs = ConstraintSystem::new();
        let x = cs.add_var("d0", [0, 1]).unwrap();
        let b = cs.add_var("b0", [-2, 3]).unwrap();
        cs.add_group("dom:d0", vec![Clause::member(x, [1])]).unwrap();
        cs.add_group(
            "act:3:5",
            vec![Clause::new(vec![vec![Atom::Eq(x, 0), Atom::Le(b, -2)], vec![Atom::Gt(b, 0)]])],
        )
        .unwrap();
        cs
    }

    #[test]
    fn script_shape() {
        let cs = system();
        let s = cs.to_smtlib(&cs.all_groups());
        assert!(s.contains("(declare-const |d0| Int)"));
        assert!(s.contains(":named |act:3:5|"));
        assert!(s.contains("(<= |b0| (- 2))"));
        assert!(s.contains("(or (and (= |d0| 0) (<= |b0| (- 2))) (> |b0| 0))"));
        assert!(s.ends_with("(get-unsat-core)\n"));
    }

    #[test]
    fn parses_sat_reply() {
        let reply = "sat\n(\n  (define-fun |b0| () Int\n    (- 2))\n  (define-fun d0 () Int\n    1)\n)\n(error \"line 9 column 16: unsat core is not available\")\n";
        assert_eq!(
            parse_response(reply).unwrap(),
            SmtResponse::Sat(vec![("b0".into(), -2), ("d0".into(), 1)])
        );
    }

    #[test]
    fn parses_unsat_reply() {
        let reply = "unsat\n(error \"model is not available\")\n(|dom:d0| |act:3:5|)\n";
        assert_eq!(
            parse_response(reply).unwrap(),
            SmtResponse::Unsat(vec!["dom:d0".into(), "act:3:5".into()])
        );
        assert!(parse_response("(((").is_err());
        assert!(parse_response("maybe").is_err());
    }

    #[test]
    fn live_z3_agrees_when_installed() {
        let z3 = ExternalSolver::z3();
        if !z3.available() {
            return;
        }
        let cs = system();
        let names = ["dom:d0", "act:3:5"];
        let ours = cs.solve(&names).unwrap();
        let theirs = z3.solve(&cs, &names).unwrap();
        assert_eq!(
            matches!(ours, SolveOutcome::Sat(_)),
            matches!(theirs, SolveOutcome::Sat(_))
        );
    }
}
