//! CNF formulas over numbered Boolean variables, with DIMACS I/O.
//!
//! Feature names travel in comment lines of the form `c <index> <name>`.
//! Clauses are normalized at parse time: duplicate literals are removed and
//! tautologies (`l ∨ ¬l`) are dropped. An empty clause marks the formula as
//! trivially unsatisfiable.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::Not;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A Boolean variable, numbered from 1 as in DIMACS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Var(u32);

impl Var {
    /// Panics if `index` is zero.
    pub fn new(index: u32) -> Var {
        assert!(index >= 1, "variable indices start at 1");
        Var(index)
    }

    pub fn index(self) -> u32 {
        self.0
    }

    /// Zero-based position, for dense per-variable tables.
    pub fn slot(self) -> usize {
        (self.0 - 1) as usize
    }

    pub fn from_slot(slot: usize) -> Var {
        Var(slot as u32 + 1)
    }

    pub fn positive(self) -> Literal {
        Literal::new(self, true)
    }

    pub fn negative(self) -> Literal {
        Literal::new(self, false)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A variable or its negation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    var: Var,
    positive: bool,
}

impl Literal {
    pub fn new(var: Var, positive: bool) -> Literal {
        Literal { var, positive }
    }

    /// Reads a signed DIMACS literal. Returns `None` for 0.
    pub fn from_dimacs(value: i64) -> Option<Literal> {
        if value == 0 || value.unsigned_abs() > u32::MAX as u64 {
            return None;
        }
        Some(Literal::new(Var(value.unsigned_abs() as u32), value > 0))
    }

    pub fn to_dimacs(self) -> i64 {
        let v = self.var.0 as i64;
        if self.positive {
            v
        } else {
            -v
        }
    }

    pub fn var(self) -> Var {
        self.var
    }

    pub fn is_positive(self) -> bool {
        self.positive
    }

    /// Truth value of this literal under a total assignment indexed by slot.
    pub fn eval(self, assignment: &[bool]) -> bool {
        assignment[self.var.slot()] == self.positive
    }
}

impl Not for Literal {
    type Output = Literal;

    fn not(self) -> Literal {
        Literal::new(self.var, !self.positive)
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

/// A non-empty, non-tautological disjunction without repeated literals.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Clause(Vec<Literal>);

impl Clause {
    /// Normalizes `literals`: keeps first occurrences, returns `None` for a
    /// tautology or an empty input.
    pub fn new<I: IntoIterator<Item = Literal>>(literals: I) -> Option<Clause> {
        let mut lits: Vec<Literal> = Vec::new();
        for lit in literals {
            if lits.contains(&!lit) {
                return None;
            }
            if !lits.contains(&lit) {
                lits.push(lit);
            }
        }
        if lits.is_empty() {
            None
        } else {
            Some(Clause(lits))
        }
    }

    pub fn literals(&self) -> &[Literal] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_var(&self) -> Var {
        self.0
            .iter()
            .map(|l| l.var())
            .max()
            .expect("clauses are non-empty")
    }

    pub fn eval(&self, assignment: &[bool]) -> bool {
        self.0.iter().any(|l| l.eval(assignment))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormulaError {
    #[error("line {line}: malformed problem line: {reason}")]
    ProblemLine { line: usize, reason: String },
    #[error("line {line}: missing problem line before clauses")]
    MissingProblemLine { line: usize },
    #[error("line {line}: invalid literal `{token}`")]
    InvalidLiteral { line: usize, token: String },
    #[error("line {line}: literal {literal} exceeds declared variable count {num_vars}")]
    LiteralOutOfRange {
        line: usize,
        literal: i64,
        num_vars: u32,
    },
    #[error("line {line}: clause is not terminated by 0")]
    UnterminatedClause { line: usize },
    #[error("line {line}: duplicate name comment for variable {index}")]
    DuplicateName { line: usize, index: u32 },
    #[error("line {line}: name `{name}` already used by variable {other}")]
    NameReused {
        line: usize,
        name: String,
        other: u32,
    },
    #[error("line {line}: name comment for variable {index} exceeds variable count {num_vars}")]
    NameOutOfRange {
        line: usize,
        index: u32,
        num_vars: u32,
    },
    #[error("line {line}: problem line declares {declared} clauses but {found} were read")]
    ClauseCount {
        line: usize,
        declared: usize,
        found: usize,
    },
    #[error("variable {var} out of range for a formula with {num_vars} variables")]
    VarOutOfRange { var: u32, num_vars: u32 },
    #[error("name `{name}` given to both variables {first} and {second}")]
    DuplicateNameInMap {
        name: String,
        first: u32,
        second: u32,
    },
}

/// An immutable CNF formula with optional feature names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnfFormula {
    num_vars: u32,
    clauses: Vec<Clause>,
    names: BTreeMap<Var, String>,
    has_empty_clause: bool,
}

impl CnfFormula {
    /// Builds a formula, checking variable ranges and name injectivity.
    pub fn new(
        num_vars: u32,
        clauses: Vec<Clause>,
        names: BTreeMap<Var, String>,
    ) -> Result<CnfFormula, FormulaError> {
        for clause in &clauses {
            let v = clause.max_var();
            if v.index() > num_vars {
                return Err(FormulaError::VarOutOfRange {
                    var: v.index(),
                    num_vars,
                });
            }
        }
        let mut seen: BTreeMap<&str, Var> = BTreeMap::new();
        for (&var, name) in &names {
            if var.index() > num_vars {
                return Err(FormulaError::VarOutOfRange {
                    var: var.index(),
                    num_vars,
                });
            }
            if let Some(first) = seen.insert(name.as_str(), var) {
                return Err(FormulaError::DuplicateNameInMap {
                    name: name.clone(),
                    first: first.index(),
                    second: var.index(),
                });
            }
        }
        Ok(CnfFormula {
            num_vars,
            clauses,
            names,
            has_empty_clause: false,
        })
    }

    /// Marks the formula as containing an empty clause.
    pub fn with_empty_clause(mut self) -> CnfFormula {
        self.has_empty_clause = true;
        self
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn names(&self) -> &BTreeMap<Var, String> {
        &self.names
    }

    /// True when an empty clause was read; such a formula has no models.
    pub fn has_empty_clause(&self) -> bool {
        self.has_empty_clause
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> {
        (1..=self.num_vars).map(Var)
    }

    pub fn name(&self, var: Var) -> Option<&str> {
        self.names.get(&var).map(String::as_str)
    }

    /// Name for reports; unnamed variables are shown as `v<index>`.
    pub fn display_name(&self, var: Var) -> Cow<'_, str> {
        match self.names.get(&var) {
            Some(name) => Cow::Borrowed(name),
            None => Cow::Owned(format!("v{}", var.index())),
        }
    }

    pub fn var_by_name(&self, name: &str) -> Option<Var> {
        self.names
            .iter()
            .find_map(|(&v, n)| (n == name).then_some(v))
    }

    /// Evaluates the formula under a total assignment (indexed by slot).
    pub fn eval(&self, assignment: &[bool]) -> bool {
        !self.has_empty_clause && self.clauses.iter().all(|c| c.eval(assignment))
    }
}

/// Parses DIMACS CNF text.
pub fn parse_dimacs(text: &str) -> Result<CnfFormula, FormulaError> {
    let mut header: Option<(u32, usize, usize)> = None;
    let mut names: BTreeMap<Var, (String, usize)> = BTreeMap::new();
    let mut clauses = Vec::new();
    let mut clauses_read = 0usize;
    let mut has_empty = false;
    let mut pending: Vec<Literal> = Vec::new();
    let mut pending_start = 0usize;
    let mut last_line = 0usize;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() || line == "%" {
            continue;
        }
        if line.starts_with('c') && (line.len() == 1 || line[1..].starts_with(char::is_whitespace))
        {
            if let Some((index, name)) = name_comment(line) {
                if index == 0 {
                    continue;
                }
                let var = Var(index);
                if names.contains_key(&var) {
                    return Err(FormulaError::DuplicateName {
                        line: line_no,
                        index,
                    });
                }
                if let Some((&other, _)) = names.iter().find(|(_, (n, _))| n == name) {
                    return Err(FormulaError::NameReused {
                        line: line_no,
                        name: name.to_string(),
                        other: other.index(),
                    });
                }
                names.insert(var, (name.to_string(), line_no));
            }
            continue;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(FormulaError::ProblemLine {
                    line: line_no,
                    reason: "duplicate problem line".into(),
                });
            }
            header = Some(parse_problem_line(line, line_no)?);
            continue;
        }
        let Some((num_vars, _, _)) = header else {
            return Err(FormulaError::MissingProblemLine { line: line_no });
        };
        for token in line.split_whitespace() {
            let value: i64 = token.parse().map_err(|_| FormulaError::InvalidLiteral {
                line: line_no,
                token: token.to_string(),
            })?;
            if value == 0 {
                clauses_read += 1;
                if pending.is_empty() {
                    has_empty = true;
                } else if let Some(clause) = Clause::new(pending.drain(..)) {
                    clauses.push(clause);
                }
                continue;
            }
            if value.unsigned_abs() > num_vars as u64 {
                return Err(FormulaError::LiteralOutOfRange {
                    line: line_no,
                    literal: value,
                    num_vars,
                });
            }
            if pending.is_empty() {
                pending_start = line_no;
            }
            pending.push(Literal::from_dimacs(value).expect("non-zero literal"));
        }
    }

    let Some((num_vars, declared, header_line)) = header else {
        return Err(FormulaError::ProblemLine {
            line: last_line.max(1),
            reason: "no problem line found".into(),
        });
    };
    if !pending.is_empty() {
        return Err(FormulaError::UnterminatedClause {
            line: pending_start,
        });
    }
    if clauses_read != declared {
        return Err(FormulaError::ClauseCount {
            line: header_line,
            declared,
            found: clauses_read,
        });
    }
    if let Some((&var, &(_, line))) = names.iter().find(|(v, _)| v.index() > num_vars) {
        return Err(FormulaError::NameOutOfRange {
            line,
            index: var.index(),
            num_vars,
        });
    }
    let names = names.into_iter().map(|(v, (n, _))| (v, n)).collect();
    let formula = CnfFormula {
        num_vars,
        clauses,
        names,
        has_empty_clause: has_empty,
    };
    Ok(formula)
}

fn name_comment(line: &str) -> Option<(u32, &str)> {
    let mut tokens = line.split_whitespace();
    tokens.next()?;
    let index: u32 = tokens.next()?.parse().ok()?;
    let name = tokens.next()?;
    if tokens.next().is_some() {
        return None;
    }
    Some((index, name))
}

fn parse_problem_line(line: &str, line_no: usize) -> Result<(u32, usize, usize), FormulaError> {
    let bad = |reason: &str| FormulaError::ProblemLine {
        line: line_no,
        reason: reason.to_string(),
    };
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.len() != 4 || tokens[0] != "p" {
        return Err(bad("expected `p cnf <vars> <clauses>`"));
    }
    if tokens[1] != "cnf" {
        return Err(bad("only the `cnf` format is supported"));
    }
    let num_vars = tokens[2]
        .parse::<u32>()
        .map_err(|_| bad("variable count is not a non-negative integer"))?;
    let num_clauses = tokens[3]
        .parse::<usize>()
        .map_err(|_| bad("clause count is not a non-negative integer"))?;
    Ok((num_vars, num_clauses, line_no))
}

/// Serializes a formula as DIMACS: name comments, problem line, clauses.
pub fn emit_dimacs(formula: &CnfFormula) -> String {
    let mut out = String::new();
    for (var, name) in &formula.names {
        out.push_str(&format!("c {} {}\n", var.index(), name));
    }
    let count = formula.clauses.len() + usize::from(formula.has_empty_clause);
    out.push_str(&format!("p cnf {} {}\n", formula.num_vars, count));
    for clause in &formula.clauses {
        for lit in clause.literals() {
            out.push_str(&lit.to_dimacs().to_string());
            out.push(' ');
        }
        out.push_str("0\n");
    }
    if formula.has_empty_clause {
        out.push_str("0\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lit(v: i64) -> Literal {
        Literal::from_dimacs(v).unwrap()
    }

    #[test]
    fn reads_single_clause() {
        let f = parse_dimacs("p cnf 2 1\n1 -2 0").unwrap();
        assert_eq!(f.num_vars(), 2);
        assert_eq!(f.clauses().len(), 1);
        assert_eq!(f.clauses()[0].literals(), &[lit(1), lit(-2)]);
    }

    #[test]
    fn reads_name_comment() {
        let f = parse_dimacs("c 1 PCI\np cnf 1 1\n1 0").unwrap();
        assert_eq!(f.name(Var::new(1)), Some("PCI"));
        assert_eq!(f.clauses()[0].literals(), &[lit(1)]);
    }

    #[test]
    fn drops_tautology() {
        let f = parse_dimacs("p cnf 1 1\n1 -1 0").unwrap();
        assert_eq!(f.num_vars(), 1);
        assert!(f.clauses().is_empty());
    }

    #[test]
    fn dedups_literals_and_spans_lines() {
        let f = parse_dimacs("p cnf 3 1\n1 2\n 1 3 0\n").unwrap();
        assert_eq!(f.clauses()[0].literals(), &[lit(1), lit(2), lit(3)]);
    }

    #[test]
    fn free_comments_are_ignored() {
        let f = parse_dimacs("c generated by hand\n\np cnf 2 1\nc between\n1 2 0\n").unwrap();
        assert!(f.names().is_empty());
        assert_eq!(f.clauses().len(), 1);
    }

    #[test]
    fn flags_empty_clause() {
        let f = parse_dimacs("p cnf 2 2\n1 2 0\n0\n").unwrap();
        assert!(f.has_empty_clause());
        assert_eq!(f.clauses().len(), 1);
        assert!(!f.eval(&[true, true]));
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(
            parse_dimacs("p cnf x 1\n1 0"),
            Err(FormulaError::ProblemLine {
                line: 1,
                reason: "variable count is not a non-negative integer".into()
            })
        );
        assert_eq!(
            parse_dimacs("c\np cnf 2 1\n1 3 0"),
            Err(FormulaError::LiteralOutOfRange {
                line: 3,
                literal: 3,
                num_vars: 2
            })
        );
        assert_eq!(
            parse_dimacs("p cnf 2 1\n1 2\n"),
            Err(FormulaError::UnterminatedClause { line: 2 })
        );
        assert_eq!(
            parse_dimacs("c 1 A\nc 1 B\np cnf 2 0\n"),
            Err(FormulaError::DuplicateName { line: 2, index: 1 })
        );
        assert_eq!(
            parse_dimacs("p cnf 2 2\n1 2 0\n"),
            Err(FormulaError::ClauseCount {
                line: 1,
                declared: 2,
                found: 1
            })
        );
        assert!(matches!(
            parse_dimacs("1 2 0\n"),
            Err(FormulaError::MissingProblemLine { line: 1 })
        ));
        assert!(matches!(
            parse_dimacs("p cnf 2 1\n1 z 0\n"),
            Err(FormulaError::InvalidLiteral { line: 2, .. })
        ));
        assert!(matches!(
            parse_dimacs("c 3 X\np cnf 2 0\n"),
            Err(FormulaError::NameOutOfRange { line: 1, .. })
        ));
    }

    #[test]
    fn emits_problem_line_and_clauses() {
        let f = parse_dimacs("p cnf 2 1\n1 -2 0").unwrap();
        let text = emit_dimacs(&f);
        assert!(text.contains("p cnf 2 1"));
        assert!(text.contains("1 -2 0"));

        let empty = CnfFormula::new(3, vec![], BTreeMap::new()).unwrap();
        assert_eq!(emit_dimacs(&empty), "p cnf 3 0\n");
    }

    #[test]
    fn display_names_fall_back_to_index() {
        let f = parse_dimacs("c 2 B\np cnf 2 0\n").unwrap();
        assert_eq!(f.display_name(Var::new(1)), "v1");
        assert_eq!(f.display_name(Var::new(2)), "B");
        assert_eq!(f.var_by_name("B"), Some(Var::new(2)));
    }

    #[test]
    fn negation_is_an_involution() {
        let l = lit(-7);
        assert_eq!(!!l, l);
        assert_eq!((!l).to_dimacs(), 7);
    }

    #[test]
    fn constructor_rejects_bad_names() {
        let mut names = BTreeMap::new();
        names.insert(Var::new(1), "A".to_string());
        names.insert(Var::new(2), "A".to_string());
        assert!(CnfFormula::new(2, vec![], names).is_err());
    }
}
