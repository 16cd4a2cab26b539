//! A small line-oriented feature-model dialect and its CNF encoding.
//!
//! ```text
//! # comments start with '#'
//! feature Root
//!   mandatory Engine
//!     alternative { Petrol Electric }
//!   optional Radio
//!     or { Fm Dab }
//! constraint Electric => !Radio
//! ```
//!
//! Children are indented below their parent. Group members are leaves.
//! Constraints use `!`, `&`, `|`, `=>` (right associative, lowest
//! precedence) and parentheses, and may appear anywhere in the file.
//!
//! Variables are numbered in declaration order, which is a preorder walk of
//! the tree.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::formula::{Clause, CnfFormula, Literal, Var};

/// Upper bound on clauses produced from one constraint by distribution.
pub const MAX_CONSTRAINT_CLAUSES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Root,
    Mandatory,
    Optional,
    /// Member of the alternative group with this index.
    Alternative(usize),
    /// Member of the or-group with this index.
    Or(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Feature {
    pub name: String,
    pub parent: Option<usize>,
    pub relation: Relation,
    pub line: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKind {
    Alternative,
    Or,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    pub kind: GroupKind,
    pub parent: usize,
    pub members: Vec<usize>,
    pub line: usize,
}

/// Propositional constraint over feature names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Feature(String),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Implies(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, value: &dyn Fn(&str) -> bool) -> bool {
        match self {
            Expr::Feature(name) => value(name),
            Expr::Not(e) => !e.eval(value),
            Expr::And(a, b) => a.eval(value) && b.eval(value),
            Expr::Or(a, b) => a.eval(value) || b.eval(value),
            Expr::Implies(a, b) => !a.eval(value) || b.eval(value),
        }
    }

    fn names<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Feature(name) => out.push(name),
            Expr::Not(e) => e.names(out),
            Expr::And(a, b) | Expr::Or(a, b) | Expr::Implies(a, b) => {
                a.names(out);
                b.names(out);
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Feature(name) => write!(f, "{name}"),
            Expr::Not(e) => write!(f, "!{e}"),
            Expr::And(a, b) => write!(f, "({a} & {b})"),
            Expr::Or(a, b) => write!(f, "({a} | {b})"),
            Expr::Implies(a, b) => write!(f, "({a} => {b})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub expr: Expr,
    pub text: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureModel {
    /// Features in preorder; index `i` becomes variable `i + 1`.
    pub features: Vec<Feature>,
    pub groups: Vec<Group>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FmError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: duplicate feature `{name}`")]
    DuplicateFeature { line: usize, name: String },
    #[error("line {line}: unknown feature `{name}` in constraint")]
    UnknownFeature { line: usize, name: String },
    #[error("line {line}: group needs at least 2 members, found {found}")]
    GroupTooSmall { line: usize, found: usize },
    #[error("no root feature declared")]
    MissingRoot,
    #[error("line {line}: constraint `{constraint}` expands to more than {limit} clauses")]
    NotClausal {
        line: usize,
        constraint: String,
        limit: usize,
    },
}

impl FeatureModel {
    pub fn root(&self) -> &Feature {
        &self.features[0]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn children(&self, parent: usize) -> impl Iterator<Item = usize> + '_ {
        self.features
            .iter()
            .enumerate()
            .filter(move |(_, f)| f.parent == Some(parent))
            .map(|(i, _)| i)
    }

    /// Checks a selection (indexed like `features`) against the tree and
    /// constraint semantics directly, without going through CNF.
    pub fn is_valid_configuration(&self, selected: &[bool]) -> bool {
        if !selected[0] {
            return false;
        }
        for (i, f) in self.features.iter().enumerate().skip(1) {
            let parent = f.parent.expect("non-root features have a parent");
            if selected[i] && !selected[parent] {
                return false;
            }
            if f.relation == Relation::Mandatory && selected[parent] && !selected[i] {
                return false;
            }
        }
        for g in &self.groups {
            if !selected[g.parent] {
                continue;
            }
            let count = g.members.iter().filter(|&&m| selected[m]).count();
            let ok = match g.kind {
                GroupKind::Alternative => count == 1,
                GroupKind::Or => count >= 1,
            };
            if !ok {
                return false;
            }
        }
        let index: HashMap<&str, usize> = self
            .features
            .iter()
            .enumerate()
            .map(|(i, f)| (f.name.as_str(), i))
            .collect();
        self.constraints
            .iter()
            .all(|c| c.expr.eval(&|name| selected[index[name]]))
    }
}

enum Frame {
    Feature(usize),
    Group,
}

/// Parses the dialect into a validated [`FeatureModel`].
pub fn parse_fm(text: &str) -> Result<FeatureModel, FmError> {
    let mut features: Vec<Feature> = Vec::new();
    let mut groups: Vec<Group> = Vec::new();
    let mut constraints = Vec::new();
    let mut by_name: HashMap<String, usize> = HashMap::new();
    let mut stack: Vec<(usize, Frame)> = Vec::new();

    let mut declare = |features: &mut Vec<Feature>,
                       name: &str,
                       parent: Option<usize>,
                       relation: Relation,
                       line: usize|
     -> Result<usize, FmError> {
        check_name(name, line)?;
        if by_name.contains_key(name) {
            return Err(FmError::DuplicateFeature {
                line,
                name: name.to_string(),
            });
        }
        let idx = features.len();
        by_name.insert(name.to_string(), idx);
        features.push(Feature {
            name: name.to_string(),
            parent,
            relation,
            line,
        });
        Ok(idx)
    };

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        if content.trim().is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start().len();
        let body = content.trim();
        let (keyword, rest) = match body.split_once(char::is_whitespace) {
            Some((k, r)) => (k, r.trim()),
            None => (body, ""),
        };
        let syntax = |message: &str| FmError::Syntax {
            line,
            message: message.to_string(),
        };

        if keyword == "constraint" {
            if rest.is_empty() {
                return Err(syntax("empty constraint"));
            }
            let expr = parse_expr(rest, line)?;
            constraints.push(Constraint {
                expr,
                text: rest.to_string(),
                line,
            });
            continue;
        }
        if keyword == "feature" {
            if !features.is_empty() {
                return Err(syntax("only one root `feature` is allowed"));
            }
            let name = single_name(rest, line)?;
            let idx = declare(&mut features, name, None, Relation::Root, line)?;
            stack.push((indent, Frame::Feature(idx)));
            continue;
        }
        if features.is_empty() {
            return Err(syntax("the root `feature` must come first"));
        }
        while stack.last().is_some_and(|(d, _)| *d >= indent) {
            stack.pop();
        }
        let parent = match stack.last() {
            Some((_, Frame::Feature(p))) => *p,
            Some((_, Frame::Group)) => return Err(syntax("group members cannot have children")),
            None => return Err(syntax("declaration is not indented below the root")),
        };
        match keyword {
            "mandatory" | "optional" => {
                let relation = if keyword == "mandatory" {
                    Relation::Mandatory
                } else {
                    Relation::Optional
                };
                let name = single_name(rest, line)?;
                let idx = declare(&mut features, name, Some(parent), relation, line)?;
                stack.push((indent, Frame::Feature(idx)));
            }
            "alternative" | "or" => {
                let inner = rest
                    .strip_prefix('{')
                    .and_then(|r| r.strip_suffix('}'))
                    .ok_or_else(|| syntax("expected `{ <Name>+ }` after group keyword"))?;
                let names: Vec<&str> = inner.split_whitespace().collect();
                if names.len() < 2 {
                    return Err(FmError::GroupTooSmall {
                        line,
                        found: names.len(),
                    });
                }
                let gid = groups.len();
                let (kind, relation) = if keyword == "alternative" {
                    (GroupKind::Alternative, Relation::Alternative(gid))
                } else {
                    (GroupKind::Or, Relation::Or(gid))
                };
                let mut members = Vec::with_capacity(names.len());
                for name in names {
                    members.push(declare(&mut features, name, Some(parent), relation, line)?);
                }
                groups.push(Group {
                    kind,
                    parent,
                    members,
                    line,
                });
                stack.push((indent, Frame::Group));
            }
            other => return Err(syntax(&format!("unknown keyword `{other}`"))),
        }
    }

    if features.is_empty() {
        return Err(FmError::MissingRoot);
    }
    for c in &constraints {
        let mut names = Vec::new();
        c.expr.names(&mut names);
        if let Some(unknown) = names.into_iter().find(|n| !by_name.contains_key(*n)) {
            return Err(FmError::UnknownFeature {
                line: c.line,
                name: unknown.to_string(),
            });
        }
    }
    Ok(FeatureModel {
        features,
        groups,
        constraints,
    })
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '.' | '$' | '-')
}

fn check_name(name: &str, line: usize) -> Result<(), FmError> {
    if name.is_empty() || !name.chars().all(is_name_char) || name.starts_with('-') {
        return Err(FmError::Syntax {
            line,
            message: format!("invalid feature name `{name}`"),
        });
    }
    Ok(())
}

fn single_name(rest: &str, line: usize) -> Result<&str, FmError> {
    let mut parts = rest.split_whitespace();
    match (parts.next(), parts.next()) {
        (Some(name), None) => Ok(name),
        _ => Err(FmError::Syntax {
            line,
            message: "expected exactly one feature name".into(),
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Name(String),
    Not,
    And,
    Or,
    Implies,
    Open,
    Close,
}

fn tokenize(text: &str, line: usize) -> Result<Vec<Token>, FmError> {
    let mut tokens = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some((pos, c)) = chars.next() {
        match c {
            c if c.is_whitespace() => {}
            '!' => tokens.push(Token::Not),
            '&' => tokens.push(Token::And),
            '|' => tokens.push(Token::Or),
            '(' => tokens.push(Token::Open),
            ')' => tokens.push(Token::Close),
            '=' if chars.peek().map(|&(_, n)| n) == Some('>') => {
                chars.next();
                tokens.push(Token::Implies);
            }
            c if is_name_char(c) => {
                let mut end = pos + c.len_utf8();
                while let Some(&(p, n)) = chars.peek() {
                    if !is_name_char(n) {
                        break;
                    }
                    end = p + n.len_utf8();
                    chars.next();
                }
                tokens.push(Token::Name(text[pos..end].to_string()));
            }
            other => {
                return Err(FmError::Syntax {
                    line,
                    message: format!("unexpected character `{other}` in constraint"),
                })
            }
        }
    }
    Ok(tokens)
}

struct ExprParser {
    tokens: Vec<Token>,
    pos: usize,
    line: usize,
}

impl ExprParser {
    fn error(&self, message: &str) -> FmError {
        FmError::Syntax {
            line: self.line,
            message: message.to_string(),
        }
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, token: &Token) -> bool {
        if self.peek() == Some(token) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn implication(&mut self) -> Result<Expr, FmError> {
        let lhs = self.disjunction()?;
        if self.eat(&Token::Implies) {
            let rhs = self.implication()?;
            return Ok(Expr::Implies(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Expr, FmError> {
        let mut lhs = self.conjunction()?;
        while self.eat(&Token::Or) {
            let rhs = self.conjunction()?;
            lhs = Expr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Expr, FmError> {
        let mut lhs = self.unary()?;
        while self.eat(&Token::And) {
            let rhs = self.unary()?;
            lhs = Expr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, FmError> {
        match self.peek().cloned() {
            Some(Token::Not) => {
                self.pos += 1;
                Ok(Expr::Not(Box::new(self.unary()?)))
            }
            Some(Token::Open) => {
                self.pos += 1;
                let inner = self.implication()?;
                if !self.eat(&Token::Close) {
                    return Err(self.error("missing `)`"));
                }
                Ok(inner)
            }
            Some(Token::Name(name)) => {
                self.pos += 1;
                Ok(Expr::Feature(name))
            }
            Some(_) => Err(self.error("expected a feature name, `!` or `(`")),
            None => Err(self.error("unexpected end of constraint")),
        }
    }
}

fn parse_expr(text: &str, line: usize) -> Result<Expr, FmError> {
    let mut parser = ExprParser {
        tokens: tokenize(text, line)?,
        pos: 0,
        line,
    };
    let expr = parser.implication()?;
    if parser.pos != parser.tokens.len() {
        return Err(parser.error("trailing tokens in constraint"));
    }
    Ok(expr)
}

type RawClause = Vec<(usize, bool)>;

/// Clauses of `expr` (negated when `positive` is false) by NNF and
/// distribution, or `None` once more than `limit` clauses would result.
fn clauses_of(
    expr: &Expr,
    positive: bool,
    index: &HashMap<&str, usize>,
    limit: usize,
) -> Option<Vec<RawClause>> {
    match (expr, positive) {
        (Expr::Feature(name), sign) => Some(vec![vec![(index[name.as_str()], sign)]]),
        (Expr::Not(e), sign) => clauses_of(e, !sign, index, limit),
        (Expr::And(a, b), true) | (Expr::Or(a, b), false) => {
            let mut left = clauses_of(a, positive, index, limit)?;
            left.extend(clauses_of(b, positive, index, limit)?);
            (left.len() <= limit).then_some(left)
        }
        (Expr::Or(a, b), true) => product(
            clauses_of(a, true, index, limit)?,
            clauses_of(b, true, index, limit)?,
            limit,
        ),
        (Expr::And(a, b), false) => product(
            clauses_of(a, false, index, limit)?,
            clauses_of(b, false, index, limit)?,
            limit,
        ),
        (Expr::Implies(a, b), true) => product(
            clauses_of(a, false, index, limit)?,
            clauses_of(b, true, index, limit)?,
            limit,
        ),
        (Expr::Implies(a, b), false) => {
            let mut left = clauses_of(a, true, index, limit)?;
            left.extend(clauses_of(b, false, index, limit)?);
            (left.len() <= limit).then_some(left)
        }
    }
}

fn product(left: Vec<RawClause>, right: Vec<RawClause>, limit: usize) -> Option<Vec<RawClause>> {
    if left.len() * right.len() > limit {
        return None;
    }
    let mut out = Vec::with_capacity(left.len() * right.len());
    for l in &left {
        for r in &right {
            let mut c = l.clone();
            c.extend_from_slice(r);
            out.push(c);
        }
    }
    Some(out)
}

/// Encodes a feature model as CNF, one variable per feature.
pub fn fm_to_cnf(fm: &FeatureModel) -> Result<CnfFormula, FmError> {
    let var = |i: usize| Var::from_slot(i);
    let mut clauses: Vec<Clause> = Vec::new();
    let mut push = |lits: Vec<Literal>| clauses.extend(Clause::new(lits));

    push(vec![var(0).positive()]);
    for p in 0..fm.features.len() {
        for c in fm.children(p) {
            push(vec![var(c).negative(), var(p).positive()]);
            if fm.features[c].relation == Relation::Mandatory {
                push(vec![var(p).negative(), var(c).positive()]);
            }
        }
        for g in fm.groups.iter().filter(|g| g.parent == p) {
            let mut at_least_one = vec![var(p).negative()];
            at_least_one.extend(g.members.iter().map(|&m| var(m).positive()));
            push(at_least_one);
            if g.kind == GroupKind::Alternative {
                for (i, &a) in g.members.iter().enumerate() {
                    for &b in &g.members[i + 1..] {
                        push(vec![var(a).negative(), var(b).negative()]);
                    }
                }
            }
        }
    }

    let index: HashMap<&str, usize> = fm
        .features
        .iter()
        .enumerate()
        .map(|(i, f)| (f.name.as_str(), i))
        .collect();
    for c in &fm.constraints {
        let raw = clauses_of(&c.expr, true, &index, MAX_CONSTRAINT_CLAUSES).ok_or_else(|| {
            FmError::NotClausal {
                line: c.line,
                constraint: c.text.clone(),
                limit: MAX_CONSTRAINT_CLAUSES,
            }
        })?;
        for lits in raw {
            push(
                lits.into_iter()
                    .map(|(i, s)| Literal::new(var(i), s))
                    .collect(),
            );
        }
    }

    let names: BTreeMap<Var, String> = fm
        .features
        .iter()
        .enumerate()
        .map(|(i, f)| (var(i), f.name.clone()))
        .collect();
    Ok(CnfFormula::new(fm.features.len() as u32, clauses, names).expect("encoding stays in range"))
}

/// Parses and encodes in one step.
pub fn parse_fm_to_cnf(text: &str) -> Result<CnfFormula, FmError> {
    fm_to_cnf(&parse_fm(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clause_strings(f: &CnfFormula) -> Vec<String> {
        f.clauses()
            .iter()
            .map(|c| {
                c.literals()
                    .iter()
                    .map(|l| {
                        let n = f.display_name(l.var());
                        if l.is_positive() {
                            n.into_owned()
                        } else {
                            format!("!{n}")
                        }
                    })
                    .collect::<Vec<_>>()
                    .join("|")
            })
            .collect()
    }

    #[test]
    fn optional_child() {
        let fm = parse_fm("feature R\n  optional A\n").unwrap();
        assert_eq!(fm.features.len(), 2);
        assert_eq!(fm.features[1].relation, Relation::Optional);
        assert_eq!(fm.features[1].parent, Some(0));
    }

    #[test]
    fn alternative_group() {
        let fm = parse_fm("feature R\n  alternative { C D }\n").unwrap();
        assert_eq!(fm.groups.len(), 1);
        assert_eq!(fm.groups[0].kind, GroupKind::Alternative);
        let names: Vec<&str> = fm.groups[0]
            .members
            .iter()
            .map(|&m| fm.features[m].name.as_str())
            .collect();
        assert_eq!(names, ["C", "D"]);
    }

    #[test]
    fn implication_constraint() {
        let fm = parse_fm("feature R\n optional A\n optional B\nconstraint A => !B\n").unwrap();
        assert_eq!(
            fm.constraints[0].expr,
            Expr::Implies(
                Box::new(Expr::Feature("A".into())),
                Box::new(Expr::Not(Box::new(Expr::Feature("B".into()))))
            )
        );
    }

    #[test]
    fn operator_precedence() {
        let e = parse_expr("!A & B | C => D => E", 1).unwrap();
        assert_eq!(e.to_string(), "(((!A & B) | C) => (D => E))");
    }

    #[test]
    fn errors_carry_lines() {
        assert_eq!(
            parse_fm("feature R\n  optional A\n  optional A\n"),
            Err(FmError::DuplicateFeature {
                line: 3,
                name: "A".into()
            })
        );
        assert_eq!(
            parse_fm("feature R\n  optional A\n\nconstraint A => Z\n"),
            Err(FmError::UnknownFeature {
                line: 4,
                name: "Z".into()
            })
        );
        assert_eq!(
            parse_fm("feature R\n  or { A }\n"),
            Err(FmError::GroupTooSmall { line: 2, found: 1 })
        );
        assert!(matches!(parse_fm("# nothing\n"), Err(FmError::MissingRoot)));
        assert!(matches!(
            parse_fm("feature R\n  alternative { A B }\n    optional C\n"),
            Err(FmError::Syntax { line: 3, .. })
        ));
        assert!(matches!(
            parse_fm("feature R\nfeature S\n"),
            Err(FmError::Syntax { line: 2, .. })
        ));
        assert!(matches!(
            parse_fm("feature R\n  optional A\nconstraint (A\n"),
            Err(FmError::Syntax { line: 3, .. })
        ));
        assert!(matches!(
            parse_fm("feature R\n  sometimes A\n"),
            Err(FmError::Syntax { line: 2, .. })
        ));
    }

    #[test]
    fn alternative_under_root_encoding() {
        let f = parse_fm_to_cnf("feature R\n  alternative { C D }\n").unwrap();
        assert_eq!(clause_strings(&f), ["R", "!C|R", "!D|R", "!R|C|D", "!C|!D"]);
    }

    #[test]
    fn mandatory_child_encoding() {
        let f = parse_fm_to_cnf("feature R\n  mandatory M\n").unwrap();
        assert_eq!(clause_strings(&f), ["R", "!M|R", "!R|M"]);
    }

    #[test]
    fn or_group_has_no_exclusions() {
        let f = parse_fm_to_cnf("feature R\n  or { A B C }\n").unwrap();
        assert_eq!(
            clause_strings(&f),
            ["R", "!A|R", "!B|R", "!C|R", "!R|A|B|C"]
        );
    }

    #[test]
    fn constraints_split_and_expand() {
        let f = parse_fm_to_cnf(
            "feature R\n optional A\n optional B\n optional C\nconstraint A => B & !C\nconstraint A & B => C\n",
        )
        .unwrap();
        let cs = clause_strings(&f);
        assert_eq!(&cs[4..], ["!A|B", "!A|!C", "!A|!B|C"]);
    }

    #[test]
    fn oversized_constraint_is_rejected() {
        let mut text = String::from("feature R\n");
        let names: Vec<String> = (0..14).map(|i| format!("F{i}")).collect();
        for n in &names {
            text.push_str(&format!("  optional {n}\n"));
        }
        let disjuncts: Vec<String> = names
            .chunks(2)
            .map(|p| format!("({} & {})", p[0], p[1]))
            .collect();
        text.push_str(&format!("constraint {}\n", disjuncts.join(" | ")));
        let err = parse_fm_to_cnf(&text).unwrap_err();
        assert!(matches!(err, FmError::NotClausal { line: 16, .. }), "{err}");
    }

    #[test]
    fn numbering_is_preorder() {
        let f = parse_fm_to_cnf(
            "feature R\n  optional A\n    optional A1\n  or { B C }\n  mandatory D\n",
        )
        .unwrap();
        let names: Vec<&str> = f.vars().map(|v| f.name(v).unwrap()).collect();
        assert_eq!(names, ["R", "A", "A1", "B", "C", "D"]);
        assert_eq!(
            f,
            parse_fm_to_cnf(
                "feature R\n  optional A\n    optional A1\n  or { B C }\n  mandatory D\n"
            )
            .unwrap()
        );
    }
}
