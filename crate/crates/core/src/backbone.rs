//! Backbone computation by iterative model intersection.
//!
//! One model seeds the candidate set. Each untested candidate `l` is checked
//! with a single call under `assumptions ∪ {¬l}`: UNSAT proves `l` is in the
//! backbone, SAT yields a model that is intersected with the candidates,
//! pruning `l` and every other candidate the model contradicts.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::formula::{CnfFormula, Literal, Var};
use crate::sat::{CdclSolver, SatEngine, SatError};

/// Literals true in every model of a (conditioned) formula.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Backbone {
    literals: BTreeSet<Literal>,
}

impl Backbone {
    pub fn literals(&self) -> &BTreeSet<Literal> {
        &self.literals
    }

    pub fn contains(&self, lit: Literal) -> bool {
        self.literals.contains(&lit)
    }

    /// The backbone literal on `var`, if any.
    pub fn value_of(&self, var: Var) -> Option<bool> {
        if self.literals.contains(&var.positive()) {
            Some(true)
        } else if self.literals.contains(&var.negative()) {
            Some(false)
        } else {
            None
        }
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn positive_vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.literals
            .iter()
            .filter(|l| l.is_positive())
            .map(|l| l.var())
    }

    pub fn negative_vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.literals
            .iter()
            .filter(|l| !l.is_positive())
            .map(|l| l.var())
    }
}

impl FromIterator<Literal> for Backbone {
    fn from_iter<I: IntoIterator<Item = Literal>>(iter: I) -> Self {
        Backbone {
            literals: iter.into_iter().collect(),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BackboneError {
    #[error("formula is unsatisfiable under the given assumptions")]
    Unsatisfiable,
    #[error(transparent)]
    Sat(#[from] SatError),
}

/// Backbone of `formula ∧ assumptions` on a private solver.
pub fn compute_backbone(
    formula: &CnfFormula,
    assumptions: &[Literal],
) -> Result<Backbone, BackboneError> {
    let mut engine = CdclSolver::from_formula(formula);
    backbone_with(&mut engine, assumptions)
}

/// Backbone on an existing engine, testing candidates by ascending variable.
pub fn backbone_with<E: SatEngine + ?Sized>(
    engine: &mut E,
    assumptions: &[Literal],
) -> Result<Backbone, BackboneError> {
    let order: Vec<Var> = (1..=engine.num_vars()).map(Var::new).collect();
    backbone_in_order(engine, assumptions, &order)
}

/// Backbone with an explicit candidate-testing order. Variables missing from
/// `order` are tested afterwards in ascending order.
pub fn backbone_in_order<E: SatEngine + ?Sized>(
    engine: &mut E,
    assumptions: &[Literal],
    order: &[Var],
) -> Result<Backbone, BackboneError> {
    let num_vars = engine.num_vars() as usize;
    let first = engine.solve(assumptions)?;
    let Some(model) = first.model else {
        return Err(BackboneError::Unsatisfiable);
    };

    // candidate[slot] = value the variable takes in every model seen so far.
    let mut candidate: Vec<Option<bool>> = model.into_iter().map(Some).collect();
    let mut proven: Vec<bool> = vec![false; num_vars];
    let mut query: Vec<Literal> = assumptions.to_vec();
    for a in assumptions {
        proven[a.var().slot()] = true;
    }

    let mut listed = vec![false; num_vars];
    let tail = (1..=num_vars as u32).map(Var::new);
    let sequence: Vec<Var> = order
        .iter()
        .copied()
        .chain(tail)
        .filter(|v| !std::mem::replace(&mut listed[v.slot()], true))
        .collect();

    for var in sequence {
        let slot = var.slot();
        let Some(value) = candidate[slot] else {
            continue;
        };
        if proven[slot] {
            continue;
        }
        let lit = Literal::new(var, value);
        query.push(!lit);
        let outcome = engine.solve(&query)?;
        query.pop();
        match outcome.model {
            None => {
                proven[slot] = true;
                // Later queries may rely on it; this keeps them cheap.
                query.push(lit);
            }
            Some(model) => {
                for (c, m) in candidate.iter_mut().zip(model) {
                    if *c != Some(m) {
                        *c = None;
                    }
                }
            }
        }
    }

    Ok(candidate
        .iter()
        .enumerate()
        .filter_map(|(slot, c)| c.map(|value| Literal::new(Var::from_slot(slot), value)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_dimacs;
    use crate::sat::enumerate_models;
    use crate::synth::random_cnf;
    use crate::testutil::brute_backbone;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lits(values: &[i64]) -> Backbone {
        values
            .iter()
            .map(|&v| Literal::from_dimacs(v).unwrap())
            .collect()
    }

    fn assume(values: &[i64]) -> Vec<Literal> {
        values
            .iter()
            .map(|&v| Literal::from_dimacs(v).unwrap())
            .collect()
    }

    #[test]
    fn unit_clause() {
        let f = parse_dimacs("p cnf 1 1\n1 0\n").unwrap();
        assert_eq!(compute_backbone(&f, &[]).unwrap(), lits(&[1]));
    }

    #[test]
    fn propagation() {
        let f = parse_dimacs("p cnf 2 2\n1 2 0\n-1 0\n").unwrap();
        assert_eq!(compute_backbone(&f, &[]).unwrap(), lits(&[-1, 2]));
    }

    #[test]
    fn assumptions_are_included() {
        let f = parse_dimacs("p cnf 2 1\n-1 2 0\n").unwrap();
        assert_eq!(compute_backbone(&f, &assume(&[1])).unwrap(), lits(&[1, 2]));
    }

    #[test]
    fn free_variables_are_not_backbone() {
        let f = parse_dimacs("p cnf 3 1\n1 2 0\n").unwrap();
        assert!(compute_backbone(&f, &[]).unwrap().is_empty());
    }

    #[test]
    fn unsat_is_an_error() {
        let f = parse_dimacs("p cnf 1 2\n1 0\n-1 0\n").unwrap();
        assert_eq!(compute_backbone(&f, &[]), Err(BackboneError::Unsatisfiable));
        let f = parse_dimacs("p cnf 2 1\n-1 2 0\n").unwrap();
        assert_eq!(
            compute_backbone(&f, &assume(&[1, -2])),
            Err(BackboneError::Unsatisfiable)
        );
    }

    #[test]
    fn matches_model_intersection_with_call_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut checked = 0;
        while checked < 200 {
            let n = 4 + checked % 17;
            let f = random_cnf(&mut rng, n, 2.5 + (checked % 4) as f64 * 0.5, 3);
            let Some(expected) = brute_backbone(&f, &[]) else {
                continue;
            };
            let mut engine = CdclSolver::from_formula(&f);
            let got = backbone_with(&mut engine, &[]).unwrap();
            assert_eq!(got, expected);
            assert!(engine.solve_calls() <= 2 * n as u64 + 1);
            assert!(engine.solve_calls() <= n as u64 + 1);
            checked += 1;
        }
    }

    #[test]
    fn conditioned_backbone_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..60 {
            let f = random_cnf(&mut rng, 12, 2.5, 3);
            if enumerate_models(&f, 25).unwrap().next().is_none() {
                continue;
            }
            for v in f.vars() {
                let a = [v.positive()];
                let expected = brute_backbone(&f, &a);
                let got = compute_backbone(&f, &a).ok();
                assert_eq!(got, expected);
            }
        }
    }

    #[test]
    fn order_does_not_change_the_result() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..40 {
            let f = random_cnf(&mut rng, 16, 3.0, 3);
            let Ok(reference) = compute_backbone(&f, &[]) else {
                continue;
            };
            let mut order: Vec<Var> = f.vars().collect();
            for _ in 0..5 {
                order.shuffle(&mut rng);
                let mut engine = CdclSolver::from_formula(&f);
                assert_eq!(
                    backbone_in_order(&mut engine, &[], &order).unwrap(),
                    reference
                );
            }
        }
    }
}
