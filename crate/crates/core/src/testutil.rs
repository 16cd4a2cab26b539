//! Brute-force references shared by unit tests. Nothing here calls the solver.

use crate::backbone::Backbone;
use crate::formula::{CnfFormula, Literal, Var};

pub fn assignments(num_vars: u32) -> impl Iterator<Item = Vec<bool>> {
    (0u64..1 << num_vars).map(move |bits| (0..num_vars).map(|i| bits >> i & 1 == 1).collect())
}

pub fn truth_table_sat(formula: &CnfFormula) -> bool {
    assignments(formula.num_vars()).any(|a| formula.eval(&a))
}

pub fn models(formula: &CnfFormula, assumptions: &[Literal]) -> Vec<Vec<bool>> {
    assignments(formula.num_vars())
        .filter(|a| formula.eval(a) && assumptions.iter().all(|l| l.eval(a)))
        .collect()
}

/// Intersection of all models' literal sets; `None` when there is no model.
pub fn brute_backbone(formula: &CnfFormula, assumptions: &[Literal]) -> Option<Backbone> {
    let models = models(formula, assumptions);
    let first = models.first()?;
    Some(
        (0..formula.num_vars() as usize)
            .filter(|&slot| models.iter().all(|m| m[slot] == first[slot]))
            .map(|slot| Literal::new(Var::from_slot(slot), first[slot]))
            .collect(),
    )
}
