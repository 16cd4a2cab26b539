//! Random formula generators for tests, benchmarks and synthetic corpora.

use rand::seq::index::sample;
use rand::Rng;

use crate::formula::{Clause, CnfFormula, Literal, Var};

/// Uniform random k-CNF with `round(num_vars · ratio)` clauses drawn over
/// distinct variables. Tautologies cannot occur; `k` is capped at `num_vars`.
pub fn random_cnf<R: Rng + ?Sized>(rng: &mut R, num_vars: u32, ratio: f64, k: usize) -> CnfFormula {
    let k = k.min(num_vars as usize);
    let num_clauses = (num_vars as f64 * ratio).round() as usize;
    let mut clauses = Vec::with_capacity(num_clauses);
    if k > 0 {
        for _ in 0..num_clauses {
            let vars = sample(rng, num_vars as usize, k);
            let lits = vars
                .iter()
                .map(|slot| Literal::new(Var::from_slot(slot), rng.gen_bool(0.5)));
            clauses.extend(Clause::new(lits));
        }
    }
    CnfFormula::new(num_vars, clauses, Default::default()).expect("generated in range")
}

/// Random formula shaped like a feature model: a few implications, some
/// mutual exclusions, and occasional longer clauses.
pub fn random_model<R: Rng + ?Sized>(rng: &mut R, num_vars: u32) -> CnfFormula {
    let n = num_vars as usize;
    let mut clauses = Vec::new();
    if n >= 2 {
        let implications = n + rng.gen_range(0..=n);
        for _ in 0..implications {
            let pair = sample(rng, n, 2);
            let (a, b) = (Var::from_slot(pair.index(0)), Var::from_slot(pair.index(1)));
            clauses.extend(Clause::new([a.negative(), b.positive()]));
        }
        for _ in 0..rng.gen_range(0..=n / 2) {
            let pair = sample(rng, n, 2);
            let (a, b) = (Var::from_slot(pair.index(0)), Var::from_slot(pair.index(1)));
            clauses.extend(Clause::new([a.negative(), b.negative()]));
        }
        for _ in 0..rng.gen_range(0..=n / 3) {
            let k = rng.gen_range(2..=3.min(n));
            let vars = sample(rng, n, k);
            let lits = vars
                .iter()
                .map(|slot| Literal::new(Var::from_slot(slot), rng.gen_bool(0.7)));
            clauses.extend(Clause::new(lits));
        }
    }
    if n >= 1 && rng.gen_bool(0.3) {
        let v = Var::from_slot(rng.gen_range(0..n));
        clauses.extend(Clause::new([Literal::new(v, rng.gen_bool(0.5))]));
    }
    CnfFormula::new(num_vars, clauses, Default::default()).expect("generated in range")
}
