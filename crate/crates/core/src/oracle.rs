//! Brute-force ground truth and sampled validation of analysis results.
//!
//! [`oracle_strong_relations`] recomputes classification and relations by
//! enumerating every model, so it only scales to small formulas.
//! [`validate_model`] re-checks a claimed result on formulas of any size with
//! one SAT call per claim, never touching the backbone code.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backbone::Backbone;
use crate::formula::{CnfFormula, Literal, Var};
use crate::sat::{enumerate_models, CdclSolver, SatEngine, SatError};
use crate::strong::{FeatureClassification, Relations, StrongGraphs, StrongRelationMap};

pub const MAX_ORACLE_VARS: u32 = 25;
pub const DEFAULT_SAMPLE_SIZE: usize = 1000;
pub const DEFAULT_ABSENCE_SAMPLE: usize = 100;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("oracle supports at most {limit} variables, formula has {num_vars}")]
    TooManyVariables { num_vars: u32, limit: u32 },
    #[error("formula is unsatisfiable")]
    Unsatisfiable,
}

fn models(formula: &CnfFormula) -> Result<impl Iterator<Item = u32>, OracleError> {
    let iter =
        enumerate_models(formula, MAX_ORACLE_VARS).map_err(|_| OracleError::TooManyVariables {
            num_vars: formula.num_vars(),
            limit: MAX_ORACLE_VARS,
        })?;
    Ok(iter.map(|m| {
        m.iter()
            .enumerate()
            .fold(0u32, |acc, (i, &b)| acc | (u32::from(b) << i))
    }))
}

/// Literals shared by every model of the formula.
pub fn model_intersection(formula: &CnfFormula) -> Result<Backbone, OracleError> {
    let n = formula.num_vars();
    let full = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    let (mut all, mut any, mut seen) = (full, 0u32, false);
    for m in models(formula)? {
        all &= m;
        any |= m;
        seen = true;
    }
    if !seen {
        return Err(OracleError::Unsatisfiable);
    }
    Ok((0..n)
        .filter_map(|i| {
            let v = Var::from_slot(i as usize);
            if all >> i & 1 == 1 {
                Some(v.positive())
            } else if any >> i & 1 == 0 {
                Some(v.negative())
            } else {
                None
            }
        })
        .collect())
}

/// Classification and strong relations by full model enumeration.
pub fn oracle_strong_relations(
    formula: &CnfFormula,
) -> Result<(FeatureClassification, StrongRelationMap), OracleError> {
    let n = formula.num_vars() as usize;
    let full = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    let mut all = full;
    let mut any = 0u32;
    // Per variable f: AND and OR over the models with f = true.
    let mut and_given = vec![full; n];
    let mut or_given = vec![0u32; n];
    let mut seen = false;
    for m in models(formula)? {
        seen = true;
        all &= m;
        any |= m;
        let mut bits = m;
        while bits != 0 {
            let f = bits.trailing_zeros() as usize;
            and_given[f] &= m;
            or_given[f] |= m;
            bits &= bits - 1;
        }
    }
    if !seen {
        return Err(OracleError::Unsatisfiable);
    }

    let backbone: Backbone = (0..n)
        .filter_map(|i| {
            let v = Var::from_slot(i);
            if all >> i & 1 == 1 {
                Some(v.positive())
            } else if any >> i & 1 == 0 {
                Some(v.negative())
            } else {
                None
            }
        })
        .collect();
    let classification = FeatureClassification::from_backbone(formula.num_vars(), &backbone);
    let mask: u32 = classification
        .configurable
        .iter()
        .fold(0, |acc, v| acc | 1 << v.slot());

    let vars_of = |bits: u32| -> BTreeSet<Var> {
        (0..n)
            .filter(|&i| bits >> i & 1 == 1)
            .map(Var::from_slot)
            .collect()
    };
    let map = classification
        .configurable
        .iter()
        .map(|&f| {
            let own = !(1u32 << f.slot());
            let relations = Relations {
                depends_on: vars_of(and_given[f.slot()] & mask & own),
                conflicts_with: vars_of(!or_given[f.slot()] & mask & own),
            };
            (f, relations)
        })
        .collect();
    Ok((classification, map))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidationConfig {
    /// Nodes whose relations are re-checked; capped at the node count.
    pub sample_size: usize,
    /// Non-neighbors checked per sampled node and relation type; `None`
    /// checks all of them.
    pub absence_sample: Option<usize>,
    pub seed: u64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            sample_size: DEFAULT_SAMPLE_SIZE,
            absence_sample: Some(DEFAULT_ABSENCE_SAMPLE),
            seed: 0,
        }
    }
}

impl ValidationConfig {
    /// Every node and every non-neighbor.
    pub fn exhaustive() -> ValidationConfig {
        ValidationConfig {
            sample_size: usize::MAX,
            absence_sample: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ValidationError {
    #[error("sample size must be positive")]
    ZeroSample,
    #[error("formula is unsatisfiable")]
    VoidModel,
    #[error(transparent)]
    Sat(#[from] SatError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiscrepancyKind {
    Core,
    Dead,
    Node,
    Arc,
    Edge,
}

/// Status of a feature or relation as claimed and as established by SAT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Core,
    Dead,
    Configurable,
    Unclassified,
    Present,
    Absent,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Discrepancy {
    pub vars: Vec<Var>,
    pub kind: DiscrepancyKind,
    pub features: Vec<String>,
    /// What the formula entails.
    pub expected: Status,
    /// What the graphs claim.
    pub actual: Status,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub model_id: String,
    pub checked_nodes: usize,
    pub checked_arcs: usize,
    pub checked_edges: usize,
    pub checked_core: usize,
    pub checked_dead: usize,
    pub sampled: Vec<Var>,
    pub discrepancies: Vec<Discrepancy>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.discrepancies.is_empty()
    }
}

fn sat(engine: &mut CdclSolver, assumptions: &[Literal]) -> Result<bool, ValidationError> {
    Ok(engine.solve(assumptions)?.is_sat())
}

fn status_of(engine: &mut CdclSolver, v: Var) -> Result<Status, ValidationError> {
    let can_select = sat(engine, &[v.positive()])?;
    let can_deselect = sat(engine, &[v.negative()])?;
    Ok(match (can_select, can_deselect) {
        (true, true) => Status::Configurable,
        (true, false) => Status::Core,
        (false, true) => Status::Dead,
        (false, false) => return Err(ValidationError::VoidModel),
    })
}

fn kind_for(status: Status) -> DiscrepancyKind {
    match status {
        Status::Core => DiscrepancyKind::Core,
        Status::Dead => DiscrepancyKind::Dead,
        _ => DiscrepancyKind::Node,
    }
}

#[derive(Default)]
struct NodeOutcome {
    arcs: usize,
    edges: usize,
    discrepancies: Vec<Discrepancy>,
}

/// Re-checks classification and a sample of node neighborhoods with
/// independent SAT calls.
pub fn validate_model(
    model_id: &str,
    formula: &CnfFormula,
    graphs: &StrongGraphs,
    config: ValidationConfig,
) -> Result<ValidationReport, ValidationError> {
    if config.sample_size == 0 {
        return Err(ValidationError::ZeroSample);
    }
    let mut engine = CdclSolver::from_formula(formula);
    if formula.has_empty_clause() || !sat(&mut engine, &[])? {
        return Err(ValidationError::VoidModel);
    }
    let names = |vars: &[Var]| -> Vec<String> {
        vars.iter()
            .map(|&v| formula.display_name(v).into_owned())
            .collect()
    };
    let discrepancy = |kind, vars: Vec<Var>, expected, actual| Discrepancy {
        features: names(&vars),
        vars,
        kind,
        expected,
        actual,
    };

    let class = &graphs.classification;
    let mut report = ValidationReport {
        model_id: model_id.to_string(),
        ..ValidationReport::default()
    };
    let mut found = Vec::new();

    for &c in &class.core {
        report.checked_core += 1;
        if sat(&mut engine, &[c.negative()])? {
            let truth = status_of(&mut engine, c)?;
            found.push(discrepancy(
                DiscrepancyKind::Core,
                vec![c],
                truth,
                Status::Core,
            ));
        }
    }
    for &d in &class.dead {
        report.checked_dead += 1;
        if sat(&mut engine, &[d.positive()])? {
            let truth = status_of(&mut engine, d)?;
            found.push(discrepancy(
                DiscrepancyKind::Dead,
                vec![d],
                truth,
                Status::Dead,
            ));
        }
    }
    let mut valid_nodes = Vec::new();
    for &v in &graphs.nodes {
        let truth = status_of(&mut engine, v)?;
        if truth == Status::Configurable {
            valid_nodes.push(v);
        } else {
            found.push(discrepancy(
                kind_for(truth),
                vec![v],
                truth,
                Status::Configurable,
            ));
        }
    }
    for v in formula.vars() {
        let claimed =
            class.core.contains(&v) || class.dead.contains(&v) || graphs.nodes.contains(&v);
        if !claimed {
            let truth = status_of(&mut engine, v)?;
            found.push(discrepancy(
                kind_for(truth),
                vec![v],
                truth,
                Status::Unclassified,
            ));
        }
    }

    // Relations touching anything but a node should have been pruned.
    for &(a, b) in &graphs.dep_arcs {
        if !graphs.nodes.contains(&a) || !graphs.nodes.contains(&b) || a == b {
            found.push(discrepancy(
                DiscrepancyKind::Arc,
                vec![a, b],
                Status::Absent,
                Status::Present,
            ));
        }
    }
    for &(a, b) in &graphs.conflict_edges {
        if !graphs.nodes.contains(&a) || !graphs.nodes.contains(&b) || a >= b {
            found.push(discrepancy(
                DiscrepancyKind::Edge,
                vec![a, b],
                Status::Absent,
                Status::Present,
            ));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let take = config.sample_size.min(valid_nodes.len());
    let mut sampled: Vec<Var> = valid_nodes
        .choose_multiple(&mut rng, take)
        .copied()
        .collect();
    sampled.sort();

    let mut out_arcs: BTreeMap<Var, BTreeSet<Var>> = BTreeMap::new();
    for &(a, b) in &graphs.dep_arcs {
        out_arcs.entry(a).or_default().insert(b);
    }
    let mut conflicts: BTreeMap<Var, BTreeSet<Var>> = BTreeMap::new();
    for &(a, b) in &graphs.conflict_edges {
        conflicts.entry(a).or_default().insert(b);
        conflicts.entry(b).or_default().insert(a);
    }
    let empty = BTreeSet::new();

    let outcomes: Vec<Result<NodeOutcome, ValidationError>> = sampled
        .par_iter()
        .map_init(
            || CdclSolver::from_formula(formula),
            |engine, &v| {
                let mut out = NodeOutcome::default();
                let arcs = out_arcs.get(&v).unwrap_or(&empty);
                let edges = conflicts.get(&v).unwrap_or(&empty);
                for &g in arcs.iter().filter(|g| graphs.nodes.contains(g)) {
                    out.arcs += 1;
                    if sat(engine, &[v.positive(), g.negative()])? {
                        out.discrepancies.push(discrepancy(
                            DiscrepancyKind::Arc,
                            vec![v, g],
                            Status::Absent,
                            Status::Present,
                        ));
                    }
                }
                for &g in edges.iter().filter(|g| graphs.nodes.contains(g)) {
                    out.edges += 1;
                    if sat(engine, &[v.positive(), g.positive()])? {
                        out.discrepancies.push(discrepancy(
                            DiscrepancyKind::Edge,
                            vec![v.min(g), v.max(g)],
                            Status::Absent,
                            Status::Present,
                        ));
                    }
                }

                let mut local = ChaCha8Rng::seed_from_u64(
                    config.seed ^ u64::from(v.index()).wrapping_mul(0x9E37_79B9_7F4A_7C15),
                );
                let mut pick = |candidates: Vec<Var>| -> Vec<Var> {
                    match config.absence_sample {
                        Some(k) if k < candidates.len() => {
                            let mut chosen: Vec<Var> =
                                candidates.choose_multiple(&mut local, k).copied().collect();
                            chosen.sort();
                            chosen
                        }
                        _ => candidates,
                    }
                };
                let non_arcs = pick(
                    valid_nodes
                        .iter()
                        .copied()
                        .filter(|&g| g != v && !arcs.contains(&g))
                        .collect(),
                );
                let non_edges = pick(
                    valid_nodes
                        .iter()
                        .copied()
                        .filter(|&g| g != v && !edges.contains(&g))
                        .collect(),
                );
                for g in non_arcs {
                    out.arcs += 1;
                    if !sat(engine, &[v.positive(), g.negative()])? {
                        out.discrepancies.push(discrepancy(
                            DiscrepancyKind::Arc,
                            vec![v, g],
                            Status::Present,
                            Status::Absent,
                        ));
                    }
                }
                for g in non_edges {
                    out.edges += 1;
                    if !sat(engine, &[v.positive(), g.positive()])? {
                        out.discrepancies.push(discrepancy(
                            DiscrepancyKind::Edge,
                            vec![v.min(g), v.max(g)],
                            Status::Present,
                            Status::Absent,
                        ));
                    }
                }
                Ok(out)
            },
        )
        .collect();

    for outcome in outcomes {
        let outcome = outcome?;
        report.checked_arcs += outcome.arcs;
        report.checked_edges += outcome.edges;
        found.extend(outcome.discrepancies);
    }
    found.sort();
    found.dedup();
    report.checked_nodes = sampled.len();
    report.sampled = sampled;
    report.discrepancies = found;
    Ok(report)
}

/// Single-fault mutations of a graph artifact, for exercising the validator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutation {
    AddArc(Var, Var),
    RemoveArc(Var, Var),
    AddEdge(Var, Var),
    RemoveEdge(Var, Var),
    /// Marks a configurable feature as core as well.
    AddCore(Var),
    RemoveCore(Var),
    AddDead(Var),
    RemoveDead(Var),
}

impl Mutation {
    pub fn expected_kind(self) -> DiscrepancyKind {
        match self {
            Mutation::AddArc(..) | Mutation::RemoveArc(..) => DiscrepancyKind::Arc,
            Mutation::AddEdge(..) | Mutation::RemoveEdge(..) => DiscrepancyKind::Edge,
            Mutation::AddCore(_) | Mutation::RemoveCore(_) => DiscrepancyKind::Core,
            Mutation::AddDead(_) | Mutation::RemoveDead(_) => DiscrepancyKind::Dead,
        }
    }

    pub fn apply(self, graphs: &mut StrongGraphs) {
        let class = &mut graphs.classification;
        match self {
            Mutation::AddArc(a, b) => {
                graphs.dep_arcs.insert((a, b));
            }
            Mutation::RemoveArc(a, b) => {
                graphs.dep_arcs.remove(&(a, b));
            }
            Mutation::AddEdge(a, b) => {
                graphs.conflict_edges.insert((a.min(b), a.max(b)));
            }
            Mutation::RemoveEdge(a, b) => {
                graphs.conflict_edges.remove(&(a.min(b), a.max(b)));
            }
            Mutation::AddCore(v) => {
                class.core.insert(v);
            }
            Mutation::RemoveCore(v) => {
                class.core.remove(&v);
            }
            Mutation::AddDead(v) => {
                class.dead.insert(v);
            }
            Mutation::RemoveDead(v) => {
                class.dead.remove(&v);
            }
        }
    }
}
