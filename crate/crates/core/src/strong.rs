//! Core/dead classification, strong relations and strong graphs.
//!
//! The backbone `B` of the formula gives the core (positive literals) and
//! dead (negative literals) features. Every other variable `v` is
//! configurable; the backbone of the formula conditioned on `v` lists what
//! selecting `v` forces. Positive consequences are strong dependencies,
//! negative ones strong conflicts. Consequences on core or dead variables are
//! trivial and dropped, so relations only ever connect configurable features.

use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet};

use log::{debug, info};
use rayon::prelude::*;
use thiserror::Error;

use crate::backbone::{backbone_with, Backbone, BackboneError};
use crate::formula::{CnfFormula, Var};
use crate::sat::{CdclSolver, SatError};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("void model: the formula has no satisfying assignment")]
    VoidModel,
    #[error("variable {0} is configurable but selecting it is unsatisfiable")]
    Inconsistent(Var),
    #[error(transparent)]
    Sat(#[from] SatError),
}

/// Partition of the variables into core, dead and configurable.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureClassification {
    pub num_vars: u32,
    pub core: BTreeSet<Var>,
    pub dead: BTreeSet<Var>,
    pub configurable: BTreeSet<Var>,
}

impl FeatureClassification {
    pub fn from_backbone(num_vars: u32, backbone: &Backbone) -> FeatureClassification {
        let core: BTreeSet<Var> = backbone.positive_vars().collect();
        let dead: BTreeSet<Var> = backbone.negative_vars().collect();
        let configurable = (1..=num_vars)
            .map(Var::new)
            .filter(|v| !core.contains(v) && !dead.contains(v))
            .collect();
        FeatureClassification {
            num_vars,
            core,
            dead,
            configurable,
        }
    }
}

/// Strong relations of one configurable feature.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Relations {
    pub depends_on: BTreeSet<Var>,
    pub conflicts_with: BTreeSet<Var>,
}

/// Relations per configurable feature, keyed by variable.
pub type StrongRelationMap = BTreeMap<Var, Relations>;

#[derive(Debug, Clone, Copy, Default)]
pub struct ExtractOptions {
    /// Analyze configurable features on the rayon pool, one solver per worker.
    pub parallel: bool,
}

/// Classifies features and collects strong relations.
pub fn extract_strong_relations(
    formula: &CnfFormula,
) -> Result<(FeatureClassification, StrongRelationMap), AnalysisError> {
    extract_strong_relations_with(formula, ExtractOptions::default())
}

pub fn extract_strong_relations_with(
    formula: &CnfFormula,
    options: ExtractOptions,
) -> Result<(FeatureClassification, StrongRelationMap), AnalysisError> {
    if formula.has_empty_clause() {
        return Err(AnalysisError::VoidModel);
    }
    let mut engine = CdclSolver::from_formula(formula);
    let backbone = backbone_with(&mut engine, &[]).map_err(|e| match e {
        BackboneError::Unsatisfiable => AnalysisError::VoidModel,
        BackboneError::Sat(e) => AnalysisError::Sat(e),
    })?;
    let classification = FeatureClassification::from_backbone(formula.num_vars(), &backbone);
    info!(
        "{} variables: {} core, {} dead, {} configurable",
        formula.num_vars(),
        classification.core.len(),
        classification.dead.len(),
        classification.configurable.len()
    );

    let vars: Vec<Var> = classification.configurable.iter().copied().collect();
    let total = vars.len();
    let entries: Vec<(Var, Relations)> = if options.parallel {
        vars.par_iter()
            .map_init(
                || CdclSolver::from_formula(formula),
                |engine, &v| relations_of(engine, &classification, v).map(|r| (v, r)),
            )
            .collect::<Result<_, _>>()?
    } else {
        vars.iter()
            .enumerate()
            .map(|(i, &v)| {
                debug!(
                    "conditioning on {} ({}/{})",
                    formula.display_name(v),
                    i + 1,
                    total
                );
                relations_of(&mut engine, &classification, v).map(|r| (v, r))
            })
            .collect::<Result<_, _>>()?
    };
    Ok((classification, entries.into_iter().collect()))
}

fn relations_of(
    engine: &mut CdclSolver,
    classification: &FeatureClassification,
    v: Var,
) -> Result<Relations, AnalysisError> {
    let conditioned = backbone_with(engine, &[v.positive()]).map_err(|e| match e {
        BackboneError::Unsatisfiable => AnalysisError::Inconsistent(v),
        BackboneError::Sat(e) => AnalysisError::Sat(e),
    })?;
    let mut relations = Relations::default();
    for lit in conditioned.literals() {
        let g = lit.var();
        if g == v || !classification.configurable.contains(&g) {
            continue;
        }
        if lit.is_positive() {
            relations.depends_on.insert(g);
        } else {
            relations.conflicts_with.insert(g);
        }
    }
    Ok(relations)
}

/// Pruned strong dependency and conflict graphs over configurable features.
///
/// `dep_arcs` holds `(from, to)` meaning `from` strongly depends on `to`.
/// `conflict_edges` holds each unordered pair once as `(low, high)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StrongGraphs {
    pub nodes: BTreeSet<Var>,
    pub dep_arcs: BTreeSet<(Var, Var)>,
    pub conflict_edges: BTreeSet<(Var, Var)>,
    pub classification: FeatureClassification,
    pub names: BTreeMap<Var, String>,
}

impl StrongGraphs {
    pub fn with_names(mut self, names: BTreeMap<Var, String>) -> StrongGraphs {
        self.names = names;
        self
    }

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

    pub fn has_conflict(&self, a: Var, b: Var) -> bool {
        self.conflict_edges.contains(&(a.min(b), a.max(b)))
    }
}

/// Materializes the graphs from a relation map.
pub fn build_strong_graphs(
    classification: FeatureClassification,
    map: &StrongRelationMap,
) -> StrongGraphs {
    let mut dep_arcs = BTreeSet::new();
    let mut conflict_edges = BTreeSet::new();
    for (&v, relations) in map {
        for &g in &relations.depends_on {
            if g != v {
                dep_arcs.insert((v, g));
            }
        }
        for &g in &relations.conflicts_with {
            if g != v {
                conflict_edges.insert((v.min(g), v.max(g)));
            }
        }
    }
    StrongGraphs {
        nodes: classification.configurable.clone(),
        dep_arcs,
        conflict_edges,
        classification,
        names: BTreeMap::new(),
    }
}

/// Extraction and graph construction in one step, carrying feature names.
pub fn analyze_formula(
    formula: &CnfFormula,
    options: ExtractOptions,
) -> Result<StrongGraphs, AnalysisError> {
    let (classification, map) = extract_strong_relations_with(formula, options)?;
    Ok(build_strong_graphs(classification, &map).with_names(formula.names().clone()))
}
