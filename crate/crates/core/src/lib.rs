//! Strong dependency and conflict graphs for variability models.
//!
//! The pipeline reads a formula (DIMACS, or the small feature-model dialect in
//! [`fm`]), classifies core and dead features with a SAT backbone, extracts
//! strong relations for every configurable feature, and derives per-model
//! network metrics and corpus-level statistics.

pub mod backbone;
pub mod export;
pub mod fixtures;
pub mod fm;
pub mod formula;
pub mod metrics;
pub mod oracle;
pub mod report;
pub mod sat;
pub mod stats;
pub mod strong;
pub mod synth;

#[cfg(test)]
mod testutil;

pub use backbone::{compute_backbone, Backbone, BackboneError};
pub use export::{export_graph, graphs_from_json, ExportError, GraphFormat};
pub use fm::{fm_to_cnf, parse_fm, parse_fm_to_cnf, FeatureModel, FmError};
pub use formula::{emit_dimacs, parse_dimacs, Clause, CnfFormula, FormulaError, Literal, Var};
pub use metrics::{
    compute_model_metrics, compute_node_metrics, degree_distribution, DegreeAxis, HubThreshold,
    ModelMetrics, NodeMetrics,
};
pub use oracle::{
    model_intersection, oracle_strong_relations, validate_model, Discrepancy, DiscrepancyKind,
    Mutation, OracleError, ValidationConfig, ValidationError, ValidationReport,
};
pub use report::{
    analyze_corpus, analyze_model, CorpusManifest, CorpusOptions, CorpusSummary, ModelAnalysis,
    ModelFormat, ReportError,
};
pub use sat::{
    enumerate_models, solve_under_assumptions, CdclSolver, SatEngine, SatError, SatOutcome,
    SatStatus,
};
pub use stats::{
    median_and_coverage, spearman_rho, wilcoxon_signed_rank, Alternative, EffectLabel, StatsError,
    StatsSummary, WilcoxonResult,
};
pub use strong::{
    analyze_formula, build_strong_graphs, extract_strong_relations, AnalysisError, ExtractOptions,
    FeatureClassification, Relations, StrongGraphs, StrongRelationMap,
};
