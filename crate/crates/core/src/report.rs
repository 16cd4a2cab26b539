//! Model loading, per-model output directories and corpus batch runs.
//!
//! A model directory holds `graphs.dot`, `graphs.graphml`, `graphs.json`,
//! `nodes.csv`, `histograms.csv` and `summary.json`. A corpus run writes one
//! directory per model under `<out>/models/` and the tables `corpus.csv`,
//! `domain_stats.csv`, `tests.csv`, `degree_medians.csv` and `failures.csv`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::export::{export_graph, GraphFormat};
use crate::fm::{parse_fm_to_cnf, FmError};
use crate::formula::{parse_dimacs, CnfFormula, FormulaError};
use crate::metrics::{
    compute_model_metrics, degree_distribution, DegreeAxis, HistogramBin, HubOverlap, HubThreshold,
    ModelMetrics,
};
use crate::stats::{summarize, wilcoxon_signed_rank, Alternative, StatsError, WilcoxonResult};
use crate::strong::{analyze_formula, AnalysisError, ExtractOptions, StrongGraphs};

pub const HISTOGRAM_BIN_WIDTH: f64 = 10.0;
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFormat {
    Dimacs,
    Fm,
}

impl ModelFormat {
    /// `.fm` files are feature models; everything else is read as DIMACS.
    pub fn from_path(path: &Path) -> ModelFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("fm") => ModelFormat::Fm,
            _ => ModelFormat::Dimacs,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelFormat::Dimacs => "dimacs",
            ModelFormat::Fm => "fm",
        }
    }
}

impl FromStr for ModelFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dimacs" | "cnf" => Ok(ModelFormat::Dimacs),
            "fm" => Ok(ModelFormat::Fm),
            other => Err(format!(
                "unknown model format `{other}` (expected dimacs or fm)"
            )),
        }
    }
}

impl fmt::Display for ModelFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Dimacs { path: PathBuf, source: FormulaError },
    #[error("{path}: {source}")]
    Fm { path: PathBuf, source: FmError },
    #[error("{path}: void model")]
    VoidModel { path: PathBuf },
    #[error("{path}: {source}")]
    Analysis {
        path: PathBuf,
        source: AnalysisError,
    },
    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("cannot start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

impl ReportError {
    /// Process exit status: 2 for unparsable input, 3 for void models.
    pub fn exit_code(&self) -> i32 {
        match self {
            ReportError::Dimacs { .. } | ReportError::Fm { .. } => 2,
            ReportError::VoidModel { .. } => 3,
            _ => 1,
        }
    }

    fn failure_kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "parse",
            3 => "void",
            _ => "error",
        }
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), ReportError> {
    fs::write(path, contents).map_err(|source| ReportError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(path: &Path) -> Result<(), ReportError> {
    fs::create_dir_all(path).map_err(|source| ReportError::Write {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_formula(path: &Path, format: ModelFormat) -> Result<CnfFormula, ReportError> {
    let text = fs::read_to_string(path).map_err(|source| ReportError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    match format {
        ModelFormat::Dimacs => parse_dimacs(&text).map_err(|source| ReportError::Dimacs {
            path: path.to_path_buf(),
            source,
        }),
        ModelFormat::Fm => parse_fm_to_cnf(&text).map_err(|source| ReportError::Fm {
            path: path.to_path_buf(),
            source,
        }),
    }
}

/// Graphs, metrics and histograms of one model.
#[derive(Debug, Clone)]
pub struct ModelAnalysis {
    pub graphs: StrongGraphs,
    pub metrics: ModelMetrics,
    pub histograms: BTreeMap<DegreeAxis, Vec<HistogramBin>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeLeaders {
    pub degree: usize,
    pub features: Vec<String>,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model_id: String,
    pub num_vars: u32,
    pub num_nodes: usize,
    pub num_arcs: usize,
    pub num_edges: usize,
    pub core_pct: f64,
    pub dead_pct: f64,
    pub require_density: f64,
    pub exclude_density: f64,
    pub threshold_pct: HubThreshold,
    pub overlap: HubOverlap,
    pub max_in_degree: DegreeLeaders,
    pub max_out_degree: DegreeLeaders,
    pub max_conflict_degree: DegreeLeaders,
    pub core: Vec<String>,
    pub dead: Vec<String>,
}

impl ModelAnalysis {
    pub fn from_graphs(model_id: &str, graphs: StrongGraphs, threshold: HubThreshold) -> Self {
        let metrics = compute_model_metrics(model_id, &graphs, threshold);
        let histograms = DegreeAxis::ALL
            .iter()
            .map(|&axis| {
                let bins = degree_distribution(&metrics.nodes, axis, HISTOGRAM_BIN_WIDTH)
                    .expect("bin width is valid");
                (axis, bins)
            })
            .collect();
        ModelAnalysis {
            graphs,
            metrics,
            histograms,
        }
    }

    fn leaders(&self, degree: impl Fn(&crate::metrics::NodeMetrics) -> usize) -> DegreeLeaders {
        let max = self.metrics.nodes.iter().map(&degree).max().unwrap_or(0);
        let features = if max == 0 {
            Vec::new()
        } else {
            self.metrics
                .nodes
                .iter()
                .filter(|n| degree(n) == max)
                .map(|n| self.graphs.display_name(n.feature).into_owned())
                .collect()
        };
        DegreeLeaders {
            degree: max,
            features,
        }
    }

    pub fn summary(&self) -> ModelSummary {
        let m = &self.metrics;
        let names = |vars: &BTreeSet<crate::formula::Var>| -> Vec<String> {
            vars.iter()
                .map(|&v| self.graphs.display_name(v).into_owned())
                .collect()
        };
        ModelSummary {
            model_id: m.model_id.clone(),
            num_vars: m.num_vars,
            num_nodes: m.num_nodes,
            num_arcs: m.num_arcs,
            num_edges: m.num_edges,
            core_pct: m.core_pct,
            dead_pct: m.dead_pct,
            require_density: m.require_density,
            exclude_density: m.exclude_density,
            threshold_pct: m.threshold_pct,
            overlap: m.overlap.clone(),
            max_in_degree: self.leaders(|n| n.in_degree),
            max_out_degree: self.leaders(|n| n.out_degree),
            max_conflict_degree: self.leaders(|n| n.conflict_degree),
            core: names(&self.graphs.classification.core),
            dead: names(&self.graphs.classification.dead),
        }
    }

    pub fn nodes_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "feature",
            "var",
            "in_degree",
            "out_degree",
            "conflict_degree",
            "in_pct",
            "out_pct",
            "conflict_pct",
            "high_in",
            "high_out",
            "high_conflict",
        ])?;
        for n in &self.metrics.nodes {
            w.write_record([
                self.graphs.display_name(n.feature).into_owned(),
                n.feature.index().to_string(),
                n.in_degree.to_string(),
                n.out_degree.to_string(),
                n.conflict_degree.to_string(),
                n.in_pct.to_string(),
                n.out_pct.to_string(),
                n.conflict_pct.to_string(),
                n.high_in.to_string(),
                n.high_out.to_string(),
                n.high_conflict.to_string(),
            ])?;
        }
        finish_csv(w)
    }

    pub fn histograms_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["axis", "bin_lower", "bin_upper", "share"])?;
        for (axis, bins) in &self.histograms {
            for b in bins {
                w.write_record([
                    axis.as_str().to_string(),
                    b.lower.to_string(),
                    b.upper.to_string(),
                    b.share.to_string(),
                ])?;
            }
        }
        finish_csv(w)
    }

    /// Writes the model directory.
    pub fn write_to(&self, dir: &Path) -> Result<(), ReportError> {
        create_dir(dir)?;
        for format in GraphFormat::ALL {
            let path = dir.join(format!("graphs.{}", format.extension()));
            write_file(&path, export_graph(&self.graphs, format))?;
        }
        write_file(&dir.join("nodes.csv"), self.nodes_csv()?)?;
        write_file(&dir.join("histograms.csv"), self.histograms_csv()?)?;
        let mut summary =
            serde_json::to_string_pretty(&self.summary()).expect("summary serializes");
        summary.push('\n');
        write_file(&dir.join("summary.json"), summary)
    }
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String, ReportError> {
    let bytes = w
        .into_inner()
        .map_err(|e| ReportError::Csv(csv::Error::from(e.into_error())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Parses and analyzes one model file.
pub fn analyze_model(
    model_id: &str,
    path: &Path,
    format: ModelFormat,
    threshold: HubThreshold,
    options: ExtractOptions,
) -> Result<ModelAnalysis, ReportError> {
    let formula = load_formula(path, format)?;
    let graphs = analyze_formula(&formula, options).map_err(|source| match source {
        AnalysisError::VoidModel => ReportError::VoidModel {
            path: path.to_path_buf(),
        },
        source => ReportError::Analysis {
            path: path.to_path_buf(),
            source,
        },
    })?;
    Ok(ModelAnalysis::from_graphs(model_id, graphs, threshold))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub path: PathBuf,
    pub format: ModelFormat,
    pub domain: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusManifest {
    pub entries: Vec<ManifestEntry>,
}

impl CorpusManifest {
    /// Reads an `id,path,format,domain` CSV. Relative paths are resolved
    /// against the manifest's directory.
    pub fn load(path: &Path) -> Result<CorpusManifest, ReportError> {
        let text = fs::read_to_string(path).map_err(|source| ReportError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base).map_err(|message| ReportError::Manifest {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn parse(text: &str, base: &Path) -> Result<CorpusManifest, String> {
        #[derive(Deserialize)]
        struct Row {
            id: String,
            path: String,
            format: String,
            domain: String,
        }
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut ids = BTreeSet::new();
        let mut entries = Vec::new();
        for (i, row) in reader.deserialize::<Row>().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| format!("row {line}: {e}"))?;
            if row.id.is_empty() {
                return Err(format!("row {line}: empty id"));
            }
            if row.domain.is_empty() {
                return Err(format!("row {line}: empty domain"));
            }
            if !ids.insert(row.id.clone()) {
                return Err(format!("row {line}: duplicate id `{}`", row.id));
            }
            let format = row.format.parse().map_err(|e| format!("row {line}: {e}"))?;
            let path = base.join(&row.path);
            if !path.is_file() {
                return Err(format!("row {line}: no such file {}", path.display()));
            }
            entries.push(ManifestEntry {
                id: row.id,
                path,
                format,
                domain: row.domain,
            });
        }
        if entries.is_empty() {
            return Err("manifest has no entries".to_string());
        }
        Ok(CorpusManifest { entries })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub domain: String,
    pub num_vars: u32,
    pub num_nodes: usize,
    pub num_arcs: usize,
    pub num_edges: usize,
    pub core_pct: f64,
    pub dead_pct: f64,
    pub require_density_x: f64,
    pub exclude_density_x: f64,
    pub high_in_nodes: usize,
    pub high_out_given_high_in_pct: Option<f64>,
    pub high_conflict_given_high_in_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub id: String,
    pub domain: String,
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainStat {
    pub domain: String,
    pub metric: String,
    pub n: usize,
    pub ci_low: f64,
    pub median: f64,
    pub ci_high: f64,
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainTest {
    pub domain: String,
    pub test: String,
    pub n: usize,
    pub result: WilcoxonResult,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeMedian {
    pub domain: String,
    pub axis: DegreeAxis,
    pub bin_lower: f64,
    pub bin_upper: f64,
    pub median_share: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct CorpusOptions {
    pub threshold: HubThreshold,
    pub jobs: usize,
    pub extract: ExtractOptions,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        CorpusOptions {
            threshold: HubThreshold::default(),
            jobs: 1,
            extract: ExtractOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusSummary {
    pub records: Vec<CorpusRecord>,
    pub failures: Vec<Failure>,
    pub domain_stats: Vec<DomainStat>,
    pub tests: Vec<DomainTest>,
    pub degree_medians: Vec<DegreeMedian>,
}

type ScalarFn = fn(&CorpusRecord) -> Option<f64>;

const SCALARS: [(&str, ScalarFn); 6] = [
    ("core_pct", |r| Some(r.core_pct)),
    ("dead_pct", |r| Some(r.dead_pct)),
    ("require_density_x", |r| Some(r.require_density_x)),
    ("exclude_density_x", |r| Some(r.exclude_density_x)),
    ("high_out_given_high_in_pct", |r| {
        r.high_out_given_high_in_pct
    }),
    ("high_conflict_given_high_in_pct", |r| {
        r.high_conflict_given_high_in_pct
    }),
];

/// (name, a, b, alternative): tests whether `a` exceeds `b` or vice versa.
const TESTS: [(&str, ScalarFn, ScalarFn, Alternative); 4] = [
    (
        "dead_gt_core",
        |r| Some(r.dead_pct),
        |r| Some(r.core_pct),
        Alternative::AGreater,
    ),
    (
        "core_gt_dead",
        |r| Some(r.dead_pct),
        |r| Some(r.core_pct),
        Alternative::BGreater,
    ),
    (
        "excludes_gt_requires",
        |r| Some(r.exclude_density_x),
        |r| Some(r.require_density_x),
        Alternative::AGreater,
    ),
    (
        "requires_gt_excludes",
        |r| Some(r.exclude_density_x),
        |r| Some(r.require_density_x),
        Alternative::BGreater,
    ),
];

fn record_of(entry: &ManifestEntry, m: &ModelMetrics) -> CorpusRecord {
    CorpusRecord {
        id: entry.id.clone(),
        domain: entry.domain.clone(),
        num_vars: m.num_vars,
        num_nodes: m.num_nodes,
        num_arcs: m.num_arcs,
        num_edges: m.num_edges,
        core_pct: m.core_pct,
        dead_pct: m.dead_pct,
        require_density_x: m.require_density,
        exclude_density_x: m.exclude_density,
        high_in_nodes: m.overlap.high_in_nodes,
        high_out_given_high_in_pct: m.overlap.high_out_given_high_in,
        high_conflict_given_high_in_pct: m.overlap.high_conflict_given_high_in,
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Aggregates analyzed models into per-domain statistics.
pub fn aggregate(
    records: Vec<CorpusRecord>,
    failures: Vec<Failure>,
    histograms: &BTreeMap<String, BTreeMap<DegreeAxis, Vec<HistogramBin>>>,
) -> Result<CorpusSummary, ReportError> {
    let mut by_domain: BTreeMap<&str, Vec<&CorpusRecord>> = BTreeMap::new();
    for r in &records {
        by_domain.entry(&r.domain).or_default().push(r);
    }
    let mut domain_stats = Vec::new();
    let mut tests = Vec::new();
    let mut degree_medians = Vec::new();
    for (&domain, rows) in &by_domain {
        for (metric, get) in SCALARS {
            let (values, sizes): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .filter_map(|r| get(r).map(|v| (v, f64::from(r.num_vars))))
                .unzip();
            if values.is_empty() {
                continue;
            }
            let s = summarize(&values, &sizes)?;
            domain_stats.push(DomainStat {
                domain: domain.to_string(),
                metric: metric.to_string(),
                n: s.n,
                ci_low: s.ci_low,
                median: s.median,
                ci_high: s.ci_high,
                rho: s.rho,
            });
        }
        for (name, a, b, alternative) in TESTS {
            let (xs, ys): (Vec<f64>, Vec<f64>) =
                rows.iter().filter_map(|r| Some((a(r)?, b(r)?))).unzip();
            let result = wilcoxon_signed_rank(&xs, &ys, alternative)?;
            tests.push(DomainTest {
                domain: domain.to_string(),
                test: name.to_string(),
                n: xs.len(),
                significant: result.significant(SIGNIFICANCE_LEVEL),
                result,
            });
        }
        for axis in DegreeAxis::ALL {
            let per_model: Vec<&Vec<HistogramBin>> = rows
                .iter()
                .filter_map(|r| histograms.get(&r.id).and_then(|h| h.get(&axis)))
                .collect();
            let Some(first) = per_model.first() else {
                continue;
            };
            for (k, bin) in first.iter().enumerate() {
                let mut shares: Vec<f64> = per_model.iter().map(|h| h[k].share).collect();
                degree_medians.push(DegreeMedian {
                    domain: domain.to_string(),
                    axis,
                    bin_lower: bin.lower,
                    bin_upper: bin.upper,
                    median_share: median(&mut shares),
                });
            }
        }
    }
    Ok(CorpusSummary {
        records,
        failures,
        domain_stats,
        tests,
        degree_medians,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl CorpusSummary {
    pub fn corpus_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "id",
            "domain",
            "num_vars",
            "num_nodes",
            "num_arcs",
            "num_edges",
            "core_pct",
            "dead_pct",
            "require_density_x",
            "exclude_density_x",
            "high_in_nodes",
            "high_out_given_high_in_pct",
            "high_conflict_given_high_in_pct",
        ])?;
        for r in &self.records {
            w.write_record([
                r.id.clone(),
                r.domain.clone(),
                r.num_vars.to_string(),
                r.num_nodes.to_string(),
                r.num_arcs.to_string(),
                r.num_edges.to_string(),
                r.core_pct.to_string(),
                r.dead_pct.to_string(),
                r.require_density_x.to_string(),
                r.exclude_density_x.to_string(),
                r.high_in_nodes.to_string(),
                opt(r.high_out_given_high_in_pct),
                opt(r.high_conflict_given_high_in_pct),
            ])?;
        }
        finish_csv(w)
    }

    pub fn domain_stats_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "domain", "metric", "n", "ci_low", "median", "ci_high", "rho",
        ])?;
        for s in &self.domain_stats {
            w.write_record([
                s.domain.clone(),
                s.metric.clone(),
                s.n.to_string(),
                s.ci_low.to_string(),
                s.median.to_string(),
                s.ci_high.to_string(),
                opt(s.rho),
            ])?;
        }
        finish_csv(w)
    }

    pub fn tests_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "domain",
            "test",
            "n",
            "n_effective",
            "statistic",
            "z_value",
            "p_value",
            "method",
            "significant",
            "effect_size",
            "effect_label",
        ])?;
        for t in &self.tests {
            let r = &t.result;
            w.write_record([
                t.domain.clone(),
                t.test.clone(),
                t.n.to_string(),
                r.n_effective.to_string(),
                r.statistic.to_string(),
                r.z_value.to_string(),
                r.p_value.to_string(),
                format!("{:?}", r.method).to_lowercase(),
                if t.significant { "yes" } else { "no" }.to_string(),
                r.effect_size.to_string(),
                r.effect_label.as_str().to_string(),
            ])?;
        }
        finish_csv(w)
    }

    pub fn degree_medians_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["domain", "axis", "bin_lower", "bin_upper", "median_share"])?;
        for d in &self.degree_medians {
            w.write_record([
                d.domain.clone(),
                d.axis.as_str().to_string(),
                d.bin_lower.to_string(),
                d.bin_upper.to_string(),
                d.median_share.to_string(),
            ])?;
        }
        finish_csv(w)
    }

    pub fn failures_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["id", "domain", "kind", "message"])?;
        for f in &self.failures {
            w.write_record([&f.id, &f.domain, &f.kind, &f.message])?;
        }
        finish_csv(w)
    }

    pub fn write_to(&self, out: &Path) -> Result<(), ReportError> {
        create_dir(out)?;
        write_file(&out.join("corpus.csv"), self.corpus_csv()?)?;
        write_file(&out.join("domain_stats.csv"), self.domain_stats_csv()?)?;
        write_file(&out.join("tests.csv"), self.tests_csv()?)?;
        write_file(&out.join("degree_medians.csv"), self.degree_medians_csv()?)?;
        write_file(&out.join("failures.csv"), self.failures_csv()?)
    }
}

/// Analyzes every manifest entry on `jobs` workers, writes per-model
/// directories under `out/models` and the corpus tables under `out`.
pub fn analyze_corpus(
    manifest: &CorpusManifest,
    options: CorpusOptions,
    out: &Path,
) -> Result<CorpusSummary, ReportError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs.max(1))
        .build()?;
    let models_dir = out.join("models");
    let results: Vec<(&ManifestEntry, Result<ModelAnalysis, ReportError>)> = pool.install(|| {
        manifest
            .entries
            .par_iter()
            .map(|entry| {
                let analysis = analyze_model(
                    &entry.id,
                    &entry.path,
                    entry.format,
                    options.threshold,
                    options.extract,
                )
                .and_then(|a| a.write_to(&models_dir.join(&entry.id)).map(|()| a));
                (entry, analysis)
            })
            .collect()
    });

    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut histograms = BTreeMap::new();
    for (entry, result) in results {
        match result {
            Ok(a) => {
                records.push(record_of(entry, &a.metrics));
                histograms.insert(entry.id.clone(), a.histograms);
            }
            Err(e) => {
                warn!("{}: {e}", entry.id);
                failures.push(Failure {
                    id: entry.id.clone(),
                    domain: entry.domain.clone(),
                    kind: e.failure_kind().to_string(),
                    message: e.to_string(),
                });
            }
        }
    }
    records.sort_by(|a, b| a.id.cmp(&b.id));
    failures.sort_by(|a, b| a.id.cmp(&b.id));
    info!(
        "{} models analyzed, {} failed",
        records.len(),
        failures.len()
    );
    let summary = aggregate(records, failures, &histograms)?;
    summary.write_to(out)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, text: &str) {
        let mut f = fs::File::create(dir.join(name)).unwrap();
        f.write_all(text.as_bytes()).unwrap();
    }

    #[test]
    fn format_detection() {
        assert_eq!(ModelFormat::from_path(Path::new("a/b.fm")), ModelFormat::Fm);
        assert_eq!(
            ModelFormat::from_path(Path::new("b.dimacs")),
            ModelFormat::Dimacs
        );
        assert_eq!("FM".parse::<ModelFormat>(), Ok(ModelFormat::Fm));
        assert!("xml".parse::<ModelFormat>().is_err());
    }

    #[test]
    fn implication_summary() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "imp.dimacs", "p cnf 2 1\n-1 2 0\n");
        let a = analyze_model(
            "imp",
            &dir.path().join("imp.dimacs"),
            ModelFormat::Dimacs,
            HubThreshold::default(),
            ExtractOptions::default(),
        )
        .unwrap();
        let s = a.summary();
        assert_eq!((s.num_arcs, s.num_edges), (1, 0));
        assert_eq!((s.core_pct, s.dead_pct), (0.0, 0.0));
        assert_eq!(s.max_in_degree.features, vec!["v2"]);
        a.write_to(&dir.path().join("out")).unwrap();
        for f in [
            "graphs.dot",
            "graphs.graphml",
            "graphs.json",
            "nodes.csv",
            "histograms.csv",
            "summary.json",
        ] {
            assert!(dir.path().join("out").join(f).is_file(), "{f}");
        }
    }

    #[test]
    fn error_exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "void.dimacs", "p cnf 1 2\n1 0\n-1 0\n");
        write(dir.path(), "bad.dimacs", "p cnf x\n");
        let run = |name: &str| {
            analyze_model(
                "m",
                &dir.path().join(name),
                ModelFormat::Dimacs,
                HubThreshold::default(),
                ExtractOptions::default(),
            )
            .unwrap_err()
        };
        let void = run("void.dimacs");
        assert_eq!(void.exit_code(), 3);
        assert!(void.to_string().contains("void model"));
        assert_eq!(run("bad.dimacs").exit_code(), 2);
        assert_eq!(run("missing.dimacs").exit_code(), 1);
    }

    #[test]
    fn manifest_validation() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.dimacs", "p cnf 1 0\n");
        let ok = "id,path,format,domain\na,a.dimacs,dimacs,os\n";
        assert_eq!(
            CorpusManifest::parse(ok, dir.path()).unwrap().entries.len(),
            1
        );
        let dup = "id,path,format,domain\na,a.dimacs,dimacs,os\na,a.dimacs,dimacs,os\n";
        assert!(CorpusManifest::parse(dup, dir.path())
            .unwrap_err()
            .contains("duplicate"));
        let missing = "id,path,format,domain\na,nope.dimacs,dimacs,os\n";
        assert!(CorpusManifest::parse(missing, dir.path()).is_err());
        assert!(CorpusManifest::parse("id,path,format,domain\n", dir.path()).is_err());
    }

    #[test]
    fn small_domain_has_no_rho_and_failures_are_counted() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a.dimacs", "p cnf 2 1\n-1 2 0\n");
        write(dir.path(), "b.dimacs", "p cnf 3 2\n1 0\n-2 3 0\n");
        write(dir.path(), "c.dimacs", "p cnf 3 1\n-1 0\n");
        write(dir.path(), "d.dimacs", "garbage\n");
        let manifest = "id,path,format,domain\n\
                        a,a.dimacs,dimacs,os\n\
                        b,b.dimacs,dimacs,os\n\
                        c,c.dimacs,dimacs,os\n\
                        d,d.dimacs,dimacs,os\n";
        let m = CorpusManifest::parse(manifest, dir.path()).unwrap();
        let out = dir.path().join("out");
        let s = analyze_corpus(&m, CorpusOptions::default(), &out).unwrap();
        assert_eq!(s.records.len(), 3);
        assert_eq!(s.failures.len(), 1);
        assert_eq!(s.failures[0].kind, "parse");
        let core = s
            .domain_stats
            .iter()
            .find(|d| d.metric == "core_pct")
            .unwrap();
        assert_eq!(core.n, 3);
        assert_eq!(core.rho, None);
        for f in [
            "corpus.csv",
            "domain_stats.csv",
            "tests.csv",
            "degree_medians.csv",
            "failures.csv",
        ] {
            assert!(out.join(f).is_file(), "{f}");
        }
        assert!(out.join("models/a/summary.json").is_file());
    }

    #[test]
    fn dead_exceeding_core_is_significant() {
        let record = |id: usize, core: f64, dead: f64| CorpusRecord {
            id: format!("m{id}"),
            domain: "A".into(),
            num_vars: 10 + id as u32,
            num_nodes: 1,
            num_arcs: 0,
            num_edges: 0,
            core_pct: core,
            dead_pct: dead,
            require_density_x: 0.0,
            exclude_density_x: 0.0,
            high_in_nodes: 0,
            high_out_given_high_in_pct: None,
            high_conflict_given_high_in_pct: None,
        };
        let records = (0..6).map(|i| record(i, 1.0, 2.0 + i as f64)).collect();
        let s = aggregate(records, vec![], &BTreeMap::new()).unwrap();
        let t = s.tests.iter().find(|t| t.test == "dead_gt_core").unwrap();
        assert!(t.significant);
        assert!((t.result.p_value - 1.0 / 64.0).abs() < 1e-12);
        let t = s.tests.iter().find(|t| t.test == "core_gt_dead").unwrap();
        assert!(!t.significant);
    }
}
