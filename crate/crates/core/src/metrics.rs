//! Degree-family network indicators for one model.
//!
//! Degree percentages are taken over the other configurable features
//! (`Nc - 1`). Densities are normalized by the formula's variable count,
//! core and dead variables included.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::Var;
use crate::strong::StrongGraphs;

pub const DEFAULT_THRESHOLD_PCT: f64 = 10.0;

#[derive(Debug, Error, PartialEq)]
#[error("threshold must be in (0, 100], got {0}")]
pub struct InvalidThreshold(pub f64);

/// Percentage at or above which a degree counts as high.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HubThreshold(f64);

impl HubThreshold {
    pub fn new(pct: f64) -> Result<HubThreshold, InvalidThreshold> {
        if pct > 0.0 && pct <= 100.0 {
            Ok(HubThreshold(pct))
        } else {
            Err(InvalidThreshold(pct))
        }
    }

    pub fn pct(self) -> f64 {
        self.0
    }

    /// `degree` is high among `others` other features.
    fn is_high(self, degree: usize, others: usize) -> bool {
        others > 0 && degree as f64 * 100.0 >= self.0 * others as f64
    }
}

impl Default for HubThreshold {
    fn default() -> Self {
        HubThreshold(DEFAULT_THRESHOLD_PCT)
    }
}

impl TryFrom<f64> for HubThreshold {
    type Error = InvalidThreshold;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        HubThreshold::new(value)
    }
}

impl From<HubThreshold> for f64 {
    fn from(t: HubThreshold) -> f64 {
        t.0
    }
}

impl fmt::Display for HubThreshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeMetrics {
    pub feature: Var,
    pub in_degree: usize,
    pub out_degree: usize,
    pub conflict_degree: usize,
    pub in_pct: f64,
    pub out_pct: f64,
    pub conflict_pct: f64,
    pub high_in: bool,
    pub high_out: bool,
    pub high_conflict: bool,
}

/// Conditional shares (in percent) among nodes with a high in-degree.
/// `None` when no node has a high in-degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HubOverlap {
    pub high_in_nodes: usize,
    pub high_out_given_high_in: Option<f64>,
    pub high_conflict_given_high_in: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
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
    pub nodes: Vec<NodeMetrics>,
    pub overlap: HubOverlap,
}

fn pct(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

/// Per-node degrees, percentages and hub flags, ordered by variable.
pub fn compute_node_metrics(graphs: &StrongGraphs, threshold: HubThreshold) -> Vec<NodeMetrics> {
    let mut in_deg: BTreeMap<Var, usize> = graphs.nodes.iter().map(|&v| (v, 0)).collect();
    let mut out_deg = in_deg.clone();
    let mut conflict_deg = in_deg.clone();
    for &(from, to) in &graphs.dep_arcs {
        *out_deg.entry(from).or_default() += 1;
        *in_deg.entry(to).or_default() += 1;
    }
    for &(a, b) in &graphs.conflict_edges {
        *conflict_deg.entry(a).or_default() += 1;
        *conflict_deg.entry(b).or_default() += 1;
    }
    let others = graphs.nodes.len().saturating_sub(1);
    graphs
        .nodes
        .iter()
        .map(|&v| {
            let (i, o, c) = (in_deg[&v], out_deg[&v], conflict_deg[&v]);
            NodeMetrics {
                feature: v,
                in_degree: i,
                out_degree: o,
                conflict_degree: c,
                in_pct: pct(i, others),
                out_pct: pct(o, others),
                conflict_pct: pct(c, others),
                high_in: threshold.is_high(i, others),
                high_out: threshold.is_high(o, others),
                high_conflict: threshold.is_high(c, others),
            }
        })
        .collect()
}

pub fn compute_model_metrics(
    model_id: &str,
    graphs: &StrongGraphs,
    threshold: HubThreshold,
) -> ModelMetrics {
    let nodes = compute_node_metrics(graphs, threshold);
    let num_vars = graphs.classification.num_vars;
    let n = num_vars as usize;
    let density = |count: usize| if n == 0 { 0.0 } else { count as f64 / n as f64 };

    let high_in: Vec<&NodeMetrics> = nodes.iter().filter(|m| m.high_in).collect();
    let share = |pred: fn(&NodeMetrics) -> bool| {
        (!high_in.is_empty())
            .then(|| pct(high_in.iter().filter(|m| pred(m)).count(), high_in.len()))
    };
    let overlap = HubOverlap {
        high_in_nodes: high_in.len(),
        high_out_given_high_in: share(|m| m.high_out),
        high_conflict_given_high_in: share(|m| m.high_conflict),
    };

    ModelMetrics {
        model_id: model_id.to_string(),
        num_vars,
        num_nodes: graphs.nodes.len(),
        num_arcs: graphs.dep_arcs.len(),
        num_edges: graphs.conflict_edges.len(),
        core_pct: pct(graphs.classification.core.len(), n),
        dead_pct: pct(graphs.classification.dead.len(), n),
        require_density: density(graphs.dep_arcs.len()),
        exclude_density: density(graphs.conflict_edges.len()),
        threshold_pct: threshold,
        nodes,
        overlap,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DegreeAxis {
    In,
    Out,
    Conflict,
}

impl DegreeAxis {
    pub const ALL: [DegreeAxis; 3] = [DegreeAxis::In, DegreeAxis::Out, DegreeAxis::Conflict];

    pub fn pct_of(self, m: &NodeMetrics) -> f64 {
        match self {
            DegreeAxis::In => m.in_pct,
            DegreeAxis::Out => m.out_pct,
            DegreeAxis::Conflict => m.conflict_pct,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DegreeAxis::In => "in",
            DegreeAxis::Out => "out",
            DegreeAxis::Conflict => "conflict",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    /// Fraction of nodes in the bin, in [0, 1].
    pub share: f64,
}

#[derive(Debug, Error, PartialEq)]
#[error("bin width must be positive, got {0}")]
pub struct InvalidBinWidth(pub f64);

/// Histogram of degree percentages with bins `[k·w, (k+1)·w)`; the last bin
/// is closed at 100. Every bin is listed, empty ones with share 0.
pub fn degree_distribution(
    metrics: &[NodeMetrics],
    axis: DegreeAxis,
    bin_width_pct: f64,
) -> Result<Vec<HistogramBin>, InvalidBinWidth> {
    if !(bin_width_pct > 0.0 && bin_width_pct.is_finite()) {
        return Err(InvalidBinWidth(bin_width_pct));
    }
    let bins = (100.0 / bin_width_pct).ceil().max(1.0) as usize;
    let mut counts = vec![0usize; bins];
    for m in metrics {
        let k = ((axis.pct_of(m) / bin_width_pct).floor() as usize).min(bins - 1);
        counts[k] += 1;
    }
    let total = metrics.len();
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistogramBin {
            lower: k as f64 * bin_width_pct,
            upper: ((k + 1) as f64 * bin_width_pct).min(100.0),
            share: if total == 0 {
                0.0
            } else {
                count as f64 / total as f64
            },
        })
        .collect())
}
