//! Serialization of strong graphs to DOT, GraphML and a reloadable JSON form.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::Var;
use crate::strong::{FeatureClassification, StrongGraphs};

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("unknown graph format `{0}` (expected dot, graphml or json)")]
    UnknownFormat(String),
    #[error("invalid graph document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid graph document: {0}")]
    Document(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GraphFormat {
    Dot,
    GraphMl,
    Json,
}

impl GraphFormat {
    pub const ALL: [GraphFormat; 3] = [GraphFormat::Dot, GraphFormat::GraphMl, GraphFormat::Json];

    pub fn extension(self) -> &'static str {
        match self {
            GraphFormat::Dot => "dot",
            GraphFormat::GraphMl => "graphml",
            GraphFormat::Json => "json",
        }
    }
}

impl FromStr for GraphFormat {
    type Err = ExportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dot" => Ok(GraphFormat::Dot),
            "graphml" => Ok(GraphFormat::GraphMl),
            "json" => Ok(GraphFormat::Json),
            _ => Err(ExportError::UnknownFormat(s.to_string())),
        }
    }
}

impl fmt::Display for GraphFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

pub fn export_graph(graphs: &StrongGraphs, format: GraphFormat) -> String {
    match format {
        GraphFormat::Dot => to_dot(graphs),
        GraphFormat::GraphMl => to_graphml(graphs),
        GraphFormat::Json => to_json(graphs),
    }
}

const DOT_KEYWORDS: [&str; 6] = ["node", "edge", "graph", "digraph", "subgraph", "strict"];

fn dot_id(name: &str) -> String {
    let plain = name
        .chars()
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !DOT_KEYWORDS.iter().any(|k| k.eq_ignore_ascii_case(name));
    if plain {
        name.to_string()
    } else {
        let escaped = name.replace('\\', "\\\\").replace('"', "\\\"");
        format!("\"{escaped}\"")
    }
}

/// Dependency arcs as `a -> b`, conflicts as undirected dashed links.
pub fn to_dot(graphs: &StrongGraphs) -> String {
    let mut out = String::from("digraph strong {\n");
    for &v in &graphs.nodes {
        let _ = writeln!(out, "  {};", dot_id(&graphs.display_name(v)));
    }
    for &(a, b) in &graphs.dep_arcs {
        let _ = writeln!(
            out,
            "  {} -> {} [relation=requires];",
            dot_id(&graphs.display_name(a)),
            dot_id(&graphs.display_name(b))
        );
    }
    for &(a, b) in &graphs.conflict_edges {
        let _ = writeln!(
            out,
            "  {} -> {} [dir=none, relation=excludes, style=dashed];",
            dot_id(&graphs.display_name(a)),
            dot_id(&graphs.display_name(b))
        );
    }
    out.push_str("}\n");
    out
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Conflict edges are stored once, distinguished by `relation=excludes`;
/// common GraphML readers reject graphs that mix edge directions.
pub fn to_graphml(graphs: &StrongGraphs) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    out.push_str("  <key id=\"label\" for=\"node\" attr.name=\"label\" attr.type=\"string\"/>\n");
    out.push_str(
        "  <key id=\"relation\" for=\"edge\" attr.name=\"relation\" attr.type=\"string\"/>\n",
    );
    out.push_str("  <graph id=\"strong\" edgedefault=\"directed\">\n");
    for &v in &graphs.nodes {
        let _ = writeln!(
            out,
            "    <node id=\"n{}\"><data key=\"label\">{}</data></node>",
            v.index(),
            xml_escape(&graphs.display_name(v))
        );
    }
    let mut id = 0;
    for &(a, b) in &graphs.dep_arcs {
        let _ = writeln!(
            out,
            "    <edge id=\"e{id}\" source=\"n{}\" target=\"n{}\"><data key=\"relation\">requires</data></edge>",
            a.index(),
            b.index()
        );
        id += 1;
    }
    for &(a, b) in &graphs.conflict_edges {
        let _ = writeln!(
            out,
            "    <edge id=\"e{id}\" source=\"n{}\" target=\"n{}\"><data key=\"relation\">excludes</data></edge>",
            a.index(),
            b.index()
        );
        id += 1;
    }
    out.push_str("  </graph>\n</graphml>\n");
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureStatus {
    Core,
    Dead,
    Configurable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureEntry {
    pub id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub status: FeatureStatus,
}

/// JSON form of [`StrongGraphs`]; [`GraphDocument::into_graphs`] restores it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub num_vars: u32,
    pub features: Vec<FeatureEntry>,
    pub requires: Vec<(String, String)>,
    pub excludes: Vec<(String, String)>,
}

impl GraphDocument {
    pub fn from_graphs(graphs: &StrongGraphs) -> GraphDocument {
        let class = &graphs.classification;
        let features = (1..=class.num_vars)
            .map(Var::new)
            .map(|v| FeatureEntry {
                id: v.index(),
                name: graphs.names.get(&v).cloned(),
                status: if class.core.contains(&v) {
                    FeatureStatus::Core
                } else if class.dead.contains(&v) {
                    FeatureStatus::Dead
                } else {
                    FeatureStatus::Configurable
                },
            })
            .collect();
        let pair = |&(a, b): &(Var, Var)| {
            (
                graphs.display_name(a).into_owned(),
                graphs.display_name(b).into_owned(),
            )
        };
        GraphDocument {
            num_vars: class.num_vars,
            features,
            requires: graphs.dep_arcs.iter().map(pair).collect(),
            excludes: graphs.conflict_edges.iter().map(pair).collect(),
        }
    }

    pub fn into_graphs(self) -> Result<StrongGraphs, ExportError> {
        let mut class = FeatureClassification {
            num_vars: self.num_vars,
            ..FeatureClassification::default()
        };
        let mut names = BTreeMap::new();
        let mut lookup: BTreeMap<String, Var> = BTreeMap::new();
        let mut seen = BTreeSet::new();
        for entry in &self.features {
            if entry.id == 0 || entry.id > self.num_vars || !seen.insert(entry.id) {
                return Err(ExportError::Document(format!(
                    "bad feature id {}",
                    entry.id
                )));
            }
            let v = Var::new(entry.id);
            match entry.status {
                FeatureStatus::Core => class.core.insert(v),
                FeatureStatus::Dead => class.dead.insert(v),
                FeatureStatus::Configurable => class.configurable.insert(v),
            };
            let label = match &entry.name {
                Some(name) => {
                    names.insert(v, name.clone());
                    name.clone()
                }
                None => format!("v{}", v.index()),
            };
            lookup.insert(label, v);
        }
        if seen.len() != self.num_vars as usize {
            return Err(ExportError::Document("feature list is incomplete".into()));
        }
        let resolve = |name: &str| {
            lookup
                .get(name)
                .copied()
                .ok_or_else(|| ExportError::Document(format!("unknown feature `{name}`")))
        };
        let mut graphs = StrongGraphs {
            nodes: class.configurable.clone(),
            classification: class,
            names,
            ..StrongGraphs::default()
        };
        for (a, b) in &self.requires {
            graphs.dep_arcs.insert((resolve(a)?, resolve(b)?));
        }
        for (a, b) in &self.excludes {
            let (a, b) = (resolve(a)?, resolve(b)?);
            graphs.conflict_edges.insert((a.min(b), a.max(b)));
        }
        Ok(graphs)
    }
}

pub fn to_json(graphs: &StrongGraphs) -> String {
    let mut s = serde_json::to_string_pretty(&GraphDocument::from_graphs(graphs))
        .expect("graph document serializes");
    s.push('\n');
    s
}

pub fn graphs_from_json(text: &str) -> Result<StrongGraphs, ExportError> {
    serde_json::from_str::<GraphDocument>(text)?.into_graphs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::COREBOOT_FM;
    use crate::fm::parse_fm_to_cnf;
    use crate::formula::parse_dimacs;
    use crate::strong::{analyze_formula, ExtractOptions};

    fn analyze(text: &str) -> StrongGraphs {
        analyze_formula(&parse_dimacs(text).unwrap(), ExtractOptions::default()).unwrap()
    }

    fn coreboot() -> StrongGraphs {
        analyze_formula(
            &parse_fm_to_cnf(COREBOOT_FM).unwrap(),
            ExtractOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn one_arc_dot() {
        let g = analyze("c 1 f\nc 2 g\np cnf 2 1\n-1 2 0\n");
        let dot = to_dot(&g);
        assert!(dot.starts_with("digraph"));
        assert!(dot.contains("f -> g [relation=requires];"));
    }

    #[test]
    fn conflict_rendered_once() {
        let g = analyze("c 1 f\nc 2 g\np cnf 2 1\n-1 -2 0\n");
        let dot = to_dot(&g);
        assert_eq!(dot.matches("relation=excludes").count(), 1);
        assert!(dot.contains("f -> g [dir=none, relation=excludes, style=dashed];"));
    }

    #[test]
    fn dot_quoting() {
        assert_eq!(dot_id("A_1"), "A_1");
        assert_eq!(dot_id("node"), "\"node\"");
        assert_eq!(dot_id("a.b"), "\"a.b\"");
        assert_eq!(dot_id("1x"), "\"1x\"");
        assert_eq!(dot_id("q\"x"), "\"q\\\"x\"");
    }

    #[test]
    fn unknown_format() {
        assert!(matches!(
            "svg".parse::<GraphFormat>(),
            Err(ExportError::UnknownFormat(_))
        ));
        assert_eq!(
            "GraphML".parse::<GraphFormat>().unwrap(),
            GraphFormat::GraphMl
        );
    }

    #[test]
    fn json_round_trip() {
        let g = coreboot();
        let back = graphs_from_json(&to_json(&g)).unwrap();
        assert_eq!(back, g);
        let g = analyze("p cnf 3 2\n-1 2 0\n-2 -3 0\n");
        assert_eq!(graphs_from_json(&to_json(&g)).unwrap(), g);
    }

    #[test]
    fn output_is_deterministic() {
        for format in GraphFormat::ALL {
            assert_eq!(
                export_graph(&coreboot(), format),
                export_graph(&coreboot(), format)
            );
        }
    }

    #[test]
    fn graphml_escapes_labels() {
        let g = analyze("c 1 a<b\nc 2 c&d\np cnf 2 1\n-1 2 0\n");
        let xml = to_graphml(&g);
        assert!(xml.contains("a&lt;b") && xml.contains("c&amp;d"));
    }
}
