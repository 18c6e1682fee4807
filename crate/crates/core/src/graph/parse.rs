//! Graph input formats: a JSON document and whitespace-separated edge lists.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{AffinityError, Result};

/// A parsed graph plus the original node labels when the input used
/// non-integer ids.
#[derive(Debug, Clone)]
pub struct ParsedGraph {
    pub graph: Graph,
    /// `labels[i]` is the input token remapped to node `i`.
    pub labels: Option<Vec<String>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum EdgeEntry {
    Weighted(usize, usize, f64),
    Unit(usize, usize),
}

#[derive(Deserialize)]
struct GraphDoc {
    num_nodes: usize,
    edges: Vec<EdgeEntry>,
}

#[derive(Serialize)]
struct GraphDocOut {
    num_nodes: usize,
    edges: Vec<(usize, usize, f64)>,
}

/// Parses `{"num_nodes": n, "edges": [[u, v, w], ...]}`; `w` defaults to 1.
pub fn parse_json(text: &str) -> Result<Graph> {
    let doc: GraphDoc =
        serde_json::from_str(text).map_err(|e| AffinityError::Parse { line: e.line(), msg: e.to_string() })?;
    let edges: Vec<_> = doc
        .edges
        .into_iter()
        .map(|e| match e {
            EdgeEntry::Weighted(u, v, w) => (u, v, w),
            EdgeEntry::Unit(u, v) => (u, v, 1.0),
        })
        .collect();
    Graph::new(doc.num_nodes, &edges)
}

/// Serializes a graph to the JSON input format.
pub fn to_json(g: &Graph) -> String {
    let doc = GraphDocOut { num_nodes: g.num_nodes(), edges: g.edge_triples() };
    serde_json::to_string(&doc).expect("graph serialization cannot fail")
}

/// Parses lines of `u v [w]`. Blank lines and lines starting with `#` or `%`
/// are skipped.
///
/// If every id is a non-negative integer the node count is `max id + 1`.
/// Otherwise all tokens are remapped to dense ids in first-seen order and
/// the mapping is returned in [`ParsedGraph::labels`].
pub fn parse_edge_list(text: &str) -> Result<ParsedGraph> {
    let mut raw: Vec<(usize, &str, &str, f64)> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('%') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < 2 || toks.len() > 3 {
            return Err(AffinityError::Parse {
                line: lineno,
                msg: format!("expected `u v [w]`, found {} fields", toks.len()),
            });
        }
        let w = match toks.get(2) {
            Some(t) => t
                .parse::<f64>()
                .map_err(|_| AffinityError::Parse { line: lineno, msg: format!("invalid weight `{t}`") })?,
            None => 1.0,
        };
        if !w.is_finite() || w <= 0.0 {
            return Err(AffinityError::Parse { line: lineno, msg: format!("non-positive or non-finite weight {w}") });
        }
        if toks[0] == toks[1] {
            return Err(AffinityError::Parse { line: lineno, msg: format!("self-loop on `{}`", toks[0]) });
        }
        raw.push((lineno, toks[0], toks[1], w));
    }

    let numeric: Option<Vec<(usize, usize, f64)>> =
        raw.iter().map(|&(_, a, b, w)| Some((a.parse::<usize>().ok()?, b.parse::<usize>().ok()?, w))).collect();

    if let Some(edges) = numeric {
        let n = edges.iter().map(|&(u, v, _)| u.max(v) + 1).max().unwrap_or(0);
        // ids like "01" and "1" parse equal; reject the resulting self-loop by line
        for (&(lineno, ..), &(u, v, _)) in raw.iter().zip(&edges) {
            if u == v {
                return Err(AffinityError::Parse { line: lineno, msg: format!("self-loop on {u}") });
            }
        }
        let graph = Graph::new(n, &edges)?;
        return Ok(ParsedGraph { graph, labels: None });
    }

    fn intern<'a>(ids: &mut HashMap<&'a str, usize>, labels: &mut Vec<String>, tok: &'a str) -> usize {
        *ids.entry(tok).or_insert_with(|| {
            labels.push(tok.to_string());
            labels.len() - 1
        })
    }
    let mut ids: HashMap<&str, usize> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    let mut edges = Vec::with_capacity(raw.len());
    for &(_, a, b, w) in &raw {
        let u = intern(&mut ids, &mut labels, a);
        let v = intern(&mut ids, &mut labels, b);
        edges.push((u, v, w));
    }
    let graph = Graph::new(labels.len(), &edges)?;
    Ok(ParsedGraph { graph, labels: Some(labels) })
}

/// Reads a graph from disk; JSON when the content starts with `{`,
/// edge list otherwise.
pub fn parse_graph_file(path: &Path) -> Result<ParsedGraph> {
    let text = std::fs::read_to_string(path)?;
    if text.trim_start().starts_with('{') {
        Ok(ParsedGraph { graph: parse_json(&text)?, labels: None })
    } else {
        parse_edge_list(&text)
    }
}
