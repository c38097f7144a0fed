//! Directed topologies: thresholding, scoring against ground truth, and
//! JSON/DOT output.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netsim::NetworkSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

/// Directed graph over named nodes; edges are kept sorted by `(from, to)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TopologyJson", into = "TopologyJson")]
pub struct Topology {
    node_ids: Vec<String>,
    edges: Vec<Edge>,
    residuals: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TopologyJson {
    n: usize,
    node_ids: Vec<String>,
    edges: Vec<Edge>,
    residuals: Vec<f64>,
}

impl TryFrom<TopologyJson> for Topology {
    type Error = Error;

    fn try_from(raw: TopologyJson) -> Result<Self> {
        if raw.n != raw.node_ids.len() {
            return Err(Error::Dimension(format!("n = {} but {} node ids", raw.n, raw.node_ids.len())));
        }
        Topology::new(raw.node_ids, raw.edges, raw.residuals)
    }
}

impl From<Topology> for TopologyJson {
    fn from(t: Topology) -> Self {
        TopologyJson {
            n: t.node_ids.len(),
            node_ids: t.node_ids,
            edges: t.edges,
            residuals: t.residuals,
        }
    }
}

/// `x1, x2, …, xn`.
pub fn default_node_ids(n: usize) -> Vec<String> {
    (1..=n).map(|k| format!("x{k}")).collect()
}

impl Topology {
    /// `residuals` may be empty (ground truth) or hold one value per node.
    pub fn new(node_ids: Vec<String>, mut edges: Vec<Edge>, residuals: Vec<f64>) -> Result<Self> {
        let n = node_ids.len();
        if !residuals.is_empty() && residuals.len() != n {
            return Err(Error::Dimension(format!("{} residuals for {n} nodes", residuals.len())));
        }
        for e in &edges {
            if e.from >= n || e.to >= n {
                return Err(Error::Index {
                    index: e.from.max(e.to),
                    len: n,
                });
            }
            if e.from == e.to {
                return Err(Error::Config(format!("self-edge on node {}", e.from)));
            }
            if !(e.weight >= 0.0) {
                return Err(Error::Config(format!("edge {} -> {} has weight {}", e.from, e.to, e.weight)));
            }
        }
        edges.sort_by_key(|e| (e.from, e.to));
        if let Some(w) = edges.windows(2).find(|w| (w[0].from, w[0].to) == (w[1].from, w[1].to)) {
            return Err(Error::Config(format!("duplicate edge {} -> {}", w[0].from, w[0].to)));
        }
        Ok(Self {
            node_ids,
            edges,
            residuals,
        })
    }

    /// Ground-truth topology of a network; edge weight is the filter's
    /// sum of squared taps.
    pub fn from_spec(spec: &NetworkSpec, node_ids: Vec<String>) -> Result<Self> {
        if node_ids.len() != spec.n() {
            return Err(Error::Dimension(format!("{} node ids for a {}-node spec", node_ids.len(), spec.n())));
        }
        let edges = spec
            .edges()
            .iter()
            .map(|e| Edge {
                from: e.from,
                to: e.to,
                weight: e.taps.iter().map(|h| h * h).sum(),
            })
            .collect();
        Self::new(node_ids, edges, Vec::new())
    }

    pub fn n(&self) -> usize {
        self.node_ids.len()
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn in_degree(&self, node: usize) -> usize {
        self.edges.iter().filter(|e| e.to == node).count()
    }

    pub fn edge_set(&self) -> BTreeSet<(usize, usize)> {
        self.edges.iter().map(|e| (e.from, e.to)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Graphviz text: node statements in index order, then edges by
    /// `(from, to)` with the weight as label.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph topology {\n");
        for id in &self.node_ids {
            let _ = writeln!(out, "  \"{}\";", escape(id));
        }
        for e in &self.edges {
            let _ = writeln!(
                out,
                "  \"{}\" -> \"{}\" [label=\"{:.6e}\"];",
                escape(&self.node_ids[e.from]),
                escape(&self.node_ids[e.to]),
                e.weight
            );
        }
        out.push_str("}\n");
        out
    }
}

fn escape(id: &str) -> String {
    id.replace('\\', "\\\\").replace('"', "\\\"")
}

pub fn export_dot(topology: &Topology, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, topology.to_dot()).map_err(|e| Error::io(path, e))
}

/// Drops edges lighter than `delta_rel` times the heaviest edge.
pub fn threshold_edges(topology: &Topology, delta_rel: f64) -> Result<Topology> {
    if !(0.0..1.0).contains(&delta_rel) {
        return Err(Error::Config(format!("threshold must lie in [0, 1), got {delta_rel}")));
    }
    let max = topology.edges.iter().map(|e| e.weight).fold(0.0, f64::max);
    let cut = delta_rel * max;
    Ok(Topology {
        node_ids: topology.node_ids.clone(),
        edges: topology.edges.iter().filter(|e| e.weight >= cut).copied().collect(),
        residuals: topology.residuals.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// 1 when nothing was predicted.
    pub precision: f64,
    /// 1 when the truth has no edges.
    pub recall: f64,
    pub f1: f64,
}

/// Scores `estimated` against `truth` on exact directed pairs.
pub fn compare(truth: &Topology, estimated: &Topology) -> Result<ComparisonReport> {
    if truth.node_ids != estimated.node_ids {
        return Err(Error::Dimension(format!(
            "node sets differ: truth has {} nodes, estimate has {} (or ids differ)",
            truth.n(),
            estimated.n()
        )));
    }
    let t = truth.edge_set();
    let e = estimated.edge_set();
    let tp = t.intersection(&e).count();
    let fp = e.len() - tp;
    let fn_ = t.len() - tp;
    let precision = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 1.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(ComparisonReport {
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        precision,
        recall,
        f1,
    })
}
