//! Utility-scored node retention with connectivity-preserving deletion.

use std::collections::{BTreeMap, BTreeSet};

use petgraph::algo::astar;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_build::SegmentGraph;
use crate::hierarchy::{default_summary_w, summarize_segment, LayeredGraph};
use crate::types::{cosine_unchecked, EdgeKind, Embedding, EventNode, NodeId, Tick, TypedEdge};

/// Additive guard in the per-hop path cost denominator.
pub const PATH_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityBreakdown {
    pub node_id: NodeId,
    pub uniqueness: f64,
    pub future: f64,
    pub cost: f64,
    pub utility: f64,
}

/// Estimates how likely a node is to be referenced again, in [0, 1].
pub trait FutureEstimator: Send + Sync {
    fn name(&self) -> &str;
    fn estimate(&self, node: &EventNode, graph: &SegmentGraph, now: Tick) -> f64;
}

/// Relative access frequency (add-one smoothed) times exponential recency.
pub struct FrequencyRecency {
    pub gamma: f64,
}

impl FutureEstimator for FrequencyRecency {
    fn name(&self) -> &str {
        "frequency-recency"
    }

    fn estimate(&self, node: &EventNode, graph: &SegmentGraph, now: Tick) -> f64 {
        let max_access = graph.nodes.values().map(|n| n.access_count).max().unwrap_or(0);
        let freq = (node.access_count + 1) as f64 / (max_access + 1) as f64;
        let age = now.saturating_sub(node.last_updated) as f64;
        (freq * (-self.gamma * age).exp()).clamp(0.0, 1.0)
    }
}

/// Pairwise compatibility multiplying each hop cost.
pub trait Compatibility: Send + Sync {
    fn name(&self) -> &str;
    fn omega(&self, from: &EventNode, to: &EventNode) -> f64;
}

pub struct UnitCompatibility;

impl Compatibility for UnitCompatibility {
    fn name(&self) -> &str {
        "unit"
    }

    fn omega(&self, _: &EventNode, _: &EventNode) -> f64 {
        1.0
    }
}

pub fn utility(
    node_id: NodeId,
    graph: &SegmentGraph,
    now: Tick,
    lambda: [f64; 3],
    future: &dyn FutureEstimator,
) -> Result<UtilityBreakdown> {
    let node = graph.node(node_id)?;
    let max_sim = graph
        .nodes
        .values()
        .filter(|n| n.node_id != node_id)
        .map(|n| cosine_unchecked(&node.centroid, &n.centroid))
        .fold(None, |acc: Option<f64>, s| Some(acc.map_or(s, |a| a.max(s))));
    let uniqueness = max_sim.map_or(1.0, |s| 1.0 - s);
    let f = future.estimate(node, graph, now);
    let degree = graph
        .edges
        .iter()
        .filter(|e| e.src == node_id || e.dst == node_id)
        .count();
    let cost = degree as f64 / graph.edges.len().max(1) as f64;
    Ok(UtilityBreakdown {
        node_id,
        uniqueness,
        future: f,
        cost,
        utility: lambda[0] * uniqueness + lambda[1] * f - lambda[2] * cost,
    })
}

/// Per-hop cost: compatibility over (clamped cosine + epsilon).
pub fn hop_cost(from: &EventNode, to: &EventNode, compat: &dyn Compatibility) -> f64 {
    let sim = cosine_unchecked(&from.centroid, &to.centroid).max(0.0);
    compat.omega(from, to) / (sim + PATH_EPSILON)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityPath {
    pub nodes: Vec<NodeId>,
    pub cost: f64,
}

/// Cheapest directed path over existing edges, or `None` if unreachable.
pub fn connectivity_path(
    graph: &SegmentGraph,
    src: NodeId,
    dst: NodeId,
    compat: &dyn Compatibility,
) -> Result<Option<ConnectivityPath>> {
    graph.node(src)?;
    graph.node(dst)?;
    if src == dst {
        return Err(Error::invalid("path endpoints must differ"));
    }
    let mut pg: DiGraph<NodeId, f64> = DiGraph::new();
    let index: BTreeMap<NodeId, NodeIndex> =
        graph.nodes.keys().map(|id| (*id, pg.add_node(*id))).collect();
    for e in &graph.edges {
        let cost = hop_cost(&graph.nodes[&e.src], &graph.nodes[&e.dst], compat);
        pg.add_edge(index[&e.src], index[&e.dst], cost);
    }
    let goal = index[&dst];
    Ok(
        astar(&pg, index[&src], |n| n == goal, |e| *e.weight(), |_| 0.0).map(
            |(cost, path)| ConnectivityPath {
                nodes: path.into_iter().map(|i| pg[i]).collect(),
                cost,
            },
        ),
    )
}

/// Removes lowest-utility nodes (ties: lowest id) until at most `budget`
/// remain. Before each removal every predecessor/successor pair bridged by
/// the node is checked; a Sequential bypass edge is added where no path
/// would survive. Returns removed ids in removal order.
pub fn prune(
    graph: &mut SegmentGraph,
    lambda: [f64; 3],
    budget: usize,
    now: Tick,
    future: &dyn FutureEstimator,
    compat: &dyn Compatibility,
) -> Result<Vec<NodeId>> {
    if budget < 1 {
        return Err(Error::invalid("prune budget must be >= 1"));
    }
    let mut removed = Vec::new();
    while graph.nodes.len() > budget {
        let mut victim: Option<(NodeId, f64)> = None;
        for id in graph.nodes.keys() {
            let u = utility(*id, graph, now, lambda, future)?.utility;
            if victim.is_none_or(|(_, best)| u < best) {
                victim = Some((*id, u));
            }
        }
        let (id, _) = victim.expect("graph is non-empty");
        let preds: BTreeSet<NodeId> = graph.edges.iter().filter(|e| e.dst == id).map(|e| e.src).collect();
        let succs: BTreeSet<NodeId> = graph.edges.iter().filter(|e| e.src == id).map(|e| e.dst).collect();
        graph.remove_node(id);
        for p in &preds {
            for s in &succs {
                if p != s && connectivity_path(graph, *p, *s, compat)?.is_none() {
                    graph.add_edge(TypedEdge::new(*p, *s, EdgeKind::Sequential, 1.0)?);
                }
            }
        }
        removed.push(id);
    }
    Ok(removed)
}

/// Prunes every segment of a folded memory to `budget`, dropping interlayer
/// edges that touched removed nodes and re-summarizing changed segments.
pub fn prune_memory(
    lg: &mut LayeredGraph,
    lambda: [f64; 3],
    budget: usize,
    summary_w: Option<&Embedding>,
    future: &dyn FutureEstimator,
    compat: &dyn Compatibility,
) -> Result<Vec<NodeId>> {
    let now = lg.latest_time().unwrap_or(0);
    let mut all_removed = Vec::new();
    for (seg, summary) in lg.segments.iter_mut().zip(lg.summaries.iter_mut()) {
        let removed = prune(seg, lambda, budget, now, future, compat)?;
        if removed.is_empty() {
            continue;
        }
        let w = match summary_w {
            Some(w) => w.clone(),
            None => default_summary_w(seg)?,
        };
        *summary = summarize_segment(seg, &w)?;
        all_removed.extend(removed);
    }
    let gone: BTreeSet<NodeId> = all_removed.iter().copied().collect();
    lg.interlayer
        .retain(|e| !gone.contains(&e.src) && !gone.contains(&e.dst));
    Ok(all_removed)
}
