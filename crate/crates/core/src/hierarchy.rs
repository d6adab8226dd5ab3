//! Hierarchical memory: closed segment graphs, their attention summaries,
//! and interlayer edges marking significant updates between consecutive
//! segments.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_build::SegmentGraph;
use crate::types::{
    cosine_unchecked, softmax, EdgeKind, Embedding, EventNode, NodeId, Tick, TypedEdge,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryNode {
    pub summary_id: u64,
    pub layer: u32,
    pub source_graph: u64,
    pub embedding: Embedding,
    pub attention: BTreeMap<NodeId, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LayeredGraph {
    pub segments: Vec<SegmentGraph>,
    pub summaries: Vec<SummaryNode>,
    pub interlayer: Vec<TypedEdge>,
}

/// Optional pre-adjustment of the two embeddings compared for an update
/// (entity tracking, speaker features and the like).
pub trait UpdateAdjuster: Send + Sync {
    fn name(&self) -> &str;
    fn adjust(&self, prev: &Embedding, next: &Embedding) -> (Embedding, Embedding);
}

pub struct IdentityAdjuster;

impl UpdateAdjuster for IdentityAdjuster {
    fn name(&self) -> &str {
        "identity"
    }

    fn adjust(&self, prev: &Embedding, next: &Embedding) -> (Embedding, Embedding) {
        (prev.clone(), next.clone())
    }
}

/// Normalized mean of the segment centroids.
pub fn default_summary_w(g: &SegmentGraph) -> Result<Embedding> {
    Embedding::mean(g.nodes.values().map(|n| &n.centroid))
}

pub fn summarize_segment(g: &SegmentGraph, w: &Embedding) -> Result<SummaryNode> {
    if g.is_empty() {
        return Err(Error::invalid("cannot summarize an empty segment"));
    }
    let nodes: Vec<&EventNode> = g.nodes.values().collect();
    if nodes[0].centroid.dim() != w.dim() {
        return Err(Error::invalid("attention vector dimension mismatch"));
    }
    let logits: Vec<f64> = nodes.iter().map(|n| w.dot(&n.centroid)).collect();
    let alpha = softmax(&logits, 1.0);
    let mut acc = vec![0.0; w.dim()];
    for (a, n) in alpha.iter().zip(&nodes) {
        for (x, v) in acc.iter_mut().zip(n.centroid.as_slice()) {
            *x += a * v;
        }
    }
    Ok(SummaryNode {
        summary_id: g.graph_id,
        layer: 1,
        source_graph: g.graph_id,
        embedding: Embedding::new(acc)?,
        attention: nodes.iter().map(|n| n.node_id).zip(alpha).collect(),
    })
}

/// True when the (adjusted) embeddings fall strictly below `beta`.
pub fn detect_update(
    prev: &Embedding,
    next: &Embedding,
    beta: f64,
    adjuster: &dyn UpdateAdjuster,
) -> bool {
    let (p, n) = adjuster.adjust(prev, next);
    cosine_unchecked(&p, &n) < beta
}

/// Clamped cosines to the target, normalized to sum to one; uniform when
/// every clamped cosine is zero.
pub fn interlayer_weights(
    sources: &[&EventNode],
    target: &EventNode,
) -> Result<BTreeMap<NodeId, f64>> {
    if sources.is_empty() {
        return Err(Error::invalid("interlayer weights need at least one source"));
    }
    let sims: Vec<f64> = sources
        .iter()
        .map(|s| cosine_unchecked(&s.centroid, &target.centroid).max(0.0))
        .collect();
    let total: f64 = sims.iter().sum();
    let uniform = 1.0 / sources.len() as f64;
    Ok(sources
        .iter()
        .zip(sims)
        .map(|(s, sim)| {
            let w = if total > 0.0 { sim / total } else { uniform };
            (s.node_id, w)
        })
        .collect())
}

impl LayeredGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a closed segment, its summary, and interlayer edges into
    /// every node that differs significantly from its best match in the
    /// previous segment. Earlier segments are left untouched.
    pub fn fold_segment(
        &mut self,
        g: SegmentGraph,
        w: Option<&Embedding>,
        beta: f64,
        adjuster: &dyn UpdateAdjuster,
    ) -> Result<()> {
        let w = match w {
            Some(w) => w.clone(),
            None => default_summary_w(&g)?,
        };
        let summary = summarize_segment(&g, &w)?;

        let mut new_edges = Vec::new();
        if let Some(prev) = self.segments.last() {
            let sources: Vec<&EventNode> = prev.nodes.values().collect();
            for node in g.nodes.values() {
                let best = best_match(&sources, &node.centroid);
                if !detect_update(&best.centroid, &node.centroid, beta, adjuster) {
                    continue;
                }
                for (src, weight) in interlayer_weights(&sources, node)? {
                    new_edges.push(TypedEdge::new(
                        src,
                        node.node_id,
                        EdgeKind::Interlayer,
                        weight.clamp(0.0, 1.0),
                    )?);
                }
            }
        }
        self.segments.push(g);
        self.summaries.push(summary);
        self.interlayer.extend(new_edges);
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.segments.iter().map(|s| s.nodes.len()).sum()
    }

    pub fn edge_count(&self) -> usize {
        self.segments.iter().map(|s| s.edges.len()).sum()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &EventNode> {
        self.segments.iter().flat_map(|s| s.nodes.values())
    }

    /// Segment index holding `id`.
    pub fn segment_of(&self, id: NodeId) -> Option<usize> {
        self.segments.iter().position(|s| s.nodes.contains_key(&id))
    }

    pub fn node(&self, id: NodeId) -> Option<&EventNode> {
        self.segments.iter().find_map(|s| s.nodes.get(&id))
    }

    /// Latest time touched by any node.
    pub fn latest_time(&self) -> Option<Tick> {
        self.nodes().map(|n| n.last_updated).max()
    }

    pub fn next_node_id(&self) -> u64 {
        self.segments.last().map_or(0, |s| s.next_node_id)
    }

    /// Checks the structural invariants; used by tests and snapshot loading.
    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.segments.iter().enumerate() {
            for e in &s.edges {
                if !s.nodes.contains_key(&e.src) || !s.nodes.contains_key(&e.dst) {
                    return Err(Error::invalid(format!("dangling edge in segment {i}")));
                }
            }
            if self.summaries.get(i).map(|m| m.source_graph) != Some(s.graph_id) {
                return Err(Error::invalid(format!("segment {i} lacks its summary")));
            }
        }
        for e in &self.interlayer {
            match (self.segment_of(e.src), self.segment_of(e.dst)) {
                (Some(a), Some(b)) if b == a + 1 => {}
                _ => {
                    return Err(Error::invalid(format!(
                        "interlayer edge {} -> {} does not join adjacent segments",
                        e.src, e.dst
                    )))
                }
            }
        }
        Ok(())
    }
}

/// Argmax cosine; ties go to the first (lowest id) source.
fn best_match<'a>(sources: &[&'a EventNode], target: &Embedding) -> &'a EventNode {
    let mut best = sources[0];
    let mut best_sim = cosine_unchecked(&best.centroid, target);
    for s in &sources[1..] {
        let sim = cosine_unchecked(&s.centroid, target);
        if sim > best_sim {
            best = s;
            best_sim = sim;
        }
    }
    best
}
