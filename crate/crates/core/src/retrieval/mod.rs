//! Multi-perspective scoring (recency, relevance, structure), top-k
//! selection, and the graph-context vector.

mod pagerank;
mod prompt;

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use pagerank::{pagerank, pagerank_run, PageRankRun, MAX_ITERATIONS};
pub use prompt::render_prompt;

use crate::config::{validate_omega, EngineConfig};
use crate::embed::tokenize;
use crate::error::{Error, Result};
use crate::extraction::Lexicons;
use crate::graph_build::SegmentGraph;
use crate::hierarchy::LayeredGraph;
use crate::types::{cosine, softmax, Embedding, EventNode, NodeId, Tick};

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalQuery {
    pub context_embedding: Embedding,
    pub now: Tick,
    pub k: usize,
    /// Recency, relevance, structural.
    pub omega: [f64; 3],
}

impl RetrievalQuery {
    pub fn new(context_embedding: Embedding, now: Tick, k: usize, omega: [f64; 3]) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k must be >= 1"));
        }
        validate_omega(&omega).map_err(|e| Error::invalid(e.to_string()))?;
        Ok(RetrievalQuery {
            context_embedding,
            now,
            k,
            omega,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredNode {
    pub node_id: NodeId,
    pub recency: f64,
    pub relevance: f64,
    pub structural: f64,
    #[serde(rename = "final")]
    pub final_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphContext {
    pub selected: Vec<ScoredNode>,
    /// Softmax weights aligned with `selected`.
    pub weights: Vec<f64>,
    /// Weighted sum of selected centroids; not renormalized.
    pub g_ctx: Vec<f64>,
    pub prompt: String,
}

/// Adjusts the combination weights for a particular query.
pub trait OmegaPolicy: Send + Sync {
    fn name(&self) -> &str;
    fn weights(&self, base: [f64; 3], query_text: &str) -> [f64; 3];
}

pub struct FixedOmega;

impl OmegaPolicy for FixedOmega {
    fn name(&self) -> &str {
        "fixed"
    }

    fn weights(&self, base: [f64; 3], _: &str) -> [f64; 3] {
        base
    }
}

/// Multiplies the recency weight when the query names a time.
pub struct TemporalBoost {
    pub lexicons: Arc<Lexicons>,
    pub factor: f64,
}

impl OmegaPolicy for TemporalBoost {
    fn name(&self) -> &str {
        "temporal-boost"
    }

    fn weights(&self, base: [f64; 3], query_text: &str) -> [f64; 3] {
        if self.lexicons.has_temporal(&tokenize(query_text)) {
            [base[0] * self.factor, base[1], base[2]]
        } else {
            base
        }
    }
}

pub fn score_recency(node: &EventNode, now: Tick, gamma: f64) -> Result<f64> {
    if now < node.last_updated {
        return Err(Error::invalid(format!(
            "query time {now} precedes node {} update at {}",
            node.node_id, node.last_updated
        )));
    }
    Ok((-gamma * (now - node.last_updated) as f64).exp())
}

pub fn score_relevance(node: &EventNode, q: &RetrievalQuery) -> Result<f64> {
    cosine(&q.context_embedding, &node.centroid)
}

/// Final score descending, ties to the lowest node id.
pub fn rank_order(a: &ScoredNode, b: &ScoredNode) -> Ordering {
    b.final_score
        .total_cmp(&a.final_score)
        .then_with(|| a.node_id.cmp(&b.node_id))
}

pub fn score_all(
    graph: &SegmentGraph,
    q: &RetrievalQuery,
    gamma: f64,
    pr: &BTreeMap<NodeId, f64>,
) -> Result<Vec<ScoredNode>> {
    let [w_rec, w_rel, w_struct] = q.omega;
    let mut out = graph
        .nodes
        .values()
        .map(|n| {
            let recency = score_recency(n, q.now, gamma)?;
            let relevance = score_relevance(n, q)?;
            let structural = *pr
                .get(&n.node_id)
                .ok_or_else(|| Error::invalid(format!("no structural score for node {}", n.node_id)))?;
            Ok(ScoredNode {
                node_id: n.node_id,
                recency,
                relevance,
                structural,
                final_score: w_rec * recency + w_rel * relevance + w_struct * structural,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(rank_order);
    Ok(out)
}

/// Softmax over `eps_temp * final` and the weighted sum of centroids.
pub fn compose_context(
    selected: Vec<ScoredNode>,
    centroids: &BTreeMap<NodeId, Embedding>,
    eps_temp: f64,
    prompt: String,
) -> Result<GraphContext> {
    if selected.is_empty() {
        return Err(Error::invalid("context needs at least one selected node"));
    }
    let finals: Vec<f64> = selected.iter().map(|s| s.final_score).collect();
    let weights = softmax(&finals, eps_temp);
    let mut g_ctx: Option<Vec<f64>> = None;
    for (s, w) in selected.iter().zip(&weights) {
        let c = centroids
            .get(&s.node_id)
            .ok_or_else(|| Error::invalid(format!("no centroid for node {}", s.node_id)))?;
        match g_ctx.as_mut() {
            None => g_ctx = Some(c.as_slice().iter().map(|x| w * x).collect()),
            Some(acc) => {
                if acc.len() != c.dim() {
                    return Err(Error::invalid("centroid dimension mismatch"));
                }
                for (a, x) in acc.iter_mut().zip(c.as_slice()) {
                    *a += w * x;
                }
            }
        }
    }
    Ok(GraphContext {
        selected,
        weights,
        g_ctx: g_ctx.expect("selection is non-empty"),
        prompt,
    })
}

/// Segments in retrieval scope: the most recent `max_sessions`, or all.
pub fn scoped_segments<'a>(lg: &'a LayeredGraph, cfg: &EngineConfig) -> &'a [SegmentGraph] {
    let n = lg.segments.len();
    let keep = cfg.max_sessions.map_or(n, |m| m.min(n));
    &lg.segments[n - keep..]
}

/// PageRank of each in-scope segment, aligned with [`scoped_segments`].
/// Valid until the memory is mutated.
pub fn segment_pageranks(lg: &LayeredGraph, cfg: &EngineConfig) -> Result<Vec<BTreeMap<NodeId, f64>>> {
    scoped_segments(lg, cfg)
        .iter()
        .map(|seg| {
            if seg.is_empty() {
                Ok(BTreeMap::new())
            } else {
                pagerank(seg, cfg.alpha_damp, cfg.pagerank_tol)
            }
        })
        .collect()
}

/// Every in-scope node scored and ranked. PageRank runs per segment.
pub fn rank_memory(lg: &LayeredGraph, q: &RetrievalQuery, cfg: &EngineConfig) -> Result<Vec<ScoredNode>> {
    rank_memory_with(lg, &segment_pageranks(lg, cfg)?, q, cfg)
}

/// [`rank_memory`] with precomputed per-segment PageRank.
pub fn rank_memory_with(
    lg: &LayeredGraph,
    pageranks: &[BTreeMap<NodeId, f64>],
    q: &RetrievalQuery,
    cfg: &EngineConfig,
) -> Result<Vec<ScoredNode>> {
    let segments = scoped_segments(lg, cfg);
    if pageranks.len() != segments.len() {
        return Err(Error::invalid("pagerank cache does not match memory scope"));
    }
    let mut all = Vec::new();
    for (seg, pr) in segments.iter().zip(pageranks).filter(|(s, _)| !s.is_empty()) {
        all.extend(score_all(seg, q, cfg.gamma, pr)?);
    }
    if all.is_empty() {
        return Err(Error::EmptyMemory);
    }
    all.sort_by(rank_order);
    Ok(all)
}

pub fn retrieve(
    lg: &LayeredGraph,
    q: &RetrievalQuery,
    cfg: &EngineConfig,
    query_text: &str,
) -> Result<GraphContext> {
    let mut ranked = rank_memory(lg, q, cfg)?;
    ranked.truncate(q.k);
    let centroids: BTreeMap<NodeId, Embedding> = ranked
        .iter()
        .filter_map(|s| Some((s.node_id, lg.node(s.node_id)?.centroid.clone())))
        .collect();
    let prompt = render_prompt(&ranked, lg, query_text);
    compose_context(ranked, &centroids, cfg.eps_temp, prompt)
}

/// Whether scaling every combination weight by `c` keeps the full ranking.
pub fn ordering_invariant_under_scaling(
    lg: &LayeredGraph,
    q: &RetrievalQuery,
    cfg: &EngineConfig,
    c: f64,
) -> Result<bool> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid("scale must be positive"));
    }
    let scaled = RetrievalQuery {
        omega: q.omega.map(|w| w * c),
        ..q.clone()
    };
    let ids = |v: Vec<ScoredNode>| v.into_iter().map(|s| s.node_id).collect::<Vec<_>>();
    Ok(ids(rank_memory(lg, q, cfg)?) == ids(rank_memory(lg, &scaled, cfg)?))
}
