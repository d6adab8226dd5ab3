//! Per-segment event graph: incremental clustering of mentions into event
//! nodes plus Sequential, Temporal and Reasoning edges.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::embed::Embedder;
use crate::error::{Error, Result};
use crate::types::{
    cosine_unchecked, DialogueTurn, EdgeKind, Embedding, EventMention, EventNode, MentionId,
    NodeId, Tick, TypedEdge,
};

/// Weight of the context mean in a contextualized embedding.
pub const CONTEXT_MIX: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentGraph {
    pub graph_id: u64,
    pub nodes: BTreeMap<NodeId, EventNode>,
    pub mentions: BTreeMap<MentionId, EventMention>,
    pub edges: Vec<TypedEdge>,
    /// First and last turn time seen; `None` while empty.
    pub time_range: Option<(Tick, Tick)>,
    /// Next id handed to a new node.
    pub next_node_id: u64,
}

impl SegmentGraph {
    pub fn new(graph_id: u64, first_node_id: u64) -> Self {
        SegmentGraph {
            graph_id,
            nodes: BTreeMap::new(),
            mentions: BTreeMap::new(),
            edges: Vec::new(),
            time_range: None,
            next_node_id: first_node_id,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> Result<&EventNode> {
        self.nodes
            .get(&id)
            .ok_or_else(|| Error::invalid(format!("node {id} not in graph {}", self.graph_id)))
    }

    pub fn member_mentions<'a>(&'a self, node: &'a EventNode) -> impl Iterator<Item = &'a EventMention> + 'a {
        node.members.iter().filter_map(|m| self.mentions.get(m))
    }

    /// Highest cosine between `embedding` and any member of `node`.
    fn link_similarity(&self, node: &EventNode, embedding: &Embedding) -> f64 {
        self.member_mentions(node)
            .map(|m| cosine_unchecked(&m.embedding, embedding))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn recompute_centroid(&mut self, id: NodeId) -> Result<()> {
        let node = &self.nodes[&id];
        let centroid = Embedding::mean(self.member_mentions(node).map(|m| &m.embedding))?;
        self.nodes.get_mut(&id).expect("node exists").centroid = centroid;
        Ok(())
    }

    fn touch_time(&mut self, t: Tick) {
        self.time_range = Some(match self.time_range {
            None => (t, t),
            Some((a, b)) => (a.min(t), b.max(t)),
        });
    }

    /// Adds a mention to the node it links to most strongly when that link
    /// exceeds `delta` (ties go to the lowest id), else opens a new node.
    /// A link is the best cosine against any existing member, so the final
    /// partition after [`Self::merge_pass`] is the connected components of
    /// the mention threshold graph.
    pub fn assign_cluster(&mut self, mention: EventMention, delta: f64) -> Result<NodeId> {
        if let Some(first) = self.mentions.values().next() {
            if first.embedding.dim() != mention.embedding.dim() {
                return Err(Error::invalid("mention dimension differs from graph"));
            }
        }
        if self.mentions.contains_key(&mention.mention_id) {
            return Err(Error::invalid(format!(
                "duplicate mention id {}",
                mention.mention_id.0
            )));
        }
        let mut best: Option<(NodeId, f64)> = None;
        for (id, node) in &self.nodes {
            let sim = self.link_similarity(node, &mention.embedding);
            if sim > delta && best.is_none_or(|(_, s)| sim > s) {
                best = Some((*id, sim));
            }
        }
        let time = mention.time;
        let mid = mention.mention_id;
        self.touch_time(time);
        match best {
            Some((id, _)) => {
                self.mentions.insert(mid, mention);
                let node = self.nodes.get_mut(&id).expect("node exists");
                node.members.push(mid);
                node.last_updated = node.last_updated.max(time);
                node.access_count += 1;
                self.recompute_centroid(id)?;
                Ok(id)
            }
            None => {
                let id = NodeId(self.next_node_id);
                self.next_node_id += 1;
                self.nodes.insert(
                    id,
                    EventNode {
                        node_id: id,
                        members: vec![mid],
                        centroid: mention.embedding.clone(),
                        first_seen: time,
                        last_updated: time,
                        access_count: 0,
                        layer: 0,
                    },
                );
                self.mentions.insert(mid, mention);
                Ok(id)
            }
        }
    }

    fn linked(&self, a: &EventNode, b: &EventNode, delta: f64) -> bool {
        self.member_mentions(a)
            .any(|m| self.link_similarity(b, &m.embedding) > delta)
    }

    /// Merges node pairs joined by any member pair with cosine above `delta`
    /// until none remain. Returns the number of merges.
    pub fn merge_pass(&mut self, delta: f64) -> Result<usize> {
        let mut merges = 0;
        loop {
            let ids: Vec<NodeId> = self.nodes.keys().copied().collect();
            let pair = ids.iter().enumerate().find_map(|(i, a)| {
                ids[i + 1..]
                    .iter()
                    .find(|b| self.linked(&self.nodes[a], &self.nodes[b], delta))
                    .map(|b| (*a, *b))
            });
            let Some((keep, gone)) = pair else { break };
            self.absorb(keep, gone)?;
            merges += 1;
        }
        Ok(merges)
    }

    /// Folds `gone` into `keep`, re-pointing and deduplicating edges.
    fn absorb(&mut self, keep: NodeId, gone: NodeId) -> Result<()> {
        let old = self.nodes.remove(&gone).expect("node exists");
        let node = self.nodes.get_mut(&keep).expect("node exists");
        node.members.extend(old.members);
        node.members.sort();
        node.first_seen = node.first_seen.min(old.first_seen);
        node.last_updated = node.last_updated.max(old.last_updated);
        node.access_count += old.access_count;
        self.recompute_centroid(keep)?;

        let remap = |id: NodeId| if id == gone { keep } else { id };
        let mut seen = HashSet::new();
        let edges = std::mem::take(&mut self.edges);
        for mut e in edges {
            e.src = remap(e.src);
            e.dst = remap(e.dst);
            if e.src != e.dst && seen.insert(e.key()) {
                self.edges.push(e);
            }
        }
        Ok(())
    }

    /// Inserts unless an edge with the same (src, dst, kind) exists.
    pub fn add_edge(&mut self, edge: TypedEdge) -> bool {
        if self.edges.iter().any(|e| e.key() == edge.key()) {
            return false;
        }
        self.edges.push(edge);
        true
    }

    pub fn remove_node(&mut self, id: NodeId) -> Option<EventNode> {
        let node = self.nodes.remove(&id)?;
        for m in &node.members {
            self.mentions.remove(m);
        }
        self.edges.retain(|e| e.src != id && e.dst != id);
        Some(node)
    }

    /// Node ids ordered by (first_seen, id).
    pub fn chronological(&self) -> Vec<NodeId> {
        let mut ids: Vec<(Tick, NodeId)> =
            self.nodes.values().map(|n| (n.first_seen, n.node_id)).collect();
        ids.sort();
        ids.into_iter().map(|(_, id)| id).collect()
    }

    pub fn add_sequential_edges(&mut self) -> usize {
        let order = self.chronological();
        order
            .windows(2)
            .filter(|w| {
                self.add_edge(TypedEdge {
                    src: w[0],
                    dst: w[1],
                    kind: EdgeKind::Sequential,
                    weight: 1.0,
                })
            })
            .count()
    }

    /// Links every pair of nodes that both hold a temporally flagged mention,
    /// earlier node to later.
    pub fn add_temporal_edges(&mut self) -> usize {
        let flagged: Vec<NodeId> = self
            .chronological()
            .into_iter()
            .filter(|id| self.member_mentions(&self.nodes[id]).any(|m| m.temporal))
            .collect();
        let mut added = 0;
        for (i, a) in flagged.iter().enumerate() {
            for b in &flagged[i + 1..] {
                if self.add_edge(TypedEdge {
                    src: *a,
                    dst: *b,
                    kind: EdgeKind::Temporal,
                    weight: 1.0,
                }) {
                    added += 1;
                }
            }
        }
        added
    }

    /// Time of the node's most recent mention.
    pub fn anchor_time(&self, node: &EventNode) -> Tick {
        self.member_mentions(node)
            .map(|m| m.time)
            .max()
            .unwrap_or(node.last_updated)
    }

    /// Adds a symmetric Reasoning pair for every node pair whose contextual
    /// similarity exceeds `theta`.
    pub fn add_reasoning_links(
        &mut self,
        turns: &[DialogueTurn],
        embedder: &dyn Embedder,
        theta: f64,
        window: usize,
    ) -> Result<usize> {
        let contexts = self.node_contexts(turns, embedder, window)?;
        let ids: Vec<NodeId> = self.nodes.keys().copied().collect();
        let mut added = 0;
        for (i, a) in ids.iter().enumerate() {
            for b in &ids[i + 1..] {
                let sim = contextual_similarity(
                    &self.nodes[a].centroid,
                    &self.nodes[b].centroid,
                    &contexts[a],
                    &contexts[b],
                )?;
                if sim > theta {
                    let w = sim.clamp(0.0, 1.0);
                    for (src, dst) in [(*a, *b), (*b, *a)] {
                        if self.add_edge(TypedEdge::new(src, dst, EdgeKind::Reasoning, w)?) {
                            added += 1;
                        }
                    }
                }
            }
        }
        Ok(added)
    }

    /// Embeddings of the turns within `window` of each node's anchor turn,
    /// excluding the anchor itself. Turns without word tokens are skipped.
    pub fn node_contexts(
        &self,
        turns: &[DialogueTurn],
        embedder: &dyn Embedder,
        window: usize,
    ) -> Result<BTreeMap<NodeId, Vec<Embedding>>> {
        let anchors: BTreeMap<NodeId, Tick> = self
            .nodes
            .values()
            .map(|n| (n.node_id, self.anchor_time(n)))
            .collect();
        let w = window as u64;
        let needed: BTreeSet<Tick> = turns
            .iter()
            .map(|t| t.time)
            .filter(|t| anchors.values().any(|a| *t != *a && t.abs_diff(*a) <= w))
            .collect();
        let mut embedded: BTreeMap<Tick, Embedding> = BTreeMap::new();
        for t in turns.iter().filter(|t| needed.contains(&t.time)) {
            match embedder.embed(&t.text) {
                Ok(e) => {
                    embedded.insert(t.time, e);
                }
                Err(Error::InvalidInput(_)) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(anchors
            .into_iter()
            .map(|(id, a)| {
                let ctx = embedded
                    .iter()
                    .filter(|(t, _)| **t != a && t.abs_diff(a) <= w)
                    .map(|(_, e)| e.clone())
                    .collect();
                (id, ctx)
            })
            .collect())
    }
}

/// `normalize(v + CONTEXT_MIX * mean(context))`; `v` itself for an empty context.
pub fn contextualize(v: &Embedding, context: &[Embedding]) -> Result<Embedding> {
    if context.is_empty() {
        return Ok(v.clone());
    }
    let n = context.len() as f64;
    let mut out = v.as_slice().to_vec();
    for c in context {
        if c.dim() != v.dim() {
            return Err(Error::invalid("context dimension mismatch"));
        }
        for (o, x) in out.iter_mut().zip(c.as_slice()) {
            *o += CONTEXT_MIX * x / n;
        }
    }
    Embedding::new(out)
}

/// Cosine between two contextualized node embeddings.
pub fn contextual_similarity(
    a: &Embedding,
    b: &Embedding,
    ctx_a: &[Embedding],
    ctx_b: &[Embedding],
) -> Result<f64> {
    crate::types::cosine(&contextualize(a, ctx_a)?, &contextualize(b, ctx_b)?)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::embed::HashingEmbedder;
    use crate::types::cosine;

    pub(crate) fn mention(id: u64, time: Tick, values: Vec<f64>) -> EventMention {
        EventMention {
            mention_id: MentionId(id),
            turn_id: time,
            time,
            span: (0, 1),
            text: format!("m{id}"),
            embedding: Embedding::new(values).unwrap(),
            temporal: false,
        }
    }

    #[test]
    fn first_mention_opens_a_node() {
        let mut g = SegmentGraph::new(0, 0);
        let m = mention(0, 3, vec![1.0, 2.0, 0.0]);
        let id = g.assign_cluster(m.clone(), 0.8).unwrap();
        assert_eq!(g.nodes[&id].centroid, m.embedding);
        assert_eq!(g.nodes[&id].first_seen, 3);
    }

    #[test]
    fn identical_mention_joins_existing_node() {
        let mut g = SegmentGraph::new(0, 0);
        let a = g.assign_cluster(mention(0, 0, vec![1.0, 1.0, 0.0]), 0.8).unwrap();
        let b = g.assign_cluster(mention(1, 4, vec![1.0, 1.0, 0.0]), 0.8).unwrap();
        assert_eq!(a, b);
        let n = &g.nodes[&a];
        assert_eq!(n.members.len(), 2);
        assert_eq!(n.last_updated, 4);
        assert_eq!(n.access_count, 1);
    }

    #[test]
    fn merge_pass_fixpoint_and_identity_merge() {
        let mut g = SegmentGraph::new(0, 0);
        g.assign_cluster(mention(0, 0, vec![1.0, 0.0]), 0.8).unwrap();
        g.assign_cluster(mention(1, 1, vec![0.0, 1.0]), 0.8).unwrap();
        let before = g.clone();
        assert_eq!(g.merge_pass(0.8).unwrap(), 0);
        assert_eq!(g, before);

        // Bridge mention arrives after both ends were opened separately.
        let mut g = SegmentGraph::new(0, 0);
        g.assign_cluster(mention(0, 0, vec![1.0, 0.0]), 0.8).unwrap();
        g.assign_cluster(mention(1, 1, vec![0.6, 1.0]), 0.8).unwrap();
        g.add_sequential_edges();
        let joined = g.assign_cluster(mention(2, 2, vec![1.0, 0.5]), 0.8).unwrap();
        assert_eq!(g.nodes.len(), 2);
        assert_eq!(g.merge_pass(0.8).unwrap(), 1);
        assert_eq!(g.nodes.len(), 1);
        assert_eq!(*g.nodes.keys().next().unwrap(), NodeId(0));
        assert_eq!(joined, NodeId(0));
        assert!(g.edges.is_empty(), "self-loop should be dropped");
    }

    #[test]
    fn sequential_edges_follow_first_seen() {
        let mut g = SegmentGraph::new(0, 0);
        g.assign_cluster(mention(0, 9, vec![1.0, 0.0, 0.0]), 0.8).unwrap();
        g.assign_cluster(mention(1, 2, vec![0.0, 1.0, 0.0]), 0.8).unwrap();
        g.assign_cluster(mention(2, 5, vec![0.0, 0.0, 1.0]), 0.8).unwrap();
        assert_eq!(g.add_sequential_edges(), 2);
        let pairs: Vec<_> = g.edges.iter().map(|e| (e.src.0, e.dst.0)).collect();
        assert_eq!(pairs, [(1, 2), (2, 0)]);
        let snapshot = g.edges.clone();
        assert_eq!(g.add_sequential_edges(), 0);
        assert_eq!(g.edges, snapshot);

        let mut single = SegmentGraph::new(0, 0);
        single.assign_cluster(mention(0, 0, vec![1.0]), 0.8).unwrap();
        assert_eq!(single.add_sequential_edges(), 0);
    }

    #[test]
    fn temporal_edges_between_flagged_nodes() {
        let mut g = SegmentGraph::new(0, 0);
        for (i, v) in [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]]
            .into_iter()
            .enumerate()
        {
            let mut m = mention(i as u64, i as u64, v.to_vec());
            m.temporal = i != 1;
            g.assign_cluster(m, 0.8).unwrap();
        }
        assert_eq!(g.add_temporal_edges(), 3);
        let pairs: Vec<_> = g.edges.iter().map(|e| (e.src.0, e.dst.0)).collect();
        assert_eq!(pairs, [(0, 2), (0, 3), (2, 3)]);
        assert_eq!(g.add_temporal_edges(), 0);

        let mut none = SegmentGraph::new(0, 0);
        none.assign_cluster(mention(0, 0, vec![1.0, 0.0]), 0.8).unwrap();
        none.assign_cluster(mention(1, 1, vec![0.0, 1.0]), 0.8).unwrap();
        assert_eq!(none.add_temporal_edges(), 0);
    }

    #[test]
    fn contextual_similarity_edge_cases() {
        let a = Embedding::new(vec![1.0, 2.0, 0.5]).unwrap();
        let b = Embedding::new(vec![0.0, 1.0, 3.0]).unwrap();
        assert_eq!(
            contextual_similarity(&a, &b, &[], &[]).unwrap(),
            cosine(&a, &b).unwrap()
        );
        let ctx = vec![b.clone()];
        assert!((contextual_similarity(&a, &a, &ctx, &ctx).unwrap() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn contextual_similarity_closed_form() {
        let a = Embedding::new(vec![0.2, -0.4, 0.9, 0.1]).unwrap();
        let b = Embedding::new(vec![-0.3, 0.8, 0.2, 0.5]).unwrap();
        let c1 = Embedding::new(vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let c2 = Embedding::new(vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        // Independent recomputation.
        let mix = |v: &Embedding, cs: &[&Embedding]| -> Vec<f64> {
            let mut out: Vec<f64> = (0..4)
                .map(|i| v.as_slice()[i] + 0.5 * cs.iter().map(|c| c.as_slice()[i]).sum::<f64>() / cs.len() as f64)
                .collect();
            let n = out.iter().map(|x| x * x).sum::<f64>().sqrt();
            out.iter_mut().for_each(|x| *x /= n);
            out
        };
        let va = mix(&a, &[&c1, &c2]);
        let vb = mix(&b, &[&c2]);
        let expected: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
        let got = contextual_similarity(&a, &b, &[c1, c2.clone()], &[c2]).unwrap();
        assert!((got - expected).abs() <= 1e-12);
    }

    #[test]
    fn reasoning_links_identity_pair_and_threshold() {
        let e = HashingEmbedder::new(16).unwrap();
        let mut g = SegmentGraph::new(0, 0);
        // Identical centroids but kept apart (no merge pass).
        g.assign_cluster(mention(0, 0, vec![1.0, 0.0]), 0.99).unwrap();
        g.nodes.insert(NodeId(5), EventNode { node_id: NodeId(5), ..g.nodes[&NodeId(0)].clone() });
        assert_eq!(g.add_reasoning_links(&[], &e, 0.6, 2).unwrap(), 2);
        assert!(g.edges.iter().all(|x| x.weight == 1.0 && x.kind == EdgeKind::Reasoning));
        assert_eq!(g.add_reasoning_links(&[], &e, 0.6, 2).unwrap(), 0);

        let mut far = SegmentGraph::new(0, 0);
        far.assign_cluster(mention(0, 0, vec![1.0, 0.0]), 0.8).unwrap();
        far.assign_cluster(mention(1, 1, vec![0.0, 1.0]), 0.8).unwrap();
        assert_eq!(far.add_reasoning_links(&[], &e, 0.6, 2).unwrap(), 0);
    }
}
