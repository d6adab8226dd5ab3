use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph_build::SegmentGraph;
use crate::types::{EdgeKind, NodeId};

pub const MAX_ITERATIONS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct PageRankRun {
    pub scores: BTreeMap<NodeId, f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Weighted PageRank over one segment. Each node spreads its mass over its
/// out-edges in proportion to edge weight; nodes without positive out-weight
/// spread uniformly. Teleport mass is `(1 - damping) / |nodes|`. Interlayer
/// edges are ignored.
pub fn pagerank_run(graph: &SegmentGraph, damping: f64, tol: f64) -> Result<PageRankRun> {
    if graph.is_empty() {
        return Err(Error::invalid("pagerank of an empty graph"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("pagerank tolerance must be > 0"));
    }
    let ids: Vec<NodeId> = graph.nodes.keys().copied().collect();
    let index: BTreeMap<NodeId, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let n = ids.len();
    let links: Vec<(usize, usize, f64)> = graph
        .edges
        .iter()
        .filter(|e| e.kind != EdgeKind::Interlayer && e.weight > 0.0)
        .filter_map(|e| Some((*index.get(&e.src)?, *index.get(&e.dst)?, e.weight)))
        .collect();
    let mut out_weight = vec![0.0; n];
    for (s, _, w) in &links {
        out_weight[*s] += w;
    }

    let teleport = (1.0 - damping) / n as f64;
    let mut rank = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let dangling: f64 = (0..n).filter(|i| out_weight[*i] == 0.0).map(|i| rank[i]).sum();
        let base = teleport + damping * dangling / n as f64;
        next.iter_mut().for_each(|x| *x = base);
        for (s, d, w) in &links {
            next[*d] += damping * rank[*s] * w / out_weight[*s];
        }
        let diff: f64 = rank.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut rank, &mut next);
        if diff < tol {
            converged = true;
            break;
        }
    }
    Ok(PageRankRun {
        scores: ids.into_iter().zip(rank).collect(),
        iterations,
        converged,
    })
}

pub fn pagerank(graph: &SegmentGraph, damping: f64, tol: f64) -> Result<BTreeMap<NodeId, f64>> {
    Ok(pagerank_run(graph, damping, tol)?.scores)
}
