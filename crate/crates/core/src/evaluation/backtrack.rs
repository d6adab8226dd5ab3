//! Backtracking recall: delete a seeded random fraction of base-layer edges
//! and check whether the supporting events around the deleted connections
//! are still retrieved.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::hierarchy::LayeredGraph;
use crate::retrieval::{rank_memory_with, segment_pageranks, RetrievalQuery};
use crate::types::{Embedding, NodeId, TypedEdge};

#[derive(Debug, Clone, PartialEq)]
pub struct BrQuery {
    pub gold: NodeId,
    pub text: String,
    pub embedding: Embedding,
}

#[derive(Debug, Clone, PartialEq)]
pub enum QuerySource {
    /// One query per deleted edge, aimed at its destination node. With no
    /// deletions every edge destination is queried.
    FromDeleted,
    Explicit(Vec<BrQuery>),
}

/// Query for `gold` built from its earliest mention.
fn query_for(lg: &LayeredGraph, gold: NodeId) -> Option<BrQuery> {
    let seg = &lg.segments[lg.segment_of(gold)?];
    let m = seg
        .member_mentions(&seg.nodes[&gold])
        .min_by_key(|m| (m.time, m.mention_id))?;
    Some(BrQuery {
        gold,
        text: m.text.clone(),
        embedding: m.embedding.clone(),
    })
}

/// One query per node, using its earliest mention; each such node is the
/// relevance argmax of its own query whenever its mention is unique.
pub fn forced_queries(lg: &LayeredGraph) -> Vec<BrQuery> {
    lg.nodes().filter_map(|n| query_for(lg, n.node_id)).collect()
}

fn deletion_count(rate: f64, total: usize) -> usize {
    ((rate * total as f64) + 1e-9).floor() as usize
}

/// Fraction of queries whose gold node lands in the top-k after deleting
/// `floor(rate * |edges|)` base-layer edges chosen uniformly by `seed`.
/// Works on a private copy; `lg` is never modified.
pub fn backtracking_recall(
    lg: &LayeredGraph,
    rate: f64,
    queries: &QuerySource,
    seed: u64,
    cfg: &EngineConfig,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::invalid(format!("deletion rate {rate} outside [0, 1]")));
    }
    let flat: Vec<(usize, usize)> = lg
        .segments
        .iter()
        .enumerate()
        .flat_map(|(s, seg)| (0..seg.edges.len()).map(move |e| (s, e)))
        .collect();
    if flat.is_empty() {
        return Err(Error::UndefinedMetric("memory has no base-layer edges".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = sample(&mut rng, flat.len(), deletion_count(rate, flat.len())).into_vec();
    picked.sort_unstable();
    let deleted: Vec<&TypedEdge> = picked
        .iter()
        .map(|i| {
            let (s, e) = flat[*i];
            &lg.segments[s].edges[e]
        })
        .collect();

    let queries: Vec<BrQuery> = match queries {
        QuerySource::Explicit(q) => q.clone(),
        QuerySource::FromDeleted if deleted.is_empty() => lg
            .segments
            .iter()
            .flat_map(|s| &s.edges)
            .filter_map(|e| query_for(lg, e.dst))
            .collect(),
        QuerySource::FromDeleted => deleted.iter().filter_map(|e| query_for(lg, e.dst)).collect(),
    };
    if queries.is_empty() {
        return Err(Error::UndefinedMetric("no backtracking queries".into()));
    }

    let mut damaged = lg.clone();
    for (seg_idx, seg) in damaged.segments.iter_mut().enumerate() {
        let drop: Vec<usize> = picked
            .iter()
            .map(|i| flat[*i])
            .filter(|(s, _)| *s == seg_idx)
            .map(|(_, e)| e)
            .collect();
        let mut idx = 0;
        seg.edges.retain(|_| {
            let keep = !drop.contains(&idx);
            idx += 1;
            keep
        });
    }

    let now = damaged.latest_time().unwrap_or(0);
    let prs = segment_pageranks(&damaged, cfg)?;
    let mut hits = 0usize;
    for q in &queries {
        let rq = RetrievalQuery::new(q.embedding.clone(), now, cfg.k, cfg.omega)?;
        let ranked = rank_memory_with(&damaged, &prs, &rq, cfg)?;
        if ranked.iter().take(cfg.k).any(|s| s.node_id == q.gold) {
            hits += 1;
        }
    }
    Ok(hits as f64 / queries.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrRow {
    pub rate: f64,
    pub mean: f64,
    pub std: f64,
    pub runs: usize,
    pub recalls: Vec<f64>,
}

/// Runs every (rate, seed) pair in parallel; rows follow `rates` order and
/// recalls follow `seeds` order. `std` is the sample standard deviation.
pub fn br_table(
    lg: &LayeredGraph,
    rates: &[f64],
    seeds: &[u64],
    queries: &QuerySource,
    cfg: &EngineConfig,
) -> Result<Vec<BrRow>> {
    if seeds.is_empty() {
        return Err(Error::invalid("at least one seed is required"));
    }
    rates
        .iter()
        .map(|&rate| {
            let recalls = seeds
                .par_iter()
                .map(|&seed| backtracking_recall(lg, rate, queries, seed, cfg))
                .collect::<Result<Vec<f64>>>()?;
            let n = recalls.len() as f64;
            let mean = recalls.iter().sum::<f64>() / n;
            let std = if recalls.len() > 1 {
                (recalls.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            Ok(BrRow {
                rate,
                mean,
                std,
                runs: recalls.len(),
                recalls,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deletion_count_floors_without_float_drift() {
        assert_eq!(deletion_count(0.29, 100), 29);
        assert_eq!(deletion_count(0.1, 9), 0);
        assert_eq!(deletion_count(1.0, 7), 7);
        assert_eq!(deletion_count(0.0, 7), 0);
    }

    #[test]
    fn edgeless_memory_is_undefined() {
        let lg = LayeredGraph::new();
        let cfg = EngineConfig::default();
        assert!(matches!(
            backtracking_recall(&lg, 0.1, &QuerySource::FromDeleted, 0, &cfg),
            Err(Error::UndefinedMetric(_))
        ));
        assert!(backtracking_recall(&lg, 1.5, &QuerySource::FromDeleted, 0, &cfg).is_err());
    }
}
