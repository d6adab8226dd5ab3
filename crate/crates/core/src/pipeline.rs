//! Streaming memory construction and per-turn prediction.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::error::Result;
use crate::evaluation::PredictedTurn;
use crate::extraction::Extractor;
use crate::graph_build::SegmentGraph;
use crate::hierarchy::LayeredGraph;
use crate::preservation::prune;
use crate::registry::{Rest, Strategies};
use crate::retrieval::{rank_memory, retrieve, GraphContext, RetrievalQuery};
use crate::types::{DialogueTurn, Embedding, MentionId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TranscriptRecord {
    Turn(DialogueTurn),
    SessionEnd,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildStats {
    pub turns: usize,
    pub event_turns: usize,
    pub mentions: usize,
    pub segments: usize,
    pub pruned: usize,
}

/// Feeds turns into the open segment and folds it into the memory on a
/// session boundary, a session id change, or when it reaches `max_nodes`.
pub struct MemoryBuilder {
    cfg: EngineConfig,
    extractor: Extractor,
    rest: Rest,
    summary_w: Option<Embedding>,
    memory: LayeredGraph,
    open: SegmentGraph,
    open_turns: Vec<DialogueTurn>,
    session: Option<u64>,
    next_mention: u64,
    next_graph: u64,
    stats: BuildStats,
}

impl MemoryBuilder {
    pub fn new(cfg: EngineConfig) -> Result<Self> {
        let strategies = Strategies::from_config(&cfg)?;
        Self::with_strategies(cfg, strategies)
    }

    pub fn with_strategies(cfg: EngineConfig, strategies: Strategies) -> Result<Self> {
        cfg.validate()?;
        let summary_w = cfg.summary_w.clone().map(Embedding::new).transpose()?;
        let (extractor, rest) = strategies.split_extractor();
        Ok(MemoryBuilder {
            cfg,
            extractor,
            rest,
            summary_w,
            memory: LayeredGraph::new(),
            open: SegmentGraph::new(0, 0),
            open_turns: Vec::new(),
            session: None,
            next_mention: 0,
            next_graph: 1,
            stats: BuildStats::default(),
        })
    }

    pub fn push(&mut self, record: &TranscriptRecord) -> Result<()> {
        match record {
            TranscriptRecord::SessionEnd => self.close_segment(),
            TranscriptRecord::Turn(turn) => self.push_turn(turn),
        }
    }

    pub fn push_turn(&mut self, turn: &DialogueTurn) -> Result<()> {
        if self.session.is_some_and(|s| s != turn.session_id) {
            self.close_segment()?;
        }
        self.session = Some(turn.session_id);
        self.stats.turns += 1;
        self.open_turns.push(turn.clone());
        let detected = self.extractor.extract(turn, MentionId(self.next_mention))?;
        if detected.is_event {
            self.stats.event_turns += 1;
        }
        for m in detected.mentions {
            self.next_mention = self.next_mention.max(m.mention_id.0 + 1);
            self.stats.mentions += 1;
            self.open.assign_cluster(m, self.cfg.delta)?;
        }
        if self.open.nodes.len() >= self.cfg.max_nodes {
            self.close_segment()?;
        }
        Ok(())
    }

    /// Finalizes the open segment. Segments without nodes are dropped.
    pub fn close_segment(&mut self) -> Result<()> {
        let turns = std::mem::take(&mut self.open_turns);
        self.session = None;
        if self.open.is_empty() {
            return Ok(());
        }
        let next_id = self.open.next_node_id;
        let mut g = std::mem::replace(&mut self.open, SegmentGraph::new(self.next_graph, next_id));
        self.next_graph += 1;

        g.merge_pass(self.cfg.delta)?;
        g.add_sequential_edges();
        g.add_temporal_edges();
        g.add_reasoning_links(
            &turns,
            self.rest.embedder.as_ref(),
            self.cfg.theta,
            self.cfg.context_window,
        )?;
        let now = g.time_range.map_or(0, |(_, b)| b);
        let removed = prune(
            &mut g,
            self.cfg.lambda,
            self.cfg.max_nodes,
            now,
            self.rest.future.as_ref(),
            self.rest.compatibility.as_ref(),
        )?;
        self.stats.pruned += removed.len();
        self.memory.fold_segment(
            g,
            self.summary_w.as_ref(),
            self.cfg.beta,
            self.rest.update_adjust.as_ref(),
        )?;
        self.stats.segments += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(LayeredGraph, BuildStats)> {
        self.close_segment()?;
        Ok((self.memory, self.stats))
    }
}

pub fn build_memory(records: &[TranscriptRecord], cfg: &EngineConfig) -> Result<(LayeredGraph, BuildStats)> {
    let mut b = MemoryBuilder::new(cfg.clone())?;
    for r in records {
        b.push(r)?;
    }
    b.finish()
}

/// Query built from `text` and evaluated at the memory's latest time.
pub fn text_query(
    lg: &LayeredGraph,
    text: &str,
    cfg: &EngineConfig,
    rest: &Rest,
) -> Result<RetrievalQuery> {
    let embedding = rest.embedder.embed(text)?;
    let omega = rest.omega_policy.weights(cfg.omega, text);
    RetrievalQuery::new(embedding, lg.latest_time().unwrap_or(0), cfg.k, omega)
}

pub fn retrieve_text(lg: &LayeredGraph, text: &str, cfg: &EngineConfig, rest: &Rest) -> Result<GraphContext> {
    let q = text_query(lg, text, cfg, rest)?;
    retrieve(lg, &q, cfg, text)
}

/// Top-1 is the predicted core event and the rest of the top-k are the
/// supporting events. Updates are interlayer edges into a selected node;
/// their sources are predicted outdated.
pub fn predict_turn(lg: &LayeredGraph, text: &str, cfg: &EngineConfig, rest: &Rest) -> Result<PredictedTurn> {
    let q = text_query(lg, text, cfg, rest)?;
    let ranked = rank_memory(lg, &q, cfg)?;
    let selected: Vec<_> = ranked.iter().take(cfg.k).map(|s| s.node_id).collect();
    let chosen: BTreeSet<_> = selected.iter().copied().collect();
    let updates: BTreeSet<_> = lg
        .interlayer
        .iter()
        .filter(|e| chosen.contains(&e.dst))
        .map(|e| (e.src, e.dst))
        .collect();
    Ok(PredictedTurn {
        core: selected.first().copied(),
        supporting: selected.iter().skip(1).copied().collect(),
        outdated: updates.iter().map(|(a, _)| *a).collect(),
        updates,
    })
}
