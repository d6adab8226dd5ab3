//! Text packet handed to a downstream generator:
//!
//! ```text
//! EVENT <node_id> [score=<final>] : <member text> | <member text>
//! REL <src> -<kind>-> <dst> [w=<weight>]
//! QUERY: <current turn text>
//! ```
//!
//! Floats are four-decimal fixed point. Every line ends with `\n`.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::ScoredNode;
use crate::hierarchy::LayeredGraph;
use crate::types::{fixed4, NodeId};

pub fn render_prompt(selected: &[ScoredNode], lg: &LayeredGraph, query_text: &str) -> String {
    let rank: BTreeMap<NodeId, usize> = selected
        .iter()
        .enumerate()
        .map(|(i, s)| (s.node_id, i))
        .collect();
    let mut out = String::new();
    for s in selected {
        let texts: Vec<&str> = lg
            .segment_of(s.node_id)
            .map(|i| {
                let seg = &lg.segments[i];
                seg.member_mentions(&seg.nodes[&s.node_id])
                    .map(|m| m.text.as_str())
                    .collect()
            })
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "EVENT {} [score={}] : {}",
            s.node_id,
            fixed4(s.final_score),
            texts.join(" | ")
        );
    }

    let mut rels: Vec<_> = lg
        .segments
        .iter()
        .flat_map(|seg| seg.edges.iter())
        .chain(lg.interlayer.iter())
        .filter_map(|e| Some(((rank.get(&e.src)?, rank.get(&e.dst)?, e.kind), e)))
        .collect();
    rels.sort_by(|a, b| a.0.cmp(&b.0));
    for (_, e) in rels {
        let _ = writeln!(
            out,
            "REL {} -{}-> {} [w={}]",
            e.src,
            e.kind,
            e.dst,
            fixed4(e.weight)
        );
    }
    let _ = writeln!(out, "QUERY: {query_text}");
    out
}
