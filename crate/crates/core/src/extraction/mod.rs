//! Event detection and mention segmentation.

mod lexicon;

use std::sync::Arc;

use unicode_segmentation::UnicodeSegmentation;

pub use lexicon::{Lexicons, Phrase};

use crate::embed::{tokenize, Embedder};
use crate::error::{Error, Result};
use crate::types::{DialogueTurn, EventMention, MentionId};

/// Mentions shorter than this are merged into the previous mention.
pub const MIN_MENTION_TOKENS: usize = 3;

/// Decides whether a turn carries event content at all.
pub trait EventDetector: Send + Sync {
    fn name(&self) -> &str;
    fn is_event(&self, turn: &DialogueTurn) -> bool;
}

/// A turn is an event unless it is a filler phrase or contains no content
/// token (alphabetic, two or more characters, not a stopword or filler word).
pub struct LexiconDetector {
    lexicons: Arc<Lexicons>,
}

impl LexiconDetector {
    pub fn new(lexicons: Arc<Lexicons>) -> Self {
        LexiconDetector { lexicons }
    }
}

impl EventDetector for LexiconDetector {
    fn name(&self) -> &str {
        "lexicon"
    }

    fn is_event(&self, turn: &DialogueTurn) -> bool {
        let tokens = tokenize(&turn.text);
        if tokens.is_empty() || self.lexicons.filler.contains(&tokens.join(" ")) {
            return false;
        }
        tokens.iter().any(|t| {
            t.chars().count() >= 2
                && t.chars().any(char::is_alphabetic)
                && !self.lexicons.stopwords.contains(t)
                && !self.lexicons.filler.contains(t)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub turn_id: u64,
    pub is_event: bool,
    pub mentions: Vec<EventMention>,
}

/// A mention before embedding: char span plus text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub span: (usize, usize),
    pub text: String,
    pub temporal: bool,
}

const TRIM_CHARS: &[char] = &[',', ';', ':', '-', '\u{2013}', '\u{2014}'];

fn trim_range(text: &str, start: usize, end: usize) -> (usize, usize) {
    let slice = &text[start..end];
    let lead = slice.len() - slice.trim_start_matches(|c: char| c.is_whitespace() || TRIM_CHARS.contains(&c)).len();
    let trail = slice.len() - slice.trim_end_matches(|c: char| c.is_whitespace() || TRIM_CHARS.contains(&c)).len();
    if lead + trail >= slice.len() {
        (start, start)
    } else {
        (start + lead, end - trail)
    }
}

/// Splits text at sentence boundaries and discourse markers, then folds
/// fragments under [`MIN_MENTION_TOKENS`] into the preceding segment
/// (leading fragments are dropped). Spans are char offsets.
pub fn split_segments(text: &str, lexicons: &Lexicons) -> Vec<Segment> {
    let mut byte_ranges: Vec<(usize, usize)> = Vec::new();
    for (sent_start, sentence) in text.split_sentence_bound_indices() {
        let words: Vec<(usize, &str)> = sentence.unicode_word_indices().collect();
        let tokens: Vec<String> = words.iter().map(|(_, w)| w.to_lowercase()).collect();
        let mut seg_start = 0;
        let mut i = 0;
        while i < tokens.len() {
            if let Some(len) = lexicons.marker_at(&tokens, i) {
                let marker_start = words[i].0;
                let (last_off, last_word) = words[i + len - 1];
                byte_ranges.push((sent_start + seg_start, sent_start + marker_start));
                seg_start = last_off + last_word.len();
                i += len;
            } else {
                i += 1;
            }
        }
        byte_ranges.push((sent_start + seg_start, sent_start + sentence.len()));
    }

    let mut kept: Vec<(usize, usize)> = Vec::new();
    for (s, e) in byte_ranges {
        let (s, e) = trim_range(text, s, e);
        if s == e {
            continue;
        }
        let n_tokens = text[s..e].unicode_words().count();
        if n_tokens >= MIN_MENTION_TOKENS {
            kept.push((s, e));
        } else if let Some(last) = kept.last_mut() {
            last.1 = e;
        }
    }

    kept.into_iter()
        .map(|(s, e)| {
            let body = &text[s..e];
            let start = text[..s].chars().count();
            Segment {
                span: (start, start + body.chars().count()),
                text: body.to_string(),
                temporal: lexicons.has_temporal(&tokenize(body)),
            }
        })
        .collect()
}

/// Detection, segmentation and embedding of a single turn.
pub struct Extractor {
    detector: Box<dyn EventDetector>,
    lexicons: Arc<Lexicons>,
    embedder: Arc<dyn Embedder>,
}

impl Extractor {
    pub fn new(
        detector: Box<dyn EventDetector>,
        lexicons: Arc<Lexicons>,
        embedder: Arc<dyn Embedder>,
    ) -> Self {
        Extractor {
            detector,
            lexicons,
            embedder,
        }
    }

    pub fn embedder(&self) -> &Arc<dyn Embedder> {
        &self.embedder
    }

    pub fn lexicons(&self) -> &Lexicons {
        &self.lexicons
    }

    pub fn detect_event(&self, turn: &DialogueTurn) -> bool {
        !turn.text.trim().is_empty() && self.detector.is_event(turn)
    }

    /// Mention ids are assigned consecutively from `first_id`.
    pub fn segment_mentions(
        &self,
        turn: &DialogueTurn,
        first_id: MentionId,
    ) -> Result<Vec<EventMention>> {
        if !self.detect_event(turn) {
            return Err(Error::invalid(format!(
                "turn {} carries no event",
                turn.turn_id
            )));
        }
        let segments = split_segments(&turn.text, &self.lexicons);
        let texts: Vec<&str> = segments.iter().map(|s| s.text.as_str()).collect();
        let embeddings = self.embedder.embed_batch(&texts)?;
        Ok(segments
            .into_iter()
            .zip(embeddings)
            .enumerate()
            .map(|(j, (seg, embedding))| EventMention {
                mention_id: MentionId(first_id.0 + j as u64),
                turn_id: turn.turn_id,
                time: turn.time,
                span: seg.span,
                text: seg.text,
                embedding,
                temporal: seg.temporal,
            })
            .collect())
    }

    pub fn extract(&self, turn: &DialogueTurn, first_id: MentionId) -> Result<DetectionResult> {
        let mentions = if self.detect_event(turn) {
            self.segment_mentions(turn, first_id)?
        } else {
            Vec::new()
        };
        Ok(DetectionResult {
            turn_id: turn.turn_id,
            is_event: !mentions.is_empty(),
            mentions,
        })
    }
}
