use std::collections::HashSet;
use std::path::Path;

use crate::config::LexiconPaths;
use crate::embed::tokenize;
use crate::error::Result;

const FILLER: &str = include_str!("../../lexicons/filler.txt");
const STOPWORDS: &str = include_str!("../../lexicons/stopwords.txt");
const MARKERS: &str = include_str!("../../lexicons/discourse_markers.txt");
const TEMPORAL: &str = include_str!("../../lexicons/temporal.txt");

const WEEKDAYS: [&str; 7] = [
    "monday",
    "tuesday",
    "wednesday",
    "thursday",
    "friday",
    "saturday",
    "sunday",
];
const MONTHS: [&str; 12] = [
    "january",
    "february",
    "march",
    "april",
    "may",
    "june",
    "july",
    "august",
    "september",
    "october",
    "november",
    "december",
];

/// A phrase as its lowercased token sequence.
pub type Phrase = Vec<String>;

#[derive(Debug, Clone)]
pub struct Lexicons {
    pub filler: HashSet<String>,
    pub stopwords: HashSet<String>,
    /// Longest first, so "and then" wins over a bare "and".
    pub markers: Vec<Phrase>,
    pub temporal: Vec<Phrase>,
}

/// One entry per line; blank lines and `#` comments are skipped.
fn entries(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

fn expand_placeholders(entry: &str) -> Vec<String> {
    if entry.contains("<weekday>") {
        WEEKDAYS.iter().map(|d| entry.replace("<weekday>", d)).collect()
    } else if entry.contains("<month>") {
        MONTHS.iter().map(|m| entry.replace("<month>", m)).collect()
    } else {
        vec![entry.to_string()]
    }
}

fn phrases(text: &str) -> Vec<Phrase> {
    let mut out: Vec<Phrase> = entries(text)
        .flat_map(expand_placeholders)
        .map(|e| tokenize(&e))
        .filter(|p| !p.is_empty())
        .collect();
    out.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    out.dedup();
    out
}

fn normalized_set(text: &str) -> HashSet<String> {
    entries(text).map(|e| tokenize(e).join(" ")).collect()
}

fn read_or(path: Option<&Path>, builtin: &str) -> Result<String> {
    match path {
        Some(p) => Ok(std::fs::read_to_string(p)?),
        None => Ok(builtin.to_string()),
    }
}

impl Lexicons {
    pub fn builtin() -> Self {
        Self::from_texts(FILLER, STOPWORDS, MARKERS, TEMPORAL)
    }

    pub fn from_texts(filler: &str, stopwords: &str, markers: &str, temporal: &str) -> Self {
        Lexicons {
            filler: normalized_set(filler),
            stopwords: normalized_set(stopwords),
            markers: phrases(markers),
            temporal: phrases(temporal),
        }
    }

    pub fn load(paths: &LexiconPaths) -> Result<Self> {
        Ok(Self::from_texts(
            &read_or(paths.filler.as_deref(), FILLER)?,
            &read_or(paths.stopwords.as_deref(), STOPWORDS)?,
            &read_or(paths.discourse_markers.as_deref(), MARKERS)?,
            &read_or(paths.temporal.as_deref(), TEMPORAL)?,
        ))
    }

    /// Length of the marker phrase starting at `tokens[i]`, if any.
    pub fn marker_at(&self, tokens: &[String], i: usize) -> Option<usize> {
        phrase_at(&self.markers, tokens, i)
    }

    pub fn has_temporal(&self, tokens: &[String]) -> bool {
        (0..tokens.len()).any(|i| phrase_at(&self.temporal, tokens, i).is_some())
    }
}

fn phrase_at(list: &[Phrase], tokens: &[String], i: usize) -> Option<usize> {
    list.iter()
        .find(|p| tokens.len() >= i + p.len() && tokens[i..i + p.len()] == p[..])
        .map(Vec::len)
}
