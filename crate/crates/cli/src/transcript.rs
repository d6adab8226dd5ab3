//! JSON-lines transcripts: one turn per line, `{"session_end": true}` as a
//! segment boundary. Blank lines are ignored.

use ew_core::{DialogueTurn, TranscriptRecord};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TurnLine {
    turn_id: u64,
    session_id: u64,
    speaker: String,
    text: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundaryLine {
    session_end: bool,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Line {
    Turn(TurnLine),
    Boundary(BoundaryLine),
}

/// Turn times are the 0-based index of the record among all records.
pub fn parse_transcript(text: &str) -> Result<Vec<TranscriptRecord>, CliError> {
    let mut records = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let line: Line = serde_json::from_str(raw).map_err(|_| {
            CliError::parse(format!(
                "transcript line {}: expected a turn {{turn_id, session_id, speaker, text}} or {{\"session_end\": true}}",
                i + 1
            ))
        })?;
        let time = records.len() as u64;
        records.push(match line {
            Line::Turn(t) => TranscriptRecord::Turn(DialogueTurn {
                turn_id: t.turn_id,
                session_id: t.session_id,
                speaker: t.speaker,
                text: t.text,
                time,
            }),
            Line::Boundary(b) if b.session_end => TranscriptRecord::SessionEnd,
            Line::Boundary(_) => {
                return Err(CliError::parse(format!(
                    "transcript line {}: session_end must be true",
                    i + 1
                )))
            }
        });
    }
    if !records.iter().any(|r| matches!(r, TranscriptRecord::Turn(_))) {
        return Err(CliError::parse("transcript holds no turns"));
    }
    Ok(records)
}

pub fn turns(records: &[TranscriptRecord]) -> impl Iterator<Item = &DialogueTurn> {
    records.iter().filter_map(|r| match r {
        TranscriptRecord::Turn(t) => Some(t),
        TranscriptRecord::SessionEnd => None,
    })
}
