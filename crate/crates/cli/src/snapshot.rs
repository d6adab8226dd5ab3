//! On-disk memory snapshots.
//!
//! Field order is fixed by the struct layout and every map is ordered, so
//! equal snapshots serialize to identical bytes. Floats are written as
//! shortest round-trip decimals and parsed back bit-exactly.

use std::path::Path;

use ew_core::{EngineConfig, LayeredGraph, TranscriptRecord};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSnapshot {
    pub format_version: u32,
    pub config: EngineConfig,
    pub transcript: Vec<TranscriptRecord>,
    pub memory: LayeredGraph,
}

impl GraphSnapshot {
    pub fn new(config: EngineConfig, transcript: Vec<TranscriptRecord>, memory: LayeredGraph) -> Self {
        GraphSnapshot {
            format_version: FORMAT_VERSION,
            config,
            transcript,
            memory,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("snapshot serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let snap: GraphSnapshot = serde_json::from_str(text)
            .map_err(|e| CliError::parse(format!("snapshot: {e}")))?;
        if snap.format_version != FORMAT_VERSION {
            return Err(CliError::parse(format!(
                "snapshot format {} is not supported (expected {FORMAT_VERSION})",
                snap.format_version
            )));
        }
        snap.memory.validate()?;
        Ok(snap)
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_json())
            .map_err(|e| CliError::parse(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
