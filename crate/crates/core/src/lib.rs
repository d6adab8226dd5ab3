//! Incremental event-graph memory for multi-session dialogue.
//!
//! Turns are split into event mentions, clustered into event nodes per
//! segment, linked by sequential, temporal and reasoning edges, and folded
//! into a layered memory with summary nodes and update edges. Retrieval
//! mixes recency, relevance and PageRank and renders a prompt packet.

pub mod config;
pub mod embed;
pub mod error;
pub mod evaluation;
pub mod extraction;
pub mod graph_build;
pub mod hierarchy;
pub mod pipeline;
pub mod preservation;
pub mod registry;
pub mod retrieval;
pub mod types;

pub use config::EngineConfig;
pub use error::{Error, Result};
pub use hierarchy::LayeredGraph;
pub use pipeline::{build_memory, MemoryBuilder, TranscriptRecord};
pub use registry::{Registries, Registry, Strategies};
pub use types::{DialogueTurn, EdgeKind, Embedding, EventNode, NodeId, TypedEdge};
