//! Embedding providers.
//!
//! Every provider hands back unit-norm [`Embedding`]s of a fixed dimension.
//! The default is a deterministic feature-hashing embedder; a remote client
//! speaks the `POST /embed` wire contract.

mod hashing;
mod remote;

pub use hashing::{tokenize, HashingEmbedder, HASH_SEED};
pub use remote::{EmbedRequest, EmbedResponse, RemoteEmbedder};

use crate::error::Result;
use crate::types::Embedding;

pub trait Embedder: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn embed(&self, text: &str) -> Result<Embedding>;

    /// Embeds in input order. Providers with a batch endpoint override this.
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Embedding>> {
        texts.iter().map(|t| self.embed(t)).collect()
    }
}
