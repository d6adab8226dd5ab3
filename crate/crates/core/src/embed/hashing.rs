use unicode_segmentation::UnicodeSegmentation;

use super::Embedder;
use crate::error::{Error, Result};
use crate::types::Embedding;

/// Seed folded into the FNV-1a offset basis.
pub const HASH_SEED: u64 = 0x9e37_79b9_7f4a_7c15;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Lowercased Unicode words.
pub fn tokenize(text: &str) -> Vec<String> {
    text.unicode_words().map(str::to_lowercase).collect()
}

fn seeded_fnv1a(key: &str) -> u64 {
    key.bytes().fold(FNV_OFFSET ^ HASH_SEED, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

/// Unigram and bigram counts hashed into `dim` buckets, then L2-normalized.
/// Bigram keys are the two tokens joined by a single space.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dim: usize,
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("hashing embedder needs dim >= 1".into()));
        }
        Ok(HashingEmbedder { dim })
    }

    fn bucket(&self, key: &str) -> usize {
        (seeded_fnv1a(key) % self.dim as u64) as usize
    }
}

impl Embedder for HashingEmbedder {
    fn name(&self) -> &str {
        "hashing"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Embedding> {
        if text.trim().is_empty() {
            return Err(Error::invalid("cannot embed empty text"));
        }
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(Error::invalid(format!("no word tokens in {text:?}")));
        }
        let mut counts = vec![0.0; self.dim];
        for tok in &tokens {
            counts[self.bucket(tok)] += 1.0;
        }
        for pair in tokens.windows(2) {
            counts[self.bucket(&format!("{} {}", pair[0], pair[1]))] += 1.0;
        }
        Embedding::new(counts)
    }
}
